from __future__ import annotations
import sqlite3, time
from contextlib import contextmanager
from pathlib import Path
from typing import Optional, Dict, Any

_SCHEMA = """
CREATE TABLE IF NOT EXISTS runs (
  id INTEGER PRIMARY KEY,
  command TEXT,
  config_json TEXT,
  status TEXT,
  detail TEXT,
  latency_ms INTEGER,
  created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
);
CREATE TABLE IF NOT EXISTS epochs (
  id INTEGER PRIMARY KEY,
  run_id INTEGER,
  epoch INTEGER,
  train_loss REAL,
  heldout_loss REAL,
  heldout_loc_acc REAL,
  heldout_angle_acc REAL,
  heldout_len_acc REAL
);
"""


class RunLogger:
    """Append-only sqlite record of CLI runs and their per-epoch training metrics."""

    def __init__(self, db_path: str | Path) -> None:
        self.path = Path(db_path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with sqlite3.connect(self.path) as con:
            con.executescript(_SCHEMA)

    def start(self, command: str, config_json: str) -> int:
        with sqlite3.connect(self.path) as con:
            cur = con.execute(
                "INSERT INTO runs(command, config_json, status) VALUES (?,?,?)",
                (command, config_json, "running"),
            )
            return int(cur.lastrowid)

    def finish(self, run_id: int, status: str, latency_ms: int, detail: str | None = None) -> None:
        with sqlite3.connect(self.path) as con:
            con.execute(
                "UPDATE runs SET status=?, latency_ms=?, detail=? WHERE id=?",
                (status, latency_ms, detail, run_id),
            )

    def write_epoch(self, run_id: int, row: Dict[str, Any]) -> None:
        with sqlite3.connect(self.path) as con:
            con.execute(
                """INSERT INTO epochs(run_id,epoch,train_loss,heldout_loss,heldout_loc_acc,heldout_angle_acc,heldout_len_acc)
                   VALUES (?,?,?,?,?,?,?)""",
                (run_id, row["epoch"], row["train_loss"], row["heldout_loss"],
                 row["heldout_loc_acc"], row["heldout_angle_acc"], row["heldout_len_acc"]),
            )

    def runs(self) -> list[Dict[str, Any]]:
        with sqlite3.connect(self.path) as con:
            con.row_factory = sqlite3.Row
            return [dict(r) for r in con.execute("SELECT * FROM runs ORDER BY id")]

    def epochs(self, run_id: int) -> list[Dict[str, Any]]:
        with sqlite3.connect(self.path) as con:
            con.row_factory = sqlite3.Row
            return [dict(r) for r in con.execute(
                "SELECT * FROM epochs WHERE run_id=? ORDER BY epoch", (run_id,))]


@contextmanager
def run(logger: Optional[RunLogger], command: str, config_json: str):
    """Time a command and record its outcome; yields a dict the body may annotate."""
    t0 = time.time()
    record: Dict[str, Any] = {"run_id": None, "detail": None}
    if logger:
        record["run_id"] = logger.start(command, config_json)
    status = "error"
    try:
        yield record
        status = "ok"
    finally:
        if logger:
            latency = int((time.time() - t0) * 1000)
            logger.finish(record["run_id"], status, latency, record["detail"])
