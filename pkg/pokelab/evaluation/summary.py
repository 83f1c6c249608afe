"""Mean ± standard error curves, paired sign tests and the text report."""
from __future__ import annotations
import csv
import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple
import numpy as np
from jinja2 import Environment, StrictUndefined
from scipy.stats import binomtest
from ..exceptions import CsvFormatError
from .experiment import CSV_FIELDS

MODEL_ORDER = ("joint", "inverse", "blob")

REPORT_TEMPLATE = """\
{{ "%-8s %-8s %9s %6s  %-22s %-22s"|format("size", "model", "episodes", "k", "rel_loc_err", "pose_err_deg") }}
{% for c in cells %}
{{ "%-8d %-8s %9d %6d  %-22s %-22s"|format(c.train_size, c.model, c.episodes, c.k, c.rel, c.pose) }}
{% endfor %}
{% if comparisons %}

paired sign tests on rel_loc_err at k={{ headline_k }}
{% for t in comparisons %}
{{ "%-8d %-8s vs %-8s wins %4d losses %4d ties %4d  p=%.4g"|format(t.train_size, t.model_a, t.model_b, t.wins, t.losses, t.ties, t.p_value) }}
{% endfor %}
{% endif %}
"""


@dataclass
class CurvePoint:
    k: int
    n: int
    rel_mean: float
    rel_stderr: Optional[float]
    pose_mean: float
    pose_stderr: Optional[float]


@dataclass
class SignTest:
    train_size: int
    model_a: str
    model_b: str
    k: int
    wins: int
    losses: int
    ties: int
    p_value: float


@dataclass
class Summary:
    curves: Dict[Tuple[int, str], List[CurvePoint]] = field(default_factory=dict)
    comparisons: List[SignTest] = field(default_factory=list)
    report: str = ""


def mean_stderr(values: Sequence[float]) -> Tuple[float, Optional[float]]:
    """Stderr is None for a single value."""
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, None
    return mean, float(arr.std(ddof=1) / math.sqrt(arr.size))


def paired_sign_test(a: Sequence[float], b: Sequence[float]) -> Tuple[int, int, int, float]:
    """Two-sided sign test on paired values; a win means a < b. Ties are dropped."""
    if len(a) != len(b):
        raise ValueError("paired samples must have equal length")
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    wins, losses = int(np.sum(diff < 0)), int(np.sum(diff > 0))
    ties = len(diff) - wins - losses
    if wins + losses == 0:
        return wins, losses, ties, 1.0
    return wins, losses, ties, float(binomtest(wins, wins + losses, 0.5).pvalue)


def read_metrics_csv(path: str | Path) -> List[dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"metrics csv not found: {path}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    if reader.fieldnames is None:
        raise CsvFormatError(f"empty csv: {path}")
    missing = set(CSV_FIELDS) - set(reader.fieldnames)
    if missing:
        raise CsvFormatError(f"missing columns: {sorted(missing)}")
    rows = []
    for line_no, raw in enumerate(reader, start=2):
        try:
            rows.append({
                "model": raw["model"], "train_size": int(raw["train_size"]), "episode": int(raw["episode"]),
                "k": int(raw["k"]), "rel_loc_err": float(raw["rel_loc_err"]),
                "pose_err_deg": float(raw["pose_err_deg"]),
            })
        except (TypeError, ValueError) as e:
            raise CsvFormatError(f"malformed row {line_no}: {e}") from e
    if not rows:
        raise CsvFormatError(f"no data rows: {path}")
    return rows


def _fmt(mean: float, stderr: Optional[float]) -> str:
    return f"{mean:.4f}" if stderr is None else f"{mean:.4f} ± {stderr:.4f}"


def build_summary(rows: Iterable[dict], headline_k: int = 5) -> Summary:
    grouped: Dict[Tuple[int, str, int], Dict[int, Tuple[float, float]]] = defaultdict(dict)
    for r in rows:
        grouped[(r["train_size"], r["model"], r["k"])][r["episode"]] = (r["rel_loc_err"], r["pose_err_deg"])

    summary = Summary()
    for (size, model, k) in sorted(grouped):
        per_episode = grouped[(size, model, k)]
        rel_mean, rel_se = mean_stderr([v[0] for v in per_episode.values()])
        pose_mean, pose_se = mean_stderr([v[1] for v in per_episode.values()])
        summary.curves.setdefault((size, model), []).append(
            CurvePoint(k, len(per_episode), rel_mean, rel_se, pose_mean, pose_se))

    sizes = sorted({s for s, _ in summary.curves})
    models = sorted({m for _, m in summary.curves}, key=lambda m: (MODEL_ORDER + (m,)).index(m))
    for size in sizes:
        for a, b in itertools.combinations(models, 2):
            ka, kb = grouped.get((size, a, headline_k)), grouped.get((size, b, headline_k))
            if not ka or not kb:
                continue
            shared = sorted(set(ka) & set(kb))
            if not shared:
                continue
            wins, losses, ties, p = paired_sign_test([ka[e][0] for e in shared], [kb[e][0] for e in shared])
            summary.comparisons.append(SignTest(size, a, b, headline_k, wins, losses, ties, p))

    cells = []
    for size in sizes:
        for model in models:
            curve = summary.curves.get((size, model))
            if not curve:
                continue
            point = next((c for c in curve if c.k == headline_k), curve[-1])
            cells.append(dict(train_size=size, model=model, episodes=point.n, k=point.k,
                              rel=_fmt(point.rel_mean, point.rel_stderr),
                              pose=_fmt(point.pose_mean, point.pose_stderr)))
    env = Environment(undefined=StrictUndefined, trim_blocks=True, lstrip_blocks=True, autoescape=False)
    summary.report = env.from_string(REPORT_TEMPLATE).render(
        cells=cells, comparisons=summary.comparisons, headline_k=headline_k)
    return summary


def write_curves(summary: Summary, out_dir: str | Path) -> List[Path]:
    """One gnuplot-friendly TSV per (size, model); absent stderr is written as NaN."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for (size, model), curve in sorted(summary.curves.items()):
        path = out_dir / f"curve_{model}_{size}.tsv"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# k\tn\trel_mean\trel_stderr\tpose_mean\tpose_stderr\n")
            for c in curve:
                se_rel = "nan" if c.rel_stderr is None else repr(c.rel_stderr)
                se_pose = "nan" if c.pose_stderr is None else repr(c.pose_stderr)
                fh.write(f"{c.k}\t{c.n}\t{c.rel_mean!r}\t{se_rel}\t{c.pose_mean!r}\t{se_pose}\n")
        paths.append(path)
    return paths


def summarize(csv_path: str | Path, out_dir: str | Path | None = None, headline_k: int = 5) -> Summary:
    summary = build_summary(read_metrics_csv(csv_path), headline_k)
    if out_dir is not None:
        write_curves(summary, out_dir)
        (Path(out_dir) / "summary.txt").write_text(summary.report, encoding="utf-8")
    return summary
