import json
import logging
import math
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Optional
import numpy as np
import typer
from .config import DEFAULT_CONFIG_NAME, apply_overrides, config_json, config_yaml, load_config
from .datastore.binary import MAGIC as DATASET_MAGIC, PokeDataset, read_header
from .datastore.generate import generate
from .dynamics.diagnostics import check_joint_gradients
from .dynamics.network import PokeModel
from .dynamics.trainer import train as train_model, write_training_log
from .blob import run_blob_episode
from .evaluation.experiment import (episode_poses, episode_seed, metric_row, run_experiment,
                                    run_single_poke_study, write_metrics_csv)
from .evaluation.summary import summarize
from .exceptions import ConfigError, PokeLabError
from .logging import RunLogger, run
from .model import GlobalConfig
from .nn.checkpoint import MAGIC as CHECKPOINT_MAGIC, load_checkpoint
from .planner import Episode, run_episode, write_episodes
from .sim.geometry import Pose

app = typer.Typer(add_completion=False, help="Learn to poke a simulated rectangle from image pairs.")

GRADCHECK_TOLERANCE = 1e-4

ConfigOpt = typer.Option(None, "--config", "-c", help="YAML config (falls back to $POKE_CONFIG, ./pokelab.yaml)")
JobsOpt = typer.Option(None, "--jobs", "-j", help="Worker threads for gradients and episodes")
VerboseOpt = typer.Option(False, "--verbose", "-v", help="Log progress to stderr")


def _setup(config: Optional[str], verbose: bool) -> GlobalConfig:
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, stream=sys.stderr,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s", force=True)
    try:
        cfg = load_config(config)
    except ConfigError as e:
        typer.echo(f"❌ Config error: {e}", err=True)
        raise typer.Exit(2)
    return cfg


def _echo_config(cfg: GlobalConfig) -> None:
    typer.echo("# effective config", err=True)
    typer.echo(config_yaml(cfg).rstrip(), err=True)


def _run_logger(cfg: GlobalConfig) -> Optional[RunLogger]:
    return RunLogger(cfg.logging.db_path) if cfg.logging.enabled else None


def _override(cfg: GlobalConfig, section: str, **values) -> GlobalConfig:
    try:
        return apply_overrides(cfg, section, **values)
    except ConfigError as e:
        raise typer.BadParameter(str(e))


@contextmanager
def _errors():
    """Library errors -> exit 1; configuration errors -> exit 2."""
    try:
        yield
    except ConfigError as e:
        typer.echo(f"❌ Config error: {e}", err=True)
        raise typer.Exit(2)
    except PokeLabError as e:
        typer.echo(f"❌ {type(e).__name__}: {e}", err=True)
        raise typer.Exit(1)
    except FileNotFoundError as e:
        typer.echo(f"❌ File not found: {e}", err=True)
        raise typer.Exit(1)
    except OSError as e:
        typer.echo(f"❌ I/O error: {e}", err=True)
        raise typer.Exit(1)


def parse_pose(text: str) -> Pose:
    """"cx,cy,theta_degrees" -> Pose."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise typer.BadParameter(f"expected 'cx,cy,theta_degrees', got '{text}'")
    try:
        cx, cy, deg = (float(p) for p in parts)
    except ValueError:
        raise typer.BadParameter(f"non-numeric pose '{text}'")
    return Pose(cx=cx, cy=cy, theta=math.radians(deg))


def _fmt_pose(p: Pose) -> str:
    return f"({p.cx:6.2f}, {p.cy:6.2f}, {math.degrees(p.theta):6.1f}°)"


def _echo_episode(ep: Episode) -> None:
    typer.echo(f"start {_fmt_pose(ep.init)}  goal {_fmt_pose(ep.goal)}")
    for k, s in enumerate(ep.steps, start=1):
        pk = s.poke
        typer.echo(f"  {k:2d}. poke at ({pk.px:5.1f}, {pk.py:5.1f}) θ={math.degrees(pk.theta):5.1f}° "
                   f"l={pk.length:5.2f} -> {_fmt_pose(s.pose_after)}")
    typer.echo(f"🏁 {len(ep.steps)} pokes, terminal reason: {ep.terminal_reason}")


@app.command()
def init(force: bool = typer.Option(False, help="Overwrite an existing config")):
    """Write a fully populated default config to ./pokelab.yaml."""
    target = Path.cwd() / DEFAULT_CONFIG_NAME
    if target.exists() and not force:
        typer.echo(f"❌ {target.name} already exists (use --force to overwrite)", err=True)
        raise typer.Exit(1)
    target.write_text(config_yaml(GlobalConfig()), encoding="utf-8")
    typer.echo(f"✅ Wrote {target.name}")


@app.command()
def gen(
    n: int = typer.Option(..., "--n", min=1, help="Number of interaction records"),
    out: Path = typer.Option(..., "--out", "-o", help="Output .pokd file"),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, help="Generator seed (default: experiment.data_seed)"),
    config: Optional[str] = ConfigOpt,
    verbose: bool = VerboseOpt,
):
    """Generate a dataset of random pokes."""
    cfg = _setup(config, verbose)
    seed = cfg.experiment.data_seed if seed is None else seed
    _echo_config(cfg)
    with _errors(), run(_run_logger(cfg), "gen", config_json(cfg)) as rec:
        header = generate(n, seed, cfg.arena, out)
        rec["detail"] = str(out)
    a = header.params
    typer.echo(f"✅ {out}: {header.record_count} records, seed {header.seed}")
    typer.echo(f"   arena {a.arena_size}px, rect {a.rect_w}x{a.rect_h}, k_t={a.k_t}, k_r={a.k_r}, "
               f"poke length [{a.l_min}, {a.l_max}]")


@app.command()
def train(
    data: Path = typer.Option(..., "--data", "-d", help="Training .pokd file"),
    out: Path = typer.Option(..., "--out", "-o", help="Checkpoint path (.pokm)"),
    model: str = typer.Option("joint", "--model", "-m", help="joint | inverse"),
    lam: Optional[float] = typer.Option(None, "--lambda", help="Forward-loss weight (joint default 0.1)"),
    epochs: Optional[int] = typer.Option(None, "--epochs"),
    batch_size: Optional[int] = typer.Option(None, "--batch-size"),
    lr: Optional[float] = typer.Option(None, "--lr"),
    seed: Optional[int] = typer.Option(None, "--seed", min=0),
    log_csv: Optional[Path] = typer.Option(None, "--log", help="Per-epoch CSV (default: <out>.csv)"),
    config: Optional[str] = ConfigOpt,
    jobs: Optional[int] = JobsOpt,
    verbose: bool = VerboseOpt,
):
    """Train the joint model, or the inverse-only model (λ = 0)."""
    if model not in ("joint", "inverse"):
        raise typer.BadParameter("--model must be 'joint' or 'inverse'")
    if model == "inverse" and lam not in (None, 0.0):
        raise typer.BadParameter("--model inverse trains with lambda 0; drop --lambda")
    cfg = _setup(config, verbose)
    if model == "inverse":
        lam = 0.0
    cfg = _override(cfg, "train", lambda_=lam, epochs=epochs, batch_size=batch_size,
                    learning_rate=lr, seed=seed, jobs=jobs)
    _echo_config(cfg)
    logger = _run_logger(cfg)
    cfg_json = config_json(cfg)

    with _errors(), run(logger, "train", cfg_json) as rec:
        dataset = PokeDataset(data)

        def on_epoch(stats):
            typer.echo(f"  epoch {stats.epoch:3d}  train {stats.train_loss:.4f}  heldout "
                       f"{'-' if stats.heldout_loss is None else f'{stats.heldout_loss:.4f}'}")
            if logger and rec["run_id"] is not None:
                logger.write_epoch(rec["run_id"], stats.__dict__)

        result = train_model(dataset, cfg.train, tag=model, on_epoch=on_epoch, config_json=cfg_json)
        result.model.save(out)
        write_training_log(log_csv or out.with_suffix(".csv"), result.log, cfg_json)
        rec["detail"] = str(out)
    typer.echo(f"✅ Saved {model} model (λ={result.model.meta.lambda_}) to {out}")


@app.command(name="eval")
def evaluate(
    sizes: Optional[str] = typer.Option(None, "--sizes", help="Comma-separated train sizes, e.g. 10000,20000"),
    study: Optional[str] = typer.Option(None, "--study", help="planning | single-poke"),
    episodes: Optional[int] = typer.Option(None, "--episodes"),
    models: Optional[str] = typer.Option(None, "--models", help="Comma-separated subset of joint,inverse,blob"),
    checkpoints: Optional[Path] = typer.Option(None, "--checkpoints",
                                               help="Load <model>_<size>.pokm from here instead of training"),
    out_dir: Optional[Path] = typer.Option(None, "--out-dir", help="Output directory (default: paths.out_dir)"),
    config: Optional[str] = ConfigOpt,
    jobs: Optional[int] = JobsOpt,
    verbose: bool = VerboseOpt,
):
    """Run the paired-episode experiment matrix and summarize it."""
    cfg = _setup(config, verbose)
    try:
        size_list = [int(s) for s in sizes.split(",")] if sizes else None
    except ValueError:
        raise typer.BadParameter(f"--sizes must be comma-separated integers, got '{sizes}'")
    model_list = [m.strip() for m in models.split(",")] if models else None
    exp_updates = dict(train_sizes=size_list, study=study, episodes=episodes, models=model_list)
    if checkpoints is not None:
        exp_updates.update(train_inline=False, checkpoint_dir=str(checkpoints))
    cfg = _override(cfg, "experiment", **exp_updates)
    cfg = _override(cfg, "train", jobs=jobs)
    _echo_config(cfg)
    out_dir = out_dir or Path(cfg.paths.out_dir)
    n_jobs = cfg.train.jobs

    with _errors(), run(_run_logger(cfg), "eval", config_json(cfg)) as rec:
        if cfg.experiment.study == "single-poke":
            rows, max_pokes = run_single_poke_study(cfg, jobs=n_jobs), 1
        else:
            rows, max_pokes = run_experiment(cfg, jobs=n_jobs), cfg.planner.max_pokes
        csv_path = out_dir / "metrics.csv"
        count = write_metrics_csv(csv_path, rows, max_pokes, config_json(cfg))
        summary = summarize(csv_path, out_dir, headline_k=min(cfg.experiment.headline_k, max_pokes))
        rec["detail"] = str(csv_path)
    typer.echo(summary.report.rstrip())
    typer.echo(f"✅ {count} rows -> {csv_path}")


@app.command()
def plan(
    checkpoint: Path = typer.Option(..., "--checkpoint", "-m", help="Trained model (.pokm)"),
    init_pose: str = typer.Option(..., "--init", help="Start pose 'cx,cy,theta_degrees'"),
    goal_pose: str = typer.Option(..., "--goal", help="Goal pose 'cx,cy,theta_degrees'"),
    max_pokes: Optional[int] = typer.Option(None, "--max-pokes"),
    sample: bool = typer.Option(False, "--sample", help="Sample bins instead of argmax"),
    dump: Optional[Path] = typer.Option(None, "--dump", help="Write the episode as JSON lines"),
    config: Optional[str] = ConfigOpt,
    verbose: bool = VerboseOpt,
):
    """Run one greedy episode with a trained model and print every step."""
    start, goal = parse_pose(init_pose), parse_pose(goal_pose)
    cfg = _setup(config, verbose)
    cfg = _override(cfg, "planner", max_pokes=max_pokes, selection="sample" if sample else None)
    _echo_config(cfg)
    with _errors(), run(_run_logger(cfg), "plan", config_json(cfg)):
        model = PokeModel.load(checkpoint)
        episode = run_episode(start, goal, model, model.arena, cfg.planner)
        if dump:
            write_episodes(dump, [episode])
    _echo_episode(episode)


@app.command()
def baseline(
    episodes: Optional[int] = typer.Option(None, "--episodes"),
    init_pose: Optional[str] = typer.Option(None, "--init", help="Single episode start 'cx,cy,theta_degrees'"),
    goal_pose: Optional[str] = typer.Option(None, "--goal", help="Single episode goal 'cx,cy,theta_degrees'"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Metrics CSV"),
    config: Optional[str] = ConfigOpt,
    verbose: bool = VerboseOpt,
):
    """Run the blob baseline, either once or over seeded episodes."""
    if (init_pose is None) != (goal_pose is None):
        raise typer.BadParameter("--init and --goal go together")
    cfg = _setup(config, verbose)
    cfg = _override(cfg, "experiment", episodes=episodes)
    _echo_config(cfg)
    if init_pose is not None:
        with _errors():
            episode = run_blob_episode(parse_pose(init_pose), parse_pose(goal_pose), cfg.arena, cfg.blob)
        _echo_episode(episode)
        return

    exp = cfg.experiment
    with _errors(), run(_run_logger(cfg), "baseline", config_json(cfg)):
        rows = []
        for e in range(exp.episodes):
            s = episode_seed(exp.seed, e)
            start, goal = episode_poses(s, cfg.arena, exp)
            ep = run_blob_episode(start, goal, cfg.arena, cfg.blob, np.random.Generator(np.random.PCG64([s, 1])))
            rows.append(metric_row(ep, "blob", 0, e, s))
        if out:
            write_metrics_csv(out, rows, cfg.blob.max_pokes, config_json(cfg))
    finals = np.array([r.rel_loc_err[-1] for r in rows])
    typer.echo(f"📊 blob: {len(rows)} episodes, mean final rel_loc_err {finals.mean():.4f}, "
               f"{np.mean(finals < 0.2) * 100:.1f}% below 0.2")


@app.command()
def gradcheck(
    latent_dim: int = typer.Option(128, "--latent-dim", min=1),
    batch_size: int = typer.Option(4, "--batch-size", min=1),
    fraction: float = typer.Option(0.01, "--fraction", help="Share of entries checked per array"),
    seed: int = typer.Option(0, "--seed", min=0),
    config: Optional[str] = ConfigOpt,
    verbose: bool = VerboseOpt,
):
    """Compare analytic and central-difference gradients of the joint loss."""
    cfg = _setup(config, verbose)
    _echo_config(cfg)
    with _errors():
        result = check_joint_gradients(cfg.arena, latent_dim=latent_dim, batch_size=batch_size,
                                       lam=cfg.train.lambda_, seed=seed, fraction=fraction)
    for name, err, n, kinks, unresolved in zip(result.names, result.per_array, result.checked, result.kinks,
                                               result.unresolved):
        mark = "✓" if err < GRADCHECK_TOLERANCE else "✗"
        typer.echo(f"  {mark} {name:20s} {err:.3e}  ({n} checked, {kinks} at kinks, {unresolved} below round-off)")
    worst = result.worst
    if worst >= GRADCHECK_TOLERANCE:
        typer.echo(f"❌ max relative error {worst:.3e} >= {GRADCHECK_TOLERANCE:g}", err=True)
        raise typer.Exit(1)
    typer.echo(f"✅ max relative error {worst:.3e}")


@app.command()
def info(path: Path = typer.Argument(..., help="A .pokd dataset or .pokm checkpoint")):
    """Print a dataset header or checkpoint descriptor."""
    with _errors():
        if not path.exists():
            raise FileNotFoundError(str(path))
        with open(path, "rb") as fh:
            magic = fh.read(4)
        if magic == DATASET_MAGIC:
            header = read_header(path)
            typer.echo(json.dumps({"format": "POKD", "version": header.version,
                                   "record_count": header.record_count, "seed": header.seed,
                                   "arena": header.params.model_dump(mode="json")}, indent=2))
        elif magic == CHECKPOINT_MAGIC:
            meta, arrays = load_checkpoint(path)
            meta.pop("arrays", None)
            meta["parameters"] = int(sum(a.size for a in arrays.values()))
            typer.echo(json.dumps(meta, indent=2, default=str))
        else:
            typer.echo(f"❌ Unrecognised file: {path}", err=True)
            raise typer.Exit(1)


if __name__ == "__main__":
    app()
