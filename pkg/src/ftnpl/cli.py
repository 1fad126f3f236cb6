"""Command-line experiment runner.

    ftnpl <experiment> [--config FILE] [--seed N] [--steps N] [--learner NAME]
                       [--k N] [--code-size N] [--penalty MODE] [--out DIR]

Flags override keys from the JSON config file, which override defaults.
Each seed writes ``<experiment>_<learner>_seed<N>.csv`` (the trajectory log)
and ``...json`` (summary with the resolved configuration) into ``--out``;
circleworld runs also write the final rollout as ``..._rollout.csv``.

Exit codes: 0 run finished with all summaries written, 2 invalid
configuration, 3 a run hit a numeric failure and has no verdict,
4 output could not be written.
"""
from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .analytics import RunSummary
from .config import EXPERIMENTS, LEARNERS, ExperimentConfig, from_mapping, load_config
from .errors import ConfigError, NumericError
from .mediator import PENALTIES

log = logging.getLogger("ftnpl")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


@dataclass
class RunArtifacts:
    csv_path: Path
    summary_path: Path
    config: dict
    summary: RunSummary
    extra_paths: tuple = ()


def _stem(cfg: ExperimentConfig) -> str:
    return f"{cfg.experiment}_{cfg.learner}_seed{cfg.seed}"


def _call(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except TypeError as exc:
        # only unknown keyword arguments get here: they come from "extra"
        if "unexpected keyword" in str(exc):
            raise ConfigError(str(exc), field="extra") from exc
        raise


def _run_pennies(cfg):
    from . import dynamics

    nonconvex = cfg.experiment == "pennies_nonconvex"
    if cfg.learner == "ftrl_l2":
        return _call(dynamics.run_pennies_ftrl, nonconvex, cfg.steps, cfg.eta, code_size=cfg.code_size, **cfg.extra)
    if cfg.learner == "ftpl":
        return _call(dynamics.run_pennies_ftpl, nonconvex, cfg.steps, cfg.seed, zeta=cfg.zeta,
                     code_size=cfg.code_size, **cfg.extra)
    return _call(dynamics.run_pennies_ftnpl, nonconvex, cfg.steps, cfg.seed, k=cfg.k, code_size=cfg.code_size,
                 eta=cfg.eta, eta_m=cfg.eta_m, penalty=cfg.penalty, code_mode=cfg.code_mode, **cfg.extra)


def _run_replicator(cfg):
    from . import dynamics
    from .analytics import TrajectoryLog

    if cfg.replicator_mode == "flow":
        return _call(dynamics.run_replicator, cfg.steps, h=cfg.eta, code_size=cfg.code_size, **cfg.extra)
    out = _call(dynamics.run_mw_selfplay, cfg.steps, eta=cfg.zeta, **cfg.extra)
    tp, td = out["traj_pi"], out["traj_d"]
    traj = np.concatenate([tp, td], axis=1)
    game = out["game"]
    lp = np.einsum("ta,ab,tb->t", tp[:-1], game.loss_matrix_pi, td[:-1])
    mu = game.mne_reference()
    trajlog = TrajectoryLog.from_arrays(traj, np.zeros((cfg.steps, cfg.code_size)), lp, -lp, None, mu)
    curve = [[int(t + 1), float(a), float(b)] for t, (a, b) in enumerate(zip(out["regret_pi"], out["regret_d"]))]
    return dynamics.RunResult(trajlog, traj, mu, {"eta": out["eta"]}, curve)


def _run_toygan(cfg):
    from . import dynamics

    kw = dict(k=cfg.k, code_size=cfg.code_size, lr=cfg.eta, eta_m=cfg.eta_m, penalty=cfg.penalty)
    if cfg.code_mode is not None:
        kw["code_mode"] = cfg.code_mode
    return _call(dynamics.run_toygan, cfg.learner, cfg.steps, cfg.seed, **kw, **cfg.extra)


def _run_circleworld(cfg, out_dir):
    from .dynamics import RunResult
    from .imitation import GailConfig, run_circleworld, write_trajectory_csv

    kw = dict(code_size=cfg.code_size, k=cfg.k, penalty=cfg.penalty, policy_lr=cfg.eta, mediator_lr=cfg.eta_m)
    if cfg.code_mode is not None:
        kw["code_mode"] = cfg.code_mode
    gcfg = _call(GailConfig, **kw, **cfg.extra)
    state, trajlog = run_circleworld(cfg.steps, cfg.seed, gcfg)
    radius = state.history["radius"]
    gap = state.history["score_gap"]
    slope = float(np.polyfit(np.arange(len(gap)), gap, 1)[0]) if len(gap) > 1 else 0.0
    rollout = out_dir / f"{_stem(cfg)}_rollout.csv"
    extras = {"final_radius": radius[-1], "expert_radius": gcfg.mode.radius, "score_gap_slope": slope,
              "score_gap_final": gap[-1], "digest": state.digest(), "rollout_csv": rollout.name}
    return RunResult(trajlog, None, None, extras), (rollout, state.last_batch, write_trajectory_csv)


def run_experiment(cfg: ExperimentConfig) -> RunArtifacts:
    """Run a single seed and write its CSV and JSON summary atomically."""
    cfg = cfg.resolved()
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    deferred = None
    if cfg.experiment in ("pennies", "pennies_nonconvex"):
        result = _run_pennies(cfg)
    elif cfg.experiment == "replicator":
        result = _run_replicator(cfg)
    elif cfg.experiment == "toygan":
        result = _run_toygan(cfg)
    else:
        result, deferred = _run_circleworld(cfg, out_dir)
    echo = replace(cfg, seeds=None).to_dict()
    kw = dict(experiment=cfg.experiment, learner=cfg.learner, seed=cfg.seed, steps=cfg.steps,
              regret_curve=result.regret_curve, extras=result.extras, config=echo)
    if result.traj is not None and result.mu_star is not None:
        summary = RunSummary.from_trajectory(result.traj, result.mu_star, **kw)
    else:
        summary = RunSummary(**kw)
    stem = _stem(cfg)
    csv_path = result.log.write_csv(out_dir / f"{stem}.csv")
    extra_paths = ()
    if deferred is not None:
        path, batch, writer = deferred
        extra_paths = (writer(path, batch),)
    summary_path = summary.write(out_dir / f"{stem}.json")
    return RunArtifacts(Path(csv_path), Path(summary_path), echo, summary, extra_paths)


def run_sweep(cfg: ExperimentConfig) -> list[RunArtifacts]:
    """One independent run per seed in ``cfg.seeds`` (or just ``cfg.seed``)."""
    cfg = cfg.resolved()
    seeds = cfg.seeds if cfg.seeds is not None else [cfg.seed]
    runs = [replace(cfg, seed=s, seeds=None) for s in seeds]
    if cfg.workers > 1 and len(runs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(run_experiment, runs))
    return [run_experiment(r) for r in runs]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ftnpl", description="Run learning-dynamics experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="experiment", required=True, metavar="experiment")
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--seeds", type=int, nargs="+", help="run several seeds")
        sp.add_argument("--steps", type=int)
        # validated later so the error names the field
        sp.add_argument("--learner", help=f"one of {', '.join(LEARNERS)}")
        sp.add_argument("--k", type=int)
        sp.add_argument("--code-size", type=int, dest="code_size")
        sp.add_argument("--penalty", help=f"one of {', '.join(PENALTIES)}")
        sp.add_argument("--out")
    return p


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """Defaults, then the file, then flags."""
    cfg = ExperimentConfig()
    if args.config:
        data = load_config(args.config)
        if "experiment" in data and data["experiment"] != args.experiment:
            raise ConfigError(f"file says {data['experiment']!r} but the subcommand is {args.experiment!r}",
                              field="experiment")
        cfg = from_mapping(data, cfg)
    flags = {k: getattr(args, k) for k in ("seed", "seeds", "steps", "learner", "k", "code_size", "penalty", "out")}
    cfg = from_mapping({k: v for k, v in flags.items() if v is not None}, cfg)
    return replace(cfg, experiment=args.experiment)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = config_from_args(args).resolved()
        arts = run_sweep(cfg)
    except ConfigError as exc:
        print(f"ftnpl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"ftnpl: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"ftnpl: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    for a in arts:
        s = a.summary
        verdict = s.verdict if s.verdict is not None else "-"
        print(f"{a.csv_path}  verdict={verdict}")
        log.info("summary: %s", a.summary_path)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
