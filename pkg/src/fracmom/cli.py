"""Command line front end: load a config, run a pipeline, persist records.

Numerics are delegated entirely to the library modules; this file only
sequences them and writes results.  Exit codes: 0 success, 2 for any
configuration problem, 3 for a numerical failure (records produced
before the failure are already flushed).
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import criterion as crit
from . import localization as loc
from . import moments
from .config import ExperimentConfig, load_config, parse_config
from .errors import ConfigError, FracmomError, NumericalError
from .model import ground_energy
from .records import ResultRecord, append_records, emit_plot_data
from .resolvent import SpectralShift, indicator_set
from .validation import (
    DissipativeOperator,
    HSOperator,
    oracle_compare,
    weak_l1_levelset_measure,
)

logger = logging.getLogger(__name__)

DENSE_SWEEP_CAP = 500


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _default_point(grid, frac):
    return tuple(frac * b for b in grid.box)


def _ball(cfg: ExperimentConfig, center, what):
    grid = cfg.grid
    for x, b in zip(center, grid.box):
        if not (x - cfg.radius > 0.0 and x + cfg.radius < b):
            raise ConfigError(
                f"{what}: ball of radius {cfg.radius} at {tuple(center)} "
                f"does not fit inside the box {grid.box}")
    return indicator_set(grid, center, cfg.radius)


def _moment_sets(cfg: ExperimentConfig):
    x0 = cfg.x0 or _default_point(cfg.grid, 0.25)
    y0 = cfg.y0 or _default_point(cfg.grid, 0.75)
    return _ball(cfg, x0, "run.x0"), _ball(cfg, y0, "run.y0")


def _ladder_sets(cfg: ExperimentConfig):
    if cfg.ladder is None:
        raise ConfigError("run.ladder is required for this subcommand")
    x0 = cfg.x0 or _default_point(cfg.grid, 0.25)
    X = _ball(cfg, x0, "run.x0")
    targets = []
    for dist in cfg.ladder:
        y = list(x0)
        y[cfg.axis] += dist
        targets.append(_ball(cfg, tuple(y), f"run.ladder point {dist}"))
    return x0, X, targets


def _strip_timing(payload):
    # wall time is a timestamp in disguise; records must be rerun-stable
    return {k: v for k, v in payload.items() if k != "wall_time_ms"}


def _record(cfg, kind, payload):
    return ResultRecord(experiment=cfg.experiment,
                        config_hash=cfg.config_hash, kind=kind,
                        payload=payload)


class _Sink:
    """Accumulates records, flushing to disk as they arrive."""

    def __init__(self, cfg: ExperimentConfig, out_dir):
        self.cfg = cfg
        self.dir = Path(out_dir) if out_dir else Path(cfg.output_dir)
        self.records = []

    def add(self, kind, payload):
        rec = _record(self.cfg, kind, payload)
        self.records.append(rec)
        if "jsonl" in self.cfg.formats:
            append_records(self.dir / "records.jsonl", [rec])
        return rec

    def emit_csv(self, *kinds):
        if "csv" not in self.cfg.formats:
            return
        for kind in kinds:
            emit_plot_data(self.records, kind, self.dir / f"{kind}.csv")


# ---------------------------------------------------------------------------
# subcommand runners
# ---------------------------------------------------------------------------

def run_moment(cfg: ExperimentConfig, sink: _Sink, workers):
    X, Y = _moment_sets(cfg)
    for s in cfg.s_values:
        for E in cfg.E_values:
            for eps in cfg.eps_schedule:
                est = moments.estimate_fractional_moment(
                    cfg.model, s, SpectralShift(E=E, eps=eps), X, Y, cfg.N,
                    cfg.master_seed, workers=workers, diagnostic=(s == 1.0))
                sink.add("moment", _strip_timing(est.payload()))
                print(f"moment s={s} E={E} eps={eps}: "
                      f"{est.mean:.6g} +- {est.stderr:.2g}")
    sink.emit_csv("moment")


def run_epsilon_scan(cfg: ExperimentConfig, sink: _Sink, workers):
    if len(cfg.eps_schedule) < 2:
        raise ConfigError("run.eps: a scan needs at least two values")
    schedule = moments.EpsilonSchedule(cfg.eps_schedule)
    X, Y = _moment_sets(cfg)
    for s in cfg.s_values:
        for E in cfg.E_values:
            scan = moments.epsilon_scan(cfg.model, s, E, schedule, X, Y,
                                        cfg.N, cfg.master_seed,
                                        workers=workers,
                                        diagnostic=(s == 1.0))
            for est in scan.estimates:
                sink.add("moment", _strip_timing(est.payload()))
            print(f"epsilon-scan s={s} E={E}: verdict {scan.verdict}")
    sink.emit_csv("epsilon-scan")


def run_criterion(cfg: ExperimentConfig, sink: _Sink, workers):
    if cfg.L_values is None:
        raise ConfigError("run.L is required for criterion runs")
    schedule = moments.EpsilonSchedule(cfg.eps_schedule)
    E0 = ground_energy(cfg.model.h0())
    reports = []
    for s in cfg.s_values:
        for E in cfg.E_values:
            for L in cfg.L_values:
                raw = crit.estimate_raw_boundary_moment(
                    cfg.model, s, E, L, schedule, cfg.N, cfg.master_seed,
                    alphas=cfg.alphas, depth=cfg.depth, workers=workers)
                # a custom boundary depth opts out of the default L > 24r
                # regime gate; the config cross-checks already required
                # L > depth + r in that case
                gate_r = cfg.r if cfg.depth is None else None
                report = crit.criterion_factor(
                    s, cfg.lam, E, E0, L, cfg.grid.d, raw,
                    M_const=cfg.M_const, r=gate_r)
                reports.append(report)
                sink.add("criterion", report.payload())
                print(f"criterion s={s} E={E} L={L}: factor={report.factor:.6g}"
                      f" triggered={report.triggered}")
    sink.emit_csv("criterion")
    return reports


def run_decay(cfg: ExperimentConfig, sink: _Sink, workers):
    x0, X, targets = _ladder_sets(cfg)
    eps = cfg.eps_schedule[-1]
    fits = []
    for s in cfg.s_values:
        for E in cfg.E_values:
            shift = SpectralShift(E=E, eps=eps)
            norms = moments.scan_pair_norms(
                cfg.model, shift, [(X, Y) for Y in targets], cfg.N,
                cfg.master_seed, workers=workers)
            ests = moments.estimates_from_norms(
                norms, s, [shift] * len(targets), seed=cfg.master_seed)
            pts = [(d, e.mean) for d, e in zip(cfg.ladder, ests)]
            fit = crit.fit_exponential_decay(
                pts, stderrs=[e.stderr for e in ests])
            fits.append(fit)
            sink.add("fit", {
                "quantity": "moment-decay", "s": s, "E": E, "eps": eps,
                "A": fit.A, "mu": fit.mu, "r2": fit.r2,
                "points": [{"dist": d, "mean": e.mean, "stderr": e.stderr}
                           for d, e in zip(cfg.ladder, ests)]})
            print(f"decay s={s} E={E}: mu={fit.mu:.4f} r2={fit.r2:.4f}")
    sink.emit_csv("decay")
    return fits


def run_correlator(cfg: ExperimentConfig, sink: _Sink, workers):
    if cfg.window is None:
        raise ConfigError("run.window is required for correlator runs")
    window = loc.EigenWindow(a=cfg.window[0], b=cfg.window[1])
    x0, X, targets = _ladder_sets(cfg)
    values = np.empty((cfg.N, len(targets)))
    for i in range(cfg.N):
        H = cfg.model.hamiltonian_for_seed(
            moments.sample_seed(cfg.master_seed, i))
        pairs = loc.eigensolve_window(H, window)
        for j, Y in enumerate(targets):
            values[i, j] = loc.correlator_from_pairs(pairs, H, X, Y)
    means = values.mean(axis=0)
    stderrs = values.std(axis=0, ddof=1) / np.sqrt(cfg.N)
    for d, m, se in zip(cfg.ladder, means, stderrs):
        sink.add("correlator", {
            "dist": d, "value": float(m), "stderr": float(se),
            "window_lo": window.a, "window_hi": window.b})
    fit = crit.fit_exponential_decay(list(zip(cfg.ladder, means)),
                                     stderrs=stderrs)
    sink.add("fit", {"quantity": "correlator-decay", "A": fit.A,
                     "mu": fit.mu, "r2": fit.r2,
                     "window_lo": window.a, "window_hi": window.b,
                     "points": [{"dist": float(d), "mean": float(m),
                                 "stderr": float(se)}
                                for d, m, se in zip(cfg.ladder, means,
                                                    stderrs)]})
    print(f"correlator window=({window.a}, {window.b}): "
          f"mu={fit.mu:.4f} r2={fit.r2:.4f}")
    sink.emit_csv("correlator")
    return fit


def run_ids(cfg: ExperimentConfig, sink: _Sink, workers):
    for E in cfg.E_values:
        counts = loc.ids_counts(cfg.model, E, cfg.N, cfg.master_seed,
                                workers=workers)
        vol = cfg.grid.volume
        ids = float(counts.mean() / vol)
        stderr = float(counts.std(ddof=1) / np.sqrt(cfg.N) / vol)
        sink.add("ids", {"E": E, "ids": ids, "stderr": stderr, "N": cfg.N})
        print(f"ids E={E}: {ids:.6g} +- {stderr:.2g} per unit volume")
    sink.emit_csv("ids")


def run_validate(cfg: ExperimentConfig, sink: _Sink, workers):
    if cfg.grid.npoints > DENSE_SWEEP_CAP:
        raise ConfigError(
            f"validate needs <= {DENSE_SWEEP_CAP} grid points for the dense "
            f"oracle, got {cfg.grid.npoints}")
    X, Y = _moment_sets(cfg)
    failures = 0
    for i in range(cfg.n_configs):
        seed = moments.sample_seed(cfg.master_seed, i)
        E = cfg.E_values[i % len(cfg.E_values)]
        eps = cfg.eps_schedule[i % len(cfg.eps_schedule)]
        rep = oracle_compare(cfg.model, SpectralShift(E=E, eps=eps), X, Y,
                             seed=seed)
        failures += 0 if rep.passed else 1
        sink.add("validation", {"name": f"oracle-{i}", "value": rep.rel_diff,
                                "passed": rep.passed, "seed": seed,
                                "E": E, "eps": eps})
    rng = np.random.default_rng(cfg.master_seed)
    for i in range(20):
        B = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        A = DissipativeOperator(X=(B + B.conj().T) / 2.0, Y=np.zeros((5, 5)))
        T = HSOperator(T=rng.standard_normal((5, 5)))
        rep = weak_l1_levelset_measure(A, T,
                                       t_grid=np.geomspace(1.0, 1e3, 40))
        ok = (not rep.degenerate and rep.slope is not None
              and -1.2 <= rep.slope <= -0.8)
        failures += 0 if ok else 1
        sink.add("validation", {"name": f"weak-l1-{i}", "value": rep.slope,
                                "passed": ok})
    sink.emit_csv("validation")
    print(f"validate: {len(sink.records)} checks, {failures} failures")
    if failures:
        raise NumericalError(f"validation suite recorded {failures} failures")


RUNNERS = {
    "moment": run_moment,
    "epsilon-scan": run_epsilon_scan,
    "criterion": run_criterion,
    "decay": run_decay,
    "correlator": run_correlator,
    "ids": run_ids,
    "validate": run_validate,
}


def run_preset(name, out_dir, workers):
    from .presets import get_preset
    data, pipeline = get_preset(name)
    cfg = parse_config(data)
    sink = _Sink(cfg, out_dir)
    sink.dir.mkdir(parents=True, exist_ok=True)
    with open(sink.dir / "config.json", "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for step in pipeline:
        print(f"preset {name}: running {step}")
        RUNNERS[step](cfg, sink, workers)
    return sink


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="fracmom",
        description="fractional-moment experiments on discretized random "
                    "Schrodinger operators")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out", default=None)
    p = sub.add_parser("preset")
    p.add_argument("name", nargs="?", default=None)
    p.add_argument("--config", default=None,
                   help="optional overrides are not supported; reserved")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default=None)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.WARNING)
    args = build_parser().parse_args(argv)
    try:
        if args.subcommand == "preset":
            if args.name is None:
                from .presets import PRESETS, preset_names
                for name in preset_names():
                    print(f"{name}: {PRESETS[name]['description']}")
                print("note: the multiscale bootstrap from a triggered "
                      "criterion to larger scales is out of scope")
                return 0
            run_preset(args.name, args.out, args.workers)
            return 0
        cfg = load_config(args.config)
        sink = _Sink(cfg, args.out)
        RUNNERS[args.subcommand](cfg, sink, args.workers)
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, FracmomError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
