"""
Command-line front end.

    sigmadamp simulate CONFIG [--out DIR]
    sigmadamp rates CSV TARGETS [--out FILE]
    sigmadamp check-identities CONFIG [--out DIR]
    sigmadamp check-inequalities PARAMS [--out FILE]
    sigmadamp sweep GLOB [--jobs N]

Exit codes: 0 success, 1 a requested check failed, 2 invalid input,
3 blow-up detected, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import glob
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_kv
from .evolver import EvolveConfig, Nonlinearity, NonlinearityKind, bernoulli_oracle, evolve, OracleBlowUp
from .inequalities import fgn_check, integral_ineq_1, integral_ineq_2, random_bumps
from .observables import OBSERVABLE_NAMES, ObservableSeries, collect_series, l2_from_half, observe
from .propagator import evolve_linear
from .rates import ConditionViolation, FitError, RateModel, RateTarget, fit_rate, theorem_rate_table
from .spectral import GridSpec, RealField, SpectralError, StatePair, rfft_coeffs

log = logging.getLogger("sigmadamp")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_VALIDATION = 2
EXIT_BLOWUP = 3
EXIT_NUMERICAL = 4

MIN_POINTS_PER_EFOLD = 6

_KINDS = {
    "linear": NonlinearityKind.NONE,
    "semilinear_u": NonlinearityKind.ABS_POWER_U,
    "semilinear_q": NonlinearityKind.ABS_POWER_Q,
    "semilinear_ut_plus_u": NonlinearityKind.ABS_POWER_UT_PLUS_U,
}


# ---------------------------------------------------------------------------
# output helpers


def _clean(x):
    """Replace non-finite floats by None so the JSON stays standard."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, Path):
        return str(x)
    return x


def dump_json(obj, path: Path | None = None) -> str:
    text = json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"
    if path is not None:
        path.write_text(text)
    return text


def write_csv(path: Path, times, samples, names=OBSERVABLE_NAMES) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("t," + ",".join(names) + "\n")
        for t, s in zip(times, samples):
            fh.write(",".join(["%.17g" % t] + ["%.17g" % s[k] for k in names]) + "\n")


def read_csv(path: Path) -> dict[str, ObservableSeries]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "t":
        raise ConfigError(f"{path}: expected a header starting with 't'")
    head = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(head))
    t = data[:, 0]
    return {name: ObservableSeries(name, t, data[:, j]) for j, name in enumerate(head) if j > 0}


# ---------------------------------------------------------------------------
# run pieces


def make_grid(cfg: RunConfig) -> GridSpec:
    return GridSpec(cfg.dim, cfg.points, cfg.half_length, cfg.sigma)


def seed_data(cfg: RunConfig, grid: GridSpec | None = None) -> tuple[RealField, RealField]:
    """Initial data (u0, u1) for a run.

    gaussian: u1 = A exp(-|x - c|^2 / (2 w^2)), whose e-folding length from
    the peak is sqrt(2) w and must span at least 6 grid points.
    bumps: random Gaussian bumps from the seeded generator, scaled to peak A.
    u0 is zero unless u0_zero is false, in which case it is the same
    profile with amplitude data.u0_amplitude.
    """
    g = make_grid(cfg) if grid is None else grid
    d = cfg.data
    if d.shape == "gaussian":
        efold = math.sqrt(2) * d.width
        if efold < MIN_POINTS_PER_EFOLD * g.dx:
            raise ConfigError(
                f"data.width = {d.width:g} gives {efold / g.dx:.2f} points per e-folding, "
                f"need at least {MIN_POINTS_PER_EFOLD} (grid spacing {g.dx:g})"
            )
        edge = min(g.half_length - abs(c) for c in d.center)
        if edge <= 0:
            raise ConfigError("data.center lies outside the box")
        if math.exp(-edge * edge / (2 * d.width**2)) > 1e-14:
            log.warning("Gaussian tail at the box edge exceeds 1e-14; periodic truncation is visible")
        r2 = sum((x - c) ** 2 for x, c in zip(g.coordinates(), d.center))
        profile = np.exp(-r2 / (2 * d.width**2))
    else:
        lo = g.half_length / 24
        if math.sqrt(2) * lo < MIN_POINTS_PER_EFOLD * g.dx:
            raise ConfigError("grid too coarse for random bumps of width L/24")
        profile = random_bumps(g, np.random.default_rng(cfg.seed), max_bumps=d.bumps)
        profile = profile / np.max(np.abs(profile))
    u1 = RealField(g, d.amplitude * profile)
    u0 = RealField.zeros(g) if d.u0_zero else RealField(g, d.u0_amplitude * profile)
    return u0, u1


def _windows(cfg: RunConfig):
    t_end = cfg.time.t_end
    poly = cfg.poly_window or (t_end / 5, t_end)
    expo = cfg.exp_window or (t_end / 5, t_end)
    return poly, expo


def rate_targets(cfg: RunConfig) -> list[RateTarget]:
    return theorem_rate_table(cfg.dim, cfg.sigma, cfg.p, cfg.model)


def rate_reports(series: dict[str, ObservableSeries], targets, poly_window, exp_window) -> list[dict]:
    out = []
    for tg in targets:
        win = poly_window if tg.model is RateModel.POLYNOMIAL else exp_window
        if tg.observable not in series:
            out.append({"observable": tg.observable, "target": tg.to_dict(), "verdict": "error",
                        "error": "observable missing from series"})
            continue
        try:
            out.append(fit_rate(series[tg.observable], tg.model, win, tg).to_dict())
        except FitError as exc:
            out.append({"observable": tg.observable, "target": tg.to_dict(), "verdict": "error",
                        "error": str(exc), "window": list(win)})
    return out


@dataclass
class _IdentityTracker:
    """Accumulates the worst error of each exact identity over samples."""

    grid: GridSpec
    u0: RealField
    u1: RealField
    model: str
    p: float | None
    errors: dict = field(default_factory=dict)
    tols: dict = field(default_factory=dict)
    prev_energy: float | None = None

    def __post_init__(self):
        g = self.grid
        self.u1_norm = l2_from_half(rfft_coeffs(self.u1.values, g), g)
        self.u0_zero = not np.any(self.u0.values)
        self.sum_hat = rfft_coeffs(self.u0.values + self.u1.values, g)
        self.sum_norm = l2_from_half(self.sum_hat, g)
        self.e0 = None

    def _bump(self, name, err, tol):
        self.errors[name] = max(self.errors.get(name, 0.0), float(err))
        self.tols[name] = tol

    def update(self, st: StatePair, obs: dict):
        g = self.grid
        t = st.time
        uh = rfft_coeffs(st.u.values, g)
        vh = rfft_coeffs(st.ut.values, g)
        scale = max(self.u1_norm, 1e-300)
        # |u_t| - |(-D)^s u| is controlled by Q
        gap = abs(obs["ut_L2"] - obs["lap_u_L2"]) - obs["Q_L2"]
        self._bump("triangle_ut_lap_u_vs_Q", max(gap, 0.0) / scale, 1e-10)
        if self.model != "linear":
            return
        if self.u0_zero:
            # w formed from (u, u_t), not the carried copy
            wh = vh + g.mu_half * uh
            err = l2_from_half(wh - math.exp(-t) * rfft_coeffs(self.u1.values, g), g) / scale
            self._bump("w_equals_exp_decay_u1", err, 1e-10)
        diff = (vh + uh) - np.exp(-g.mu_half * t) * self.sum_hat
        self._bump("ut_plus_u_diffusion", l2_from_half(diff, g) / max(self.sum_norm, 1e-300), 1e-10)
        e = obs["energy"]
        if self.e0 is None:
            self.e0 = max(e, 1e-300)
        if self.prev_energy is not None:
            self._bump("energy_nonincreasing", max(e - self.prev_energy, 0.0) / self.e0, 1e-12)
        self.prev_energy = e

    def bernoulli(self, st: StatePair):
        """Pointwise comparison of w with the Bernoulli solution (|w|^p model,
        u0 = 0, u1 >= 0)."""
        if self.model != "semilinear_q" or not self.u0_zero or np.any(self.u1.values < 0):
            return
        w = st.w_field().values.ravel()
        w0 = self.u1.values.ravel()
        ex = np.zeros_like(w0)
        for i, v in enumerate(w0):
            if v > 0:
                r = bernoulli_oracle(float(v), self.p, st.time)
                ex[i] = np.inf if isinstance(r, OracleBlowUp) else r
        self._bump("bernoulli_pointwise", float(np.max(np.abs(w - ex))), 1e-4)

    def report(self) -> list[dict]:
        return [
            {"name": k, "error": self.errors[k], "tolerance": self.tols[k],
             "passed": bool(self.errors[k] <= self.tols[k])}
            for k in sorted(self.errors)
        ]


@dataclass
class RunResult:
    exit_code: int
    message: str
    files: list[str] = field(default_factory=list)


def _simulate(cfg: RunConfig):
    """Evolve and collect (times, observables, identity tracker, blowup)."""
    g = make_grid(cfg)
    u0, u1 = seed_data(cfg, g)
    state = StatePair.initial(u1, u0)
    tracker = _IdentityTracker(g, u0, u1, cfg.model, cfg.p)
    bern_every = max(1, int(round(1.0 / (cfg.time.dt * cfg.time.sample_every))))
    count = [0]

    def observer(st, forcing):
        obs = observe(st, forcing)
        tracker.update(st, obs)
        if count[0] % bern_every == 0:
            tracker.bernoulli(st)
        count[0] += 1
        return obs

    if cfg.model == "linear":
        ec = EvolveConfig(dt=cfg.time.dt, t_end=cfg.time.t_end, sample_every=cfg.time.sample_every)
        n = ec.n_steps
        times, samples = [], []
        for k in range(n + 1):
            if k % ec.sample_every == 0 or k == n:
                times.append(state.time)
                samples.append(observer(state, None))
            if k < n:
                state = replace(evolve_linear(state, ec.dt), time=(k + 1) * ec.dt)
        return times, samples, tracker, None
    nl = Nonlinearity(_KINDS[cfg.model], cfg.p)
    ec = EvolveConfig(
        dt=cfg.time.dt, t_end=cfg.time.t_end, sample_every=cfg.time.sample_every,
        blowup_threshold=cfg.time.blowup_threshold, dealias=cfg.time.dealias,
    )
    traj = evolve(state, nl, ec, observer)
    return traj.times, traj.samples, tracker, traj.blowup


def run(cfg: RunConfig, out_dir: Path | None = None, do_rates: bool | None = None,
        do_identities: bool | None = None) -> RunResult:
    """Full run: simulate, then write observables.csv, rates.json,
    identities.json and summary.json into the output directory."""
    out = Path(out_dir) if out_dir is not None else cfg.output_dir
    do_rates = "rates" in cfg.checks if do_rates is None else do_rates
    do_identities = "identities" in cfg.checks if do_identities is None else do_identities
    try:
        targets = rate_targets(cfg)
    except ConditionViolation as exc:
        return RunResult(EXIT_VALIDATION, f"condition violated: {exc}")
    try:
        times, samples, tracker, blowup = _simulate(cfg)
    except (ConfigError, SpectralError, ValueError) as exc:
        return RunResult(EXIT_VALIDATION, f"invalid configuration: {exc}")
    except (FloatingPointError, ArithmeticError) as exc:
        return RunResult(EXIT_NUMERICAL, f"numerical failure: {exc}")

    out.mkdir(parents=True, exist_ok=True)
    files = []
    write_csv(out / "observables.csv", times, samples)
    files.append("observables.csv")
    summary = {"config": cfg.raw, "model": cfg.model, "samples": len(times)}
    if blowup is not None:
        info = {
            "estimated_blowup_time": blowup.time,
            "last_valid_time": blowup.last_valid_time,
            "detected_at": blowup.detected_at,
            "reason": blowup.reason,
        }
        dump_json(info, out / "blowup.json")
        files.append("blowup.json")
        summary.update(status="blowup", exit_code=EXIT_BLOWUP, blowup=info)
        dump_json(summary, out / "summary.json")
        files.append("summary.json")
        return RunResult(EXIT_BLOWUP, f"blow-up: estimated T* = {blowup.time:.6g} "
                         f"(last valid t = {blowup.last_valid_time:.6g})", files)

    failed = False
    if do_rates:
        series = collect_series(times, samples)
        poly, expo = _windows(cfg)
        reports = rate_reports(series, targets, poly, expo)
        dump_json(reports, out / "rates.json")
        files.append("rates.json")
        summary["rates"] = {r["observable"] + ":" + r.get("model", r.get("target", {}).get("model", "")): r["verdict"] for r in reports}
    if do_identities:
        ident = tracker.report()
        dump_json(ident, out / "identities.json")
        files.append("identities.json")
        failed = not all(i["passed"] for i in ident)
        summary["identities"] = {i["name"]: i["passed"] for i in ident}
    summary.update(status="ok", exit_code=EXIT_OK)
    dump_json(summary, out / "summary.json")
    files.append("summary.json")
    msg = f"wrote {', '.join(files)} to {out}"
    if failed:
        return RunResult(EXIT_CHECK_FAILED, "identity check failed; " + msg, files)
    return RunResult(EXIT_OK, msg, files)


# ---------------------------------------------------------------------------
# subcommands


def _load(path) -> RunConfig:
    return RunConfig.load(path)


def cmd_simulate(args) -> int:
    cfg = _load(args.config)
    res = run(cfg, args.out)
    print(res.message)
    return res.exit_code


def cmd_check_identities(args) -> int:
    cfg = _load(args.config)
    res = run(cfg, args.out, do_rates=False, do_identities=True)
    print(res.message)
    out = Path(args.out) if args.out else cfg.output_dir
    path = out / "identities.json"
    if res.exit_code in (EXIT_OK, EXIT_CHECK_FAILED) and path.exists():
        for item in json.loads(path.read_text()):
            print(f"{'PASS' if item['passed'] else 'FAIL'} {item['name']}: error {item['error']:.3e} (tol {item['tolerance']:.0e})")
    return res.exit_code


def _targets_from_file(path: Path):
    """Targets and windows from a JSON target list or a run config."""
    if path.suffix == ".json":
        try:
            items = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read targets from {path}: {exc}") from exc
        targets, windows = [], []
        for it in items:
            win = it.get("window")
            if not (isinstance(win, list) and len(win) == 2):
                raise ConfigError(f"target {it.get('observable')!r} needs window [lo, hi]")
            try:
                tg = RateTarget(it["observable"], it["model"], float(it["exponent"]), it.get("source", "user"),
                                float(it.get("tolerance", 0.02)), it.get("comparison", "sharp"))
            except (KeyError, ValueError) as exc:
                raise ConfigError(f"bad target {it!r}: {exc}") from exc
            targets.append(tg)
            windows.append(tuple(win))
        return targets, windows
    cfg = _load(path)
    targets = rate_targets(cfg)
    poly, expo = _windows(cfg)
    return targets, [poly if t.model is RateModel.POLYNOMIAL else expo for t in targets]


def cmd_rates(args) -> int:
    series = read_csv(Path(args.csv))
    targets, windows = _targets_from_file(Path(args.targets))
    reports = []
    for tg, win in zip(targets, windows):
        reports += rate_reports(series, [tg], win, win)
    text = dump_json(reports, Path(args.out) if args.out else None)
    if not args.out:
        sys.stdout.write(text)
    return EXIT_OK


_INEQ_KEYS = {
    "checks",
    "fgn.dim", "fgn.points", "fgn.half_length", "fgn.sigma", "fgn.q", "fgn.s", "fgn.trials", "fgn.seed",
    "integral_1.a", "integral_1.b", "integral_1.t_max",
    "integral_2.c", "integral_2.alpha", "integral_2.t_max",
}


def run_inequalities(params: dict) -> list[dict]:
    unknown = sorted(set(params) - _INEQ_KEYS)
    if unknown:
        raise ConfigError(f"unknown keys {unknown}")
    checks = params.get("checks", ["fgn", "integral_1", "integral_2"])
    out = []
    for name in checks:
        if name == "fgn":
            g = GridSpec(int(params.get("fgn.dim", 1)), int(params.get("fgn.points", 256)),
                         float(params.get("fgn.half_length", 20.0)), float(params.get("fgn.sigma", 1.0)))
            r = fgn_check(g, float(params.get("fgn.q", 2.0)), float(params.get("fgn.s", 0.0)),
                          int(params.get("fgn.trials", 100)), int(params.get("fgn.seed", 0)))
        elif name == "integral_1":
            r = integral_ineq_1(float(params.get("integral_1.a", 2.0)), float(params.get("integral_1.b", 0.5)),
                                float(params.get("integral_1.t_max", 100.0)))
        elif name == "integral_2":
            r = integral_ineq_2(float(params.get("integral_2.c", 1.0)), float(params.get("integral_2.alpha", 2.5)),
                                float(params.get("integral_2.t_max", 100.0)))
        else:
            raise ConfigError(f"unknown check {name!r}")
        out.append(r.to_dict())
    return out


def cmd_check_inequalities(args) -> int:
    res = run_inequalities(load_kv(args.params))
    text = dump_json(res, Path(args.out) if args.out else None)
    if not args.out:
        sys.stdout.write(text)
    else:
        for r in res:
            print(f"{r['name']}: worst ratio {r['worst_ratio']:.6g} over {r['trials']} trials")
    return EXIT_OK


def _sweep_one(path: str) -> tuple[str, int, str]:
    try:
        res = run(_load(path))
        return path, res.exit_code, res.message
    except ConfigError as exc:
        return path, EXIT_VALIDATION, str(exc)


def cmd_sweep(args) -> int:
    paths = sorted(glob.glob(args.pattern))
    if not paths:
        print(f"no configs match {args.pattern!r}", file=sys.stderr)
        return EXIT_VALIDATION
    outs = {}
    for p in paths:
        d = _load(p).output_dir.resolve()
        if d in outs:
            raise ConfigError(f"{p} and {outs[d]} share output_dir {d}")
        outs[d] = p
    if args.jobs == 1:
        results = [_sweep_one(p) for p in paths]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_sweep_one, paths))
    for path, code, msg in results:
        print(f"{code} {path}: {msg}")
    return max(code for _, code, _ in results)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sigmadamp", description=__doc__.split("\n\n")[0].strip())
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a configuration and write reports")
    s.add_argument("config")
    s.add_argument("--out", help="output directory (default: output_dir from the config)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("rates", help="fit decay rates to an observables CSV")
    s.add_argument("csv")
    s.add_argument("targets", help="JSON list of targets with windows, or a run config")
    s.add_argument("--out", help="write JSON here instead of stdout")
    s.set_defaults(func=cmd_rates)

    s = sub.add_parser("check-identities", help="run a configuration and check exact identities")
    s.add_argument("config")
    s.add_argument("--out")
    s.set_defaults(func=cmd_check_identities)

    s = sub.add_parser("check-inequalities", help="numerical inequality checks")
    s.add_argument("params")
    s.add_argument("--out")
    s.set_defaults(func=cmd_check_inequalities)

    s = sub.add_parser("sweep", help="run every config matching a glob")
    s.add_argument("pattern")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConditionViolation as exc:
        print(f"error: condition violated: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConfigError, SpectralError, FitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FloatingPointError, ArithmeticError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
