"""Command-line front end: one subcommand per verification suite.

Exit codes: 0 all checks passed, 1 a check failed, 2 usage or configuration
error.  Identical configuration and seed produce byte-identical output files;
all tables are CSV, structured reports are JSON, and nothing time-dependent
is ever written.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import math
import random
import re
import sys
from dataclasses import dataclass, asdict, replace
from pathlib import Path

from . import words as W
from . import transfer as TR
from . import spectrum as SP
from . import dynamics as DY
from .phase import PRECISION_BITS, PhasePoint, omega
from .xfloat import XReal

__all__ = ["RunConfig", "ConfigError", "parse_theta", "main"]


class ConfigError(ValueError):
    """Invalid configuration; maps to exit code 2."""


_THETA_OMEGA = re.compile(r"^(\d+)?\*?omega(?:/(\d+))?$")
_THETA_FRACTION = re.compile(r"^(\d+)/(\d+)$")
_THETA_DECIMAL = re.compile(r"^\d*\.?\d+$")


def parse_theta(token: str) -> PhasePoint:
    """Parse a phase token: decimal, integer fraction, or rational omega multiple.

    Accepted forms: "0.25", "1/3", "omega", "omega/2", "3omega/4", "3*omega/4".
    Rational multiples of the rotation number are formed exactly in fixed
    point, so nothing is lost at the command-line boundary.
    """
    text = token.strip().lower()
    m = _THETA_OMEGA.match(text)
    if m:
        num = int(m.group(1)) if m.group(1) else 1
        den = int(m.group(2)) if m.group(2) else 1
        if den == 0:
            raise ConfigError(f"zero denominator in phase {token!r}")
        raw = (omega().raw * num) // den
        return PhasePoint(raw % (1 << PRECISION_BITS))
    m = _THETA_FRACTION.match(text)
    if m:
        num, den = int(m.group(1)), int(m.group(2))
        if den == 0:
            raise ConfigError(f"zero denominator in phase {token!r}")
        return PhasePoint.from_fraction(num, den)
    if _THETA_DECIMAL.match(text):
        return PhasePoint.from_decimal(text)
    raise ConfigError(f"cannot parse phase {token!r}")


@dataclass(frozen=True)
class RunConfig:
    """Validated run parameters; round-trips through a JSON dictionary."""

    lam: float = 10.0
    thetas: tuple = ("0",)
    k_max: int = 14
    energies: tuple = (-3.0, 13.0, 64)
    T_grid: tuple = (10.0, 30.0, 100.0, 300.0, 1000.0)
    N: object = "auto"
    C1: float = 1.0
    p: object = "auto"
    out: str = "."
    seed: int = 20260810
    random_thetas: int = 0
    jobs: int = 1
    subword_max: int = 100
    growth: tuple = (6, 18)

    def __post_init__(self):
        if self.lam < 0 or not math.isfinite(self.lam):
            raise ConfigError("coupling must be finite and nonnegative")
        if not 0 <= self.k_max <= 25:
            raise ConfigError("k-max must lie in [0, 25]")
        lo, hi, count = self.energies
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi and count >= 1):
            raise ConfigError("energy grid must be lo:hi:count with lo < hi, count >= 1")
        if any(t <= 0 for t in self.T_grid):
            raise ConfigError("timescales must be positive")
        if self.N != "auto" and (not isinstance(self.N, int) or self.N < 1):
            raise ConfigError("N must be a positive integer or 'auto'")
        if self.C1 <= 0:
            raise ConfigError("C1 must be positive")
        if self.p != "auto" and not (0 < float(self.p) <= 1.0):
            raise ConfigError("p must be in (0, 1] or 'auto'")
        if self.random_thetas < 0 or self.jobs < 1:
            raise ConfigError("counts must be nonnegative, jobs >= 1")
        if not 1 <= self.subword_max <= 2000:
            raise ConfigError("subword-max must lie in [1, 2000]")
        kmin, kmax = self.growth
        if not (0 <= kmin < kmax <= 22):
            raise ConfigError("growth range must satisfy 0 <= kmin < kmax <= 22")
        for token in self.thetas:
            parse_theta(token)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        fixed = dict(data)
        for key in ("thetas", "T_grid", "energies", "growth"):
            if key in fixed and isinstance(fixed[key], list):
                fixed[key] = tuple(fixed[key])
        return cls(**fixed)

    def phase_points(self) -> list[tuple[str, PhasePoint]]:
        """Configured phases plus seeded random ones, with printable labels."""
        out = [(tok, parse_theta(tok)) for tok in self.thetas]
        if self.random_thetas:
            rng = random.Random(self.seed)
            for _ in range(self.random_thetas):
                point = PhasePoint(rng.getrandbits(PRECISION_BITS))
                out.append((point.to_decimal(24), point))
        return out


# ----------------------------------------------------------------------------
# deterministic file output
# ----------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, XReal):
        return value.sci()
    if isinstance(value, PhasePoint):
        return value.to_decimal(24)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ----------------------------------------------------------------------------
# words subcommand
# ----------------------------------------------------------------------------

def _classify_one(args):
    raw, bits, k_max = args
    theta = PhasePoint(raw, bits)
    right, left = W.classify_phase_words(theta, k_max)
    return right, left


def _parallel_map(func, items, jobs: int):
    if jobs <= 1:
        return [func(item) for item in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items, chunksize=8))


def cmd_words(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    failures: list[str] = []
    k_table = min(cfg.k_max, 14)

    rows = []
    for k in range(k_table + 1):
        s = W.fib_word(k)
        b = W.special_word(k)
        _, distinct = W.cyclic_permutations(s)
        census = len(W.subwords(W.saturation_prefix_length(len(s)), len(s), validate=False))
        identity = W.fibonacci_identity_check(k) if k >= 1 else 1
        rows.append((k, W.fib_number(k), W.height(s),
                     s.to01()[-2:] if len(s) >= 2 else s.to01(),
                     b[0], b[len(b) - 1], identity, distinct, census))
        if k >= 1 and identity != 1:
            failures.append(f"fibonacci-identity k={k}")
        if distinct != W.fib_number(k):
            failures.append(f"distinct-rotations k={k}")
        if census != W.fib_number(k) + 1:
            failures.append(f"census-count k={k}")
    _write_csv(out / "words.csv",
               ["k", "fib", "height", "suffix", "b_first", "b_last",
                "identity", "distinct_rotations", "census"],
               rows)

    complexity_ok = True
    for n in range(1, cfg.subword_max + 1):
        if len(W.subwords(W.saturation_prefix_length(n), n, validate=False)) != n + 1:
            complexity_ok = False
            failures.append(f"complexity n={n}")
    for k in range(1, k_table + 1):
        identity = W.fibonacci_identity_check(k)

    phases = cfg.phase_points()
    tasks = [(pt.raw, pt.bits, cfg.k_max) for _, pt in phases]
    try:
        reports = _parallel_map(_classify_one, tasks, cfg.jobs)
    except W.PhaseClassificationError as exc:
        failures.append(f"phase-classification: {exc}")
        reports = []
    classifications = []
    for (label, _), (right, left) in zip(phases, reports):
        classifications.append({
            "theta": label,
            "right": {"even_ok": right.even_ok, "odd_ok": right.odd_ok},
            "left": {"even_ok": left.even_ok, "odd_ok": left.odd_ok},
        })
    payload = {
        "k_max": cfg.k_max,
        "complexity_max_n": cfg.subword_max,
        "complexity_ok": complexity_ok,
        "classifications": classifications,
        "failures": sorted(failures),
        "pass": not failures,
    }
    _write_json(out / "parity.json", payload)
    if failures:
        print("words: FAILED " + "; ".join(sorted(failures)))
        return 1
    print(f"words: ok (k_max={cfg.k_max}, {len(phases)} phases, "
          f"complexity to n={cfg.subword_max})")
    return 0


# ----------------------------------------------------------------------------
# traces subcommand
# ----------------------------------------------------------------------------

def _parity_one(args):
    raw, bits, lam, energies, k_max = args
    theta = PhasePoint(raw, bits)
    report = TR.phase_trace_parity(theta, lam, energies, k_max)
    return (report.x_even_ok, report.x_odd_ok, report.y_even_ok, report.y_odd_ok)


def cmd_traces(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    failures: list[str] = []
    lo, hi, count = cfg.energies
    energies = [lo + (hi - lo) * i / max(count - 1, 1) for i in range(count)]
    phases = cfg.phase_points()
    k_norm = min(cfg.k_max, 12)

    trace_rows = []
    margin_rows = []
    for label, theta in phases:
        for E in energies:
            duals = TR.dual_traces_upto(cfg.k_max, E, cfg.lam, theta)
            for k, d in enumerate(duals):
                trace_rows.append((k, E, cfg.lam, theta, d.value, d.deriv))
    _write_csv(out / "traces.csv", ["k", "E", "lambda", "theta", "x", "dx"], trace_rows)

    margin_energies = energies[:: max(1, len(energies) // 16)]
    for label, theta in phases:
        for E in margin_energies:
            for k in range(k_norm + 1):
                try:
                    margin = TR.norm_trace_inequality(k, E, cfg.lam, theta)
                except TR.MarginViolationError as exc:
                    failures.append(f"norm-derivative-margin: {exc}")
                    continue
                margin_rows.append((k, E, cfg.lam, theta, margin))
    _write_csv(out / "margins.csv", ["k", "E", "lambda", "theta", "margin"], margin_rows)

    norm_rows = []
    levels = [W.fib_number(k) for k in range(4, k_norm + 1)]
    for label, theta in phases:
        for E in margin_energies:
            for side in (1, -1):
                sums = TR.norm_profile([side * l for l in levels], E, cfg.lam, theta)
                for l, value in zip(levels, sums):
                    norm_rows.append((side * l, E, cfg.lam, theta, value))
    _write_csv(out / "norms.csv", ["L", "E", "lambda", "theta", "norm_sq"], norm_rows)

    tasks = [(pt.raw, pt.bits, cfg.lam, energies, cfg.k_max) for _, pt in phases]
    parity_summary = []
    try:
        outcomes = _parallel_map(_parity_one, tasks, cfg.jobs)
        for (label, _), flags in zip(phases, outcomes):
            parity_summary.append({
                "theta": label,
                "x": {"even_ok": flags[0], "odd_ok": flags[1]},
                "y": {"even_ok": flags[2], "odd_ok": flags[3]},
            })
    except TR.TraceParityError as exc:
        failures.append(f"trace-parity: {exc}")

    _write_json(out / "traces_summary.json", {
        "lambda": cfg.lam,
        "k_max": cfg.k_max,
        "energy_grid": list(cfg.energies),
        "parity": parity_summary,
        "failures": sorted(failures),
        "pass": not failures,
    })
    if failures:
        print("traces: FAILED " + "; ".join(sorted(failures)))
        return 1
    print(f"traces: ok (lambda={cfg.lam}, {len(phases)} phases, "
          f"{count} energies, k_max={cfg.k_max})")
    return 0


# ----------------------------------------------------------------------------
# spectrum subcommand
# ----------------------------------------------------------------------------

def cmd_spectrum(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    failures: list[str] = []
    band_rows = []
    counts = {}
    try:
        for k in range(cfg.k_max + 1):
            level_bands = SP.bands(k, cfg.lam)
            counts[k] = len(level_bands)
            for i, b in enumerate(level_bands):
                band_rows.append((k, cfg.lam, i, b.lo, b.hi))
    except SP.BandResolutionError as exc:
        failures.append(f"bands: {exc}")
    _write_csv(out / "bands.csv",
               ["k", "lambda", "band_index", "E_lo", "E_hi"], band_rows)

    growth_rows = []
    fit_payload = None
    if cfg.lam > 4.0:
        try:
            fit = SP.derivative_growth_scan(cfg.lam, cfg.growth[0], cfg.growth[1])
            for k, m in fit.min_derivs:
                growth_rows.append((cfg.lam, k, m))
            fit_payload = {
                "xi_hat": fit.xi_hat,
                "zeta_hat": fit.zeta_hat,
                "residual": fit.residual,
                "k_range": list(fit.k_range),
            }
        except (SP.BandResolutionError, SP.DegenerateGrowthError) as exc:
            failures.append(f"growth: {exc}")
    _write_csv(out / "growth.csv", ["lambda", "k", "min_abs_dx"], growth_rows)

    norm_rows = []
    c_fits = {}
    if fit_payload is not None:
        base_level = min(cfg.k_max, 12)
        centers = [b.center for b in SP.bands(base_level, cfg.lam)]
        sample = centers[:: max(1, len(centers) // 12)]
        l_grid = [W.fib_number(k) for k in range(4, min(cfg.growth[1], 18) + 1)]
        for label, theta in cfg.phase_points():
            result = SP.norm_growth_check(cfg.lam, theta, sample, l_grid,
                                          fit_payload["zeta_hat"])
            for rec in result.records:
                norm_rows.append((rec.theta, rec.E, rec.side, rec.L,
                                  rec.norm_sq, rec.bound))
            c_fits[label] = {repr(e): c for (_, e), c in result.c_fit.items()}
            if any(c <= 0 for c in c_fits[label].values()):
                failures.append(f"norm-growth constant nonpositive at theta={label}")
    _write_csv(out / "norm_growth.csv",
               ["theta", "E", "side", "L", "norm_sq", "bound"], norm_rows)

    _write_json(out / "spectrum.json", {
        "lambda": cfg.lam,
        "band_counts": {str(k): v for k, v in counts.items()},
        "growth_fit": fit_payload,
        "norm_growth_constants": c_fits,
        "failures": sorted(failures),
        "pass": not failures,
    })
    if failures:
        print("spectrum: FAILED " + "; ".join(sorted(failures)))
        return 1
    msg = f"spectrum: ok (lambda={cfg.lam}, levels 0..{cfg.k_max}"
    if fit_payload:
        msg += f", xi_hat={fit_payload['xi_hat']:.2f}"
    print(msg + ")")
    return 0


# ----------------------------------------------------------------------------
# dynamics subcommand
# ----------------------------------------------------------------------------

def cmd_dynamics(cfg: RunConfig, retry: bool = True) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    failures: list[str] = []
    phases = cfg.phase_points()
    if cfg.p == "auto":
        if cfg.lam <= 8.0:
            raise ConfigError("automatic exponent calibration needs coupling > 8; pass --p")
        trend = DY.exponent_trend([cfg.lam], parse_theta("1/2"), T_grid=cfg.T_grid)
        p_used = trend[0].p_fit
    else:
        p_used = float(cfg.p)
    n_arg = cfg.N if cfg.N != "auto" else "auto"
    report = DY.dynamical_bound_check(
        cfg.lam, [pt for _, pt in phases], cfg.T_grid,
        C1=cfg.C1, p_used=p_used, N=n_arg, retry=retry,
    )
    label_of = {pt: lab for lab, pt in phases}
    rows = []
    for rec in report.records:
        rows.append((cfg.lam, rec.theta, rec.T, rec.L, rec.mass,
                     rec.edge_mass, int(rec.valid)))
        if not rec.valid:
            failures.append(
                f"edge-mass theta={label_of[rec.theta]} T={rec.T:g}"
            )
    _write_csv(out / "dynamics.csv",
               ["lambda", "theta", "T", "L", "mass", "edge_mass", "valid"], rows)
    if report.G_emp <= 0:
        failures.append("empirical-floor G_emp <= 0")
    _write_json(out / "bound_report.json", {
        "lambda": cfg.lam,
        "C1": cfg.C1,
        "p_used": p_used,
        "G_emp": report.G_emp,
        "theta_list": [lab for lab, _ in phases],
        "T_grid": list(report.T_grid),
        "N_used": {label_of[t]: n for t, n in report.N_used.items()},
        "table": [
            {
                "theta": label_of[r.theta],
                "T": r.T,
                "L": r.L,
                "mass": r.mass,
                "edge_mass": r.edge_mass,
                "valid": r.valid,
            }
            for r in report.records
        ],
        "failures": sorted(failures),
        "pass": not failures,
    })
    if failures:
        print("dynamics: FAILED " + "; ".join(sorted(failures)))
        return 1
    print(f"dynamics: ok (lambda={cfg.lam}, p_used={p_used}, "
          f"G_emp={report.G_emp:.4f})")
    return 0


# ----------------------------------------------------------------------------
# report subcommand
# ----------------------------------------------------------------------------

def cmd_report(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    summary: dict = {"out_dir": str(out)}
    for name in ("parity.json", "traces_summary.json", "spectrum.json",
                 "bound_report.json"):
        path = out / name
        if path.exists():
            with open(path) as fh:
                data = json.load(fh)
            summary[name] = {
                "pass": data.get("pass"),
                "failures": data.get("failures", []),
            }
            for key in ("G_emp", "p_used"):
                if key in data:
                    summary[name][key] = data[key]
            if name == "spectrum.json" and data.get("growth_fit"):
                summary[name]["xi_hat"] = data["growth_fit"]["xi_hat"]
        else:
            summary[name] = {"pass": None, "missing": True}
    csv_counts = {}
    for path in sorted(out.glob("*.csv")):
        with open(path) as fh:
            csv_counts[path.name] = sum(1 for _ in fh) - 1
    summary["csv_rows"] = csv_counts
    _write_json(out / "report.json", summary)
    present = [k for k, v in summary.items()
               if isinstance(v, dict) and v.get("pass") is not None]
    print(f"report: aggregated {len(present)} suite summaries into report.json")
    return 0


# ----------------------------------------------------------------------------
# argument parsing
# ----------------------------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=20260810,
                        help="seed for randomized phase sampling")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes")
    parser.add_argument("--theta", dest="thetas", action="append", default=None,
                        metavar="PHASE", help="phase token (repeatable)")
    parser.add_argument("--theta-list", default=None,
                        help="comma-separated phase tokens")
    parser.add_argument("--random-thetas", type=int, default=0,
                        help="additional seeded random phases")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quasitrace",
        description="verification suites for the golden-rotation tight-binding model",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_words = sub.add_parser("words", help="combinatorial suites")
    _add_common(p_words)
    p_words.add_argument("--k-max", type=int, default=14)
    p_words.add_argument("--subword-max", type=int, default=100)

    p_traces = sub.add_parser("traces", help="transfer-matrix trace suites")
    _add_common(p_traces)
    p_traces.add_argument("--lambda", dest="lam", type=float, default=10.0)
    p_traces.add_argument("--k-max", type=int, default=14)
    p_traces.add_argument("--energies", default=None, metavar="LO:HI:COUNT")

    p_spec = sub.add_parser("spectrum", help="band and growth suites")
    _add_common(p_spec)
    p_spec.add_argument("--lambda", dest="lam", type=float, default=10.0)
    p_spec.add_argument("--k-max", type=int, default=12)
    p_spec.add_argument("--growth", default="6:18", metavar="KMIN:KMAX")

    p_dyn = sub.add_parser("dynamics", help="Abel-averaged confinement suite")
    _add_common(p_dyn)
    p_dyn.add_argument("--lambda", dest="lam", type=float, default=10.0)
    p_dyn.add_argument("--T-grid", default="10,30,100,300,1000")
    p_dyn.add_argument("--C1", type=float, default=1.0)
    p_dyn.add_argument("--p", default="auto")
    p_dyn.add_argument("--N", default="auto")
    p_dyn.add_argument("--no-retry", action="store_true",
                       help="do not enlarge the box on edge-mass violations")

    p_rep = sub.add_parser("report", help="aggregate JSON summaries")
    p_rep.add_argument("--out", default=".")
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    updates: dict = {"out": args.out}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "jobs", None):
        updates["jobs"] = args.jobs
    tokens: list[str] = []
    if getattr(args, "thetas", None):
        tokens.extend(args.thetas)
    if getattr(args, "theta_list", None):
        tokens.extend(t for t in args.theta_list.split(",") if t.strip())
    if tokens:
        updates["thetas"] = tuple(tokens)
    if getattr(args, "random_thetas", 0):
        updates["random_thetas"] = args.random_thetas
    if hasattr(args, "lam"):
        updates["lam"] = args.lam
    if getattr(args, "k_max", None) is not None:
        updates["k_max"] = args.k_max
    if getattr(args, "subword_max", None) is not None:
        updates["subword_max"] = args.subword_max
    if getattr(args, "energies", None):
        parts = args.energies.split(":")
        if len(parts) != 3:
            raise ConfigError("energy grid must be LO:HI:COUNT")
        updates["energies"] = (float(parts[0]), float(parts[1]), int(parts[2]))
    if getattr(args, "growth", None):
        parts = args.growth.split(":")
        if len(parts) != 2:
            raise ConfigError("growth range must be KMIN:KMAX")
        updates["growth"] = (int(parts[0]), int(parts[1]))
    if getattr(args, "T_grid", None):
        updates["T_grid"] = tuple(float(t) for t in args.T_grid.split(","))
    if hasattr(args, "C1"):
        updates["C1"] = args.C1
    if getattr(args, "p", None) is not None:
        updates["p"] = args.p if args.p == "auto" else float(args.p)
    if getattr(args, "N", None) is not None:
        updates["N"] = args.N if args.N == "auto" else int(args.N)
    return replace(cfg, **updates)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "words":
            code = cmd_words(cfg)
        elif args.command == "traces":
            code = cmd_traces(cfg)
        elif args.command == "spectrum":
            code = cmd_spectrum(cfg)
        elif args.command == "dynamics":
            code = cmd_dynamics(cfg, retry=not args.no_retry)
        elif args.command == "report":
            code = cmd_report(cfg)
        else:  # pragma: no cover
            parser.error(f"unknown command {args.command!r}")
            return 2
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())
