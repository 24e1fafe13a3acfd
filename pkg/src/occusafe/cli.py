"""Problem files, hierarchy runs and reports; entry point of the ``occusafe`` command."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .oracle import OracleError, TimeEstimate, dump_trajectory, expected_time, integrate
from .polyalg import (
    ParseError,
    Polynomial,
    PolynomialError,
    parse_inequality,
    parse_poly,
)
from .problem import (
    Dirac,
    ProblemError,
    RawMoments,
    SafetyProblem,
    ScalingRecord,
    UniformBox,
    normalize,
    validate,
)
from .relaxation import (
    DEFAULT_MARGIN,
    RelaxationError,
    bound_in_original_units,
    solve_relaxation,
    verify_certificate,
)
from .solver import SolverError, SolverOptions, Status

log = logging.getLogger("occusafe")

MONOTONE_TOL = 1e-6
CSV_COLUMNS = ["r", "bound_seconds", "dual_seconds", "status", "solve_time"]


class ProblemFileError(ValueError):
    """Schema or parse failure in a problem file; the message starts with the field path."""


# -- problem files ------------------------------------------------------------


def bundled_problem(name: str) -> Path:
    """Path of a problem file shipped with the package (``vanderpol``, ``exponential``, ...)."""
    ref = resources.files("occusafe") / "data" / f"{name}.json"
    if not ref.is_file():
        raise ProblemFileError(f"no bundled problem named {name!r}")
    return Path(str(ref))


def _resolve(path: str | Path) -> Path:
    p = Path(path)
    if not p.exists() and p.suffix == "" and p.parent == Path("."):
        return bundled_problem(str(p))
    return p


def _require(doc: dict, key: str, kind, where: str = ""):
    if key not in doc:
        raise ProblemFileError(f"{where}{key}: required field is missing")
    val = doc[key]
    if not isinstance(val, kind) or isinstance(val, bool):
        raise ProblemFileError(f"{where}{key}: expected {getattr(kind, '__name__', kind)}, got {type(val).__name__}")
    return val


def _parse(fn, text: Any, names: Sequence[str], where: str) -> Polynomial:
    if not isinstance(text, str):
        raise ProblemFileError(f"{where}: expected a string, got {type(text).__name__}")
    try:
        return fn(text, names)
    except ParseError as exc:
        raise ProblemFileError(f"{where}: {exc}") from exc
    except PolynomialError as exc:
        raise ProblemFileError(f"{where}: {exc}") from exc


def _numbers(val: Any, n: int, where: str) -> tuple[float, ...]:
    if not isinstance(val, list) or len(val) != n:
        raise ProblemFileError(f"{where}: expected a list of {n} numbers")
    out = []
    for k, x in enumerate(val):
        if not isinstance(x, (int, float)) or isinstance(x, bool) or not math.isfinite(x):
            raise ProblemFileError(f"{where}[{k}]: expected a finite number")
        out.append(float(x))
    return tuple(out)


def _initial(doc: Any, n: int):
    where = "initial"
    if not isinstance(doc, dict) or len(doc) != 1:
        raise ProblemFileError(f"{where}: expected exactly one of 'dirac', 'uniform_box', 'moments'")
    (kind, body), = doc.items()
    if kind == "dirac":
        return Dirac(_numbers(body, n, f"{where}.dirac"))
    if kind == "uniform_box":
        if not isinstance(body, dict):
            raise ProblemFileError(f"{where}.uniform_box: expected an object with 'lo' and 'hi'")
        lo = _numbers(body.get("lo"), n, f"{where}.uniform_box.lo")
        hi = _numbers(body.get("hi"), n, f"{where}.uniform_box.hi")
        return UniformBox(lo, hi)
    if kind == "moments":
        if not isinstance(body, dict):
            raise ProblemFileError(f"{where}.moments: expected an object with 'degree' and 'values'")
        deg = _require(body, "degree", int, f"{where}.moments.")
        vals = body.get("values")
        if not isinstance(vals, list):
            raise ProblemFileError(f"{where}.moments.values: expected a list of numbers")
        return RawMoments(deg, _numbers(vals, len(vals), f"{where}.moments.values"))
    raise ProblemFileError(f"{where}.{kind}: unknown initial distribution kind")


def problem_from_dict(doc: dict) -> SafetyProblem:
    if not isinstance(doc, dict):
        raise ProblemFileError("<root>: expected a JSON object")
    names = _require(doc, "variables", list)
    if not names or not all(isinstance(v, str) and v.isidentifier() for v in names):
        raise ProblemFileError("variables: expected a nonempty list of identifiers")
    if len(set(names)) != len(names) or "t" in names:
        raise ProblemFileError("variables: names must be distinct and must not be 't'")
    n = len(names)
    T = _require(doc, "T", (int, float))
    dyn = _require(doc, "dynamics", list)
    if len(dyn) != n:
        raise ProblemFileError(f"dynamics: expected {n} entries (one per variable), got {len(dyn)}")
    dynamics = [_parse(parse_poly, s, names, f"dynamics[{i}]") for i, s in enumerate(dyn)]
    X = [_parse(parse_inequality, s, names, f"X[{i}]") for i, s in enumerate(_require(doc, "X", list))]
    X_u = [_parse(parse_inequality, s, names, f"X_u[{i}]") for i, s in enumerate(_require(doc, "X_u", list))]
    box = None
    if "box" in doc:
        raw = doc["box"]
        if not isinstance(raw, list) or len(raw) != n:
            raise ProblemFileError(f"box: expected {n} [lo, hi] pairs")
        box = tuple(_numbers(b, 2, f"box[{i}]") for i, b in enumerate(raw))
        for i, (lo, hi) in enumerate(box):
            if not lo < hi:
                raise ProblemFileError(f"box[{i}]: need lo < hi")
    initial = _initial(_require(doc, "initial", dict), n)
    objective = _parse(parse_poly, doc.get("objective", "1"), names, "objective")
    try:
        return SafetyProblem(
            n, dynamics, float(T), X, X_u, initial, objective, tuple(names), box
        )
    except ProblemError as exc:
        field_name = "T" if "horizon" in str(exc) else "<root>"
        raise ProblemFileError(f"{field_name}: {exc}") from exc


def load_problem(path: str | Path) -> SafetyProblem:
    """Read a JSON problem file (or a bundled problem name) and check it.

    Error-level diagnostics raise :class:`ProblemFileError`; warnings are logged.
    """
    p = _resolve(path)
    try:
        doc = json.loads(Path(p).read_text())
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"<root>: not valid JSON ({exc})") from exc
    prob = problem_from_dict(doc)
    for d in validate(prob):
        if d.level == "error":
            raise ProblemFileError(f"{d.code}: {d.message}")
        log.warning("%s: %s", d.code, d.message)
    return prob


def describe_problem(p: SafetyProblem, name: str = "") -> dict:
    names = list(p.state_names)
    init = p.initial
    if isinstance(init, Dirac):
        initial: dict = {"dirac": list(init.point)}
    elif isinstance(init, UniformBox):
        initial = {"uniform_box": {"lo": list(init.lower), "hi": list(init.upper)}}
    else:
        initial = {"moments": {"degree": init.degree, "values": list(init.values)}}
    return {
        "name": name,
        "variables": names,
        "T": p.T,
        "dynamics": [f.to_string(names) for f in p.dynamics],
        "X": [g.to_string(names) + " >= 0" for g in p.X],
        "X_u": [g.to_string(names) + " >= 0" for g in p.X_u],
        "box": [list(b) for b in p.box] if p.box else None,
        "initial": initial,
        "objective": p.objective.to_string(names),
    }


# -- configuration and reports -------------------------------------------------


def parse_orders(text: str) -> list[int]:
    """``"a:b"`` (inclusive) or a comma separated list, strictly increasing and >= 1."""
    text = text.strip()
    try:
        if ":" in text:
            a, b = text.split(":")
            orders = list(range(int(a), int(b) + 1))
        else:
            orders = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ValueError(f"cannot read orders from {text!r}") from None
    _check_orders(orders)
    return orders


def _check_orders(orders: Sequence[int]) -> None:
    if not orders:
        raise ValueError("at least one relaxation order is required")
    if orders[0] < 1 or any(b <= a for a, b in zip(orders, orders[1:])):
        raise ValueError(f"orders must be >= 1 and strictly increasing, got {list(orders)}")


@dataclass
class SimulationRequest:
    samples: int = 1
    seed: int = 0
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    refine_tol: float = 1e-10


@dataclass
class RunConfig:
    problem: str
    orders: list[int] = field(default_factory=lambda: [2, 3, 4, 5])
    solver: SolverOptions = field(default_factory=SolverOptions)
    simulate: SimulationRequest | None = None
    certificates: bool = False
    out: str | None = None
    csv: str | None = None
    jobs: int = 1
    margin: float = DEFAULT_MARGIN

    def __post_init__(self):
        _check_orders(self.orders)
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        if self.margin < 0:
            raise ValueError("margin must be >= 0")

    def echo(self) -> dict:
        return {
            "problem": str(self.problem),
            "orders": list(self.orders),
            "solver": {
                "max_iterations": self.solver.max_iterations,
                "feasibility_tol": self.solver.feasibility_tol,
                "gap_tol": self.solver.gap_tol,
            },
            "simulate": asdict(self.simulate) if self.simulate else None,
            "certificates": self.certificates,
            "out": self.out,
            "csv": self.csv,
            "jobs": self.jobs,
            "margin": self.margin,
        }


@dataclass
class OrderRecord:
    r: int
    bound_normalized: float
    bound_seconds: float
    dual_normalized: float
    dual_seconds: float
    status: str
    iterations: int
    solve_seconds: float
    primal_residual: float
    dual_residual: float
    relative_gap: float
    occupation_mass: float
    message: str = ""
    certificate: dict | None = None

    @property
    def ok(self) -> bool:
        return self.status in (Status.OPTIMAL.value, Status.NEAR_OPTIMAL.value)


@dataclass
class HierarchyReport:
    version: str
    problem: dict
    scaling: dict
    orders: list[OrderRecord]
    oracle: dict | None
    warnings: list[str]
    config: dict
    exit_code: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> HierarchyReport:
        body = dict(doc)
        body["orders"] = [OrderRecord(**o) for o in doc["orders"]]
        return cls(**body)


def _solve_order(
    q: SafetyProblem, T: float, r: int, opts: SolverOptions, certificates: bool, margin: float = DEFAULT_MARGIN
) -> OrderRecord:
    t0 = time.perf_counter()
    try:
        R = solve_relaxation(q, r, opts, certificate=certificates, margin=margin)
    except (SolverError, RelaxationError) as exc:
        nan = float("nan")
        return OrderRecord(
            r, nan, nan, nan, nan, Status.NUMERICAL_FAILURE.value, 0,
            time.perf_counter() - t0, nan, nan, nan, nan, str(exc),
        )
    S = R.solution
    cert = None
    if certificates:
        if R.certificate is None:
            cert = {
                "passed": False,
                "worst": None,
                "violations": {},
                "bound_seconds": None,
                "note": "no certificate (solve failed)",
            }
        else:
            rep = verify_certificate(R.certificate, q)
            cert = {
                "passed": rep.passed,
                "worst": rep.worst,
                "violations": rep.violations,
                "bound_seconds": rep.dual_objective * T,
                "note": "",
            }
    scale = ScalingRecord(T, (), ())
    return OrderRecord(
        r=r,
        bound_normalized=R.p_r,
        bound_seconds=bound_in_original_units(R.p_r, scale),
        dual_normalized=R.d_r,
        dual_seconds=bound_in_original_units(R.d_r, scale),
        status=R.status.value,
        iterations=S.iterations,
        solve_seconds=time.perf_counter() - t0,
        primal_residual=S.primal_residual,
        dual_residual=S.dual_residual,
        relative_gap=S.relative_gap,
        occupation_mass=R.moments["occupation"].mass,
        message=S.message,
        certificate=cert,
    )


def monotonicity_warnings(records: Sequence[OrderRecord], tol: float = MONOTONE_TOL) -> list[str]:
    """Flag ``p_{r'} > p_r + tol`` for consecutive solved orders ``r < r'`` (normalized units)."""
    solved = [rec for rec in records if rec.ok]
    out = []
    for a, b in zip(solved, solved[1:]):
        if b.bound_normalized > a.bound_normalized + tol:
            out.append(
                f"bound increases from r={a.r} ({a.bound_normalized:.9g}) to r={b.r} "
                f"({b.bound_normalized:.9g}); solver accuracy is the likely cause"
            )
    return out


def run_hierarchy(config: RunConfig) -> HierarchyReport:
    """Normalize, then solve every requested order; failures are recorded, not raised."""
    path = _resolve(config.problem)
    warnings: list[str] = []
    p = problem_from_dict(json.loads(Path(path).read_text()))
    for d in validate(p):
        if d.level == "error":
            raise ProblemFileError(f"{d.code}: {d.message}")
        warnings.append(f"{d.code}: {d.message}")
    q, scaling = normalize(p)

    if config.jobs > 1 and len(config.orders) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as ex:
            futs = [
                ex.submit(_solve_order, q, p.T, r, config.solver, config.certificates, config.margin)
                for r in config.orders
            ]
            records = [f.result() for f in futs]
    else:
        records = [_solve_order(q, p.T, r, config.solver, config.certificates, config.margin)
                    for r in config.orders]
    for rec in records:
        log.info("r=%d %s bound %.9g s (%.1f s)", rec.r, rec.status, rec.bound_seconds, rec.solve_seconds)
    warnings += monotonicity_warnings(records)

    oracle = None
    if config.simulate is not None:
        s = config.simulate
        est = expected_time(p, s.samples, s.seed, s.rel_tol, s.abs_tol, s.refine_tol)
        oracle = {
            "seconds": est.seconds,
            "standard_error": est.standard_error,
            "samples": est.samples,
            "normalized": est.seconds / p.T,
        }
        for rec in records:
            if rec.ok and rec.bound_seconds < est.seconds - 1e-4 * p.T - 3 * est.standard_error:
                warnings.append(f"r={rec.r} bound {rec.bound_seconds:.6g} s is below the simulated time")

    exit_code = 0 if all(rec.ok for rec in records) else 1
    name = path.stem
    return HierarchyReport(
        version=__version__,
        problem=describe_problem(p, name),
        scaling={"T": scaling.T, "scale": list(scaling.scale), "shift": list(scaling.shift)},
        orders=records,
        oracle=oracle,
        warnings=warnings,
        config=config.echo(),
        exit_code=exit_code,
    )


def emit_report(report: HierarchyReport, out: str | Path | None, csv_path: str | Path | None = None) -> None:
    if out is not None:
        Path(out).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for rec in report.orders:
                w.writerow([rec.r, repr(rec.bound_seconds), repr(rec.dual_seconds), rec.status, repr(rec.solve_seconds)])


def load_report(path: str | Path) -> HierarchyReport:
    return HierarchyReport.from_dict(json.loads(Path(path).read_text()))


# -- command line --------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="occusafe", description=__doc__)
    ap.add_argument("--version", action="version", version=f"occusafe {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="bound the time in X_u with a hierarchy of relaxations")
    s.add_argument("--problem", required=True, help="problem JSON file or bundled name")
    s.add_argument("--orders", default="2:5", help="'a:b' or a comma list (default 2:5)")
    s.add_argument("--simulate", type=int, metavar="N", help="also run the simulation oracle with N samples")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--certificates", action="store_true", help="extract and verify dual certificates")
    s.add_argument("--solver-tol", type=float, metavar="X", help="feasibility and gap tolerance")
    s.add_argument("--max-iterations", type=int, default=200)
    s.add_argument(
        "--margin", type=float, default=DEFAULT_MARGIN, help="PSD margin eps in F(y) + eps*I >= 0 (0 disables)"
    )
    s.add_argument("--out", required=True, help="JSON report path")
    s.add_argument("--csv", help="CSV of per-order bounds")
    s.add_argument("--jobs", type=int, default=1, help="orders solved concurrently")

    m = sub.add_parser("simulate", help="time in X_u from simulated trajectories")
    m.add_argument("--problem", required=True, help="problem JSON file or bundled name")
    m.add_argument("--samples", type=int, default=1)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--rel-tol", type=float, default=1e-9)
    m.add_argument("--abs-tol", type=float, default=1e-12)
    m.add_argument("--refine-tol", type=float, default=1e-10)
    m.add_argument("--dump-traj", metavar="CSV", help="write one trajectory (Dirac point, or box centre)")
    return ap


def _cmd_solve(args) -> int:
    opts = SolverOptions(max_iterations=args.max_iterations)
    if args.solver_tol is not None:
        opts = SolverOptions(
            max_iterations=args.max_iterations, feasibility_tol=args.solver_tol, gap_tol=args.solver_tol
        )
    sim = SimulationRequest(samples=args.simulate, seed=args.seed) if args.simulate else None
    cfg = RunConfig(
        problem=args.problem,
        orders=parse_orders(args.orders),
        solver=opts,
        simulate=sim,
        certificates=args.certificates,
        out=args.out,
        csv=args.csv,
        jobs=args.jobs,
        margin=args.margin,
    )
    report = run_hierarchy(cfg)
    emit_report(report, cfg.out, cfg.csv)
    for rec in report.orders:
        print(f"r={rec.r:<3d} {rec.status:<18s} bound {rec.bound_seconds:.9g} s   dual {rec.dual_seconds:.9g} s")
    if report.oracle:
        print(f"simulated time in X_u: {report.oracle['seconds']:.9g} s")
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return report.exit_code


def _cmd_simulate(args) -> int:
    p = load_problem(args.problem)
    est: TimeEstimate = expected_time(p, args.samples, args.seed, args.rel_tol, args.abs_tol, args.refine_tol)
    if args.dump_traj:
        init = p.initial
        x0 = init.point if isinstance(init, Dirac) else [0.5 * (a + b) for a, b in zip(init.lower, init.upper)]
        traj = integrate(p, x0, args.rel_tol, args.abs_tol)
        dump_trajectory(traj, p.X_u, args.dump_traj, names=list(p.state_names))
    print(
        json.dumps(
            {
                "seconds": est.seconds,
                "standard_error": est.standard_error,
                "samples": est.samples,
                "T": p.T,
            }
        )
    )
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        return _cmd_simulate(args)
    except (ProblemFileError, OracleError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
