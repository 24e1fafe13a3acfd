"""Safety problem data, validation and normalization to ``T = 1``, ``X in [-1, 1]^n``."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence, Union

import numpy as np

from .moments import (
    MomentError,
    MomentVector,
    box_uniform_moments,
    dirac_moments,
    riesz,
)
from .polyalg import Polynomial, compose_affine, enumerate_monomials, num_monomials


class ProblemError(ValueError):
    pass


@dataclass(frozen=True)
class Dirac:
    point: tuple[float, ...]


@dataclass(frozen=True)
class UniformBox:
    lower: tuple[float, ...]
    upper: tuple[float, ...]


@dataclass(frozen=True)
class RawMoments:
    """User-supplied moments of the initial distribution over the states."""

    degree: int
    values: tuple[float, ...]


InitialDistribution = Union[Dirac, UniformBox, RawMoments]


@dataclass(frozen=True)
class SafetyProblem:
    """Dynamics ``dx/dt = f(t, x)`` on ``[0, T]`` with state set ``X`` and unsafe set ``X_u``.

    ``X`` and ``X_u`` are lists of polynomials ``g`` describing ``{g >= 0}``.
    ``box`` is an optional per-coordinate bounding box of ``X``, used for
    sampling during validation and as the default normalization box.
    """

    n: int
    dynamics: tuple[Polynomial, ...]
    T: float
    X: tuple[Polynomial, ...]
    X_u: tuple[Polynomial, ...]
    initial: InitialDistribution
    objective: Polynomial | None = None
    state_names: tuple[str, ...] | None = None
    box: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ProblemError("state dimension must be >= 1")
        if not self.T > 0:
            raise ProblemError(f"horizon T must be positive, got {self.T}")
        if len(self.dynamics) != self.n:
            raise ProblemError(f"expected {self.n} dynamics components, got {len(self.dynamics)}")
        object.__setattr__(self, "dynamics", tuple(self.dynamics))
        object.__setattr__(self, "X", tuple(self.X))
        object.__setattr__(self, "X_u", tuple(self.X_u))
        if self.objective is None:
            object.__setattr__(self, "objective", Polynomial.constant(self.n, 1.0))
        if self.state_names is None:
            object.__setattr__(self, "state_names", tuple(f"x{i + 1}" for i in range(self.n)))
        if self.box is not None:
            object.__setattr__(self, "box", tuple((float(a), float(b)) for a, b in self.box))

    @property
    def dynamics_degree(self) -> int:
        return max(f.degree for f in self.dynamics)

    def all_polynomials(self) -> list[tuple[str, Polynomial]]:
        out = [(f"dynamics[{i}]", f) for i, f in enumerate(self.dynamics)]
        out += [(f"X[{i}]", g) for i, g in enumerate(self.X)]
        out += [(f"X_u[{i}]", g) for i, g in enumerate(self.X_u)]
        out.append(("objective", self.objective))
        return out


@dataclass(frozen=True)
class ScalingRecord:
    """Original coordinates ``x_i = scale[i] * xt_i + shift[i]`` and time ``t = T * tau``."""

    T: float
    scale: tuple[float, ...]
    shift: tuple[float, ...]

    def to_original(self, x_normalized: Sequence[float]) -> np.ndarray:
        return np.asarray(self.scale) * np.asarray(x_normalized, dtype=float) + np.asarray(self.shift)

    def to_normalized(self, x: Sequence[float]) -> np.ndarray:
        return (np.asarray(x, dtype=float) - np.asarray(self.shift)) / np.asarray(self.scale)


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "error" | "warning"
    code: str
    message: str


def in_set(polys: Sequence[Polynomial], points: np.ndarray) -> np.ndarray:
    """Membership of ``(k, 1+n)`` points in ``{g >= 0 for all g}``."""
    ok = np.ones(points.shape[0], dtype=bool)
    for g in polys:
        ok &= g.evaluate_many(points) >= 0.0
    return ok


def validate(p: SafetyProblem, samples: int = 10_000, seed: int = 0) -> list[Diagnostic]:
    """Check the preconditions of the safety problem; empty list means clean."""
    diags: list[Diagnostic] = []
    for name, poly in p.all_polynomials():
        if poly.n != p.n:
            diags.append(Diagnostic("error", "variables", f"{name} is over {poly.n} states, expected {p.n}"))
    for name, poly in [(f"X[{i}]", g) for i, g in enumerate(p.X)] + [
        (f"X_u[{i}]", g) for i, g in enumerate(p.X_u)
    ]:
        if poly.n == p.n and poly.uses_variable(0):
            diags.append(Diagnostic("error", "variables", f"{name} depends on t; sets must be time-free"))
    if any(d.level == "error" for d in diags):
        return diags

    init = p.initial
    if isinstance(init, Dirac):
        if len(init.point) != p.n:
            diags.append(Diagnostic("error", "initial", f"Dirac point has {len(init.point)} coordinates"))
        else:
            pt = np.array([[0.0, *init.point]])
            if not in_set(p.X, pt)[0]:
                diags.append(Diagnostic("warning", "initial", "Dirac initial point lies outside X"))
    elif isinstance(init, UniformBox):
        lo, hi = np.asarray(init.lower), np.asarray(init.upper)
        if lo.shape != (p.n,) or hi.shape != (p.n,) or np.any(hi <= lo):
            diags.append(Diagnostic("error", "initial", "uniform box needs lower < upper per coordinate"))
    elif isinstance(init, RawMoments):
        expected = num_monomials(p.n, init.degree)
        if len(init.values) != expected:
            diags.append(Diagnostic("error", "initial", f"raw moments need {expected} values"))
        elif abs(init.values[0] - 1.0) > 1e-9:
            diags.append(Diagnostic("error", "initial", f"raw moment mass is {init.values[0]}, expected 1"))

    if p.box is None:
        diags.append(Diagnostic("warning", "sampling", "no bounding box given; set inclusion not sampled"))
        return diags
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in p.box])
    hi = np.array([b[1] for b in p.box])
    x = rng.uniform(lo, hi, size=(samples, p.n))
    t = rng.uniform(0.0, p.T, size=(samples, 1))
    pts = np.hstack([t, x])
    unsafe = in_set(p.X_u, pts)
    if unsafe.any():
        outside = unsafe & ~in_set(p.X, pts)
        if outside.any():
            diags.append(
                Diagnostic("warning", "inclusion", f"{int(outside.sum())} sampled points of X_u are outside X")
            )
        gvals = p.objective.evaluate_many(pts[unsafe])
        if np.any(gvals <= 0.0):
            diags.append(
                Diagnostic(
                    "warning",
                    "positivity",
                    f"objective is not positive on [0,T] x X_u (min sampled value {gvals.min():.3g})",
                )
            )
    else:
        diags.append(Diagnostic("warning", "sampling", "no sampled point landed in X_u"))
    return diags


def _same_constraint(a: Polynomial, b: Polynomial) -> bool:
    sa, sb = a.max_abs_coefficient(), b.max_abs_coefficient()
    if sa == 0 or sb == 0:
        return False
    return a.scale(1 / sa).allclose(b.scale(1 / sb), atol=1e-12)


def _append_unique(polys: list[Polynomial], extra: Sequence[Polynomial]) -> tuple[Polynomial, ...]:
    out = list(polys)
    for g in extra:
        if not any(_same_constraint(g, h) for h in out):
            out.append(g)
    return tuple(out)


def normalize(
    p: SafetyProblem, box: Sequence[tuple[float, float]] | None = None
) -> tuple[SafetyProblem, ScalingRecord]:
    """Rescale time to ``[0, 1]`` and ``box`` to ``[-1, 1]^n``.

    The returned problem has the box constraints ``1 - xt_i^2 >= 0`` appended
    to ``X`` (duplicates of existing constraints up to a positive factor are
    skipped).
    """
    box = box if box is not None else p.box
    if box is None:
        raise ProblemError("normalization needs a bounding box")
    if len(box) != p.n:
        raise ProblemError(f"box has {len(box)} intervals, expected {p.n}")
    lo = np.array([float(b[0]) for b in box])
    hi = np.array([float(b[1]) for b in box])
    if np.any(hi <= lo):
        raise ProblemError("zero-width or inverted box interval")
    s = (hi - lo) / 2.0
    c = (hi + lo) / 2.0
    T = float(p.T)
    scale = [T, *s]
    shift = [0.0, *c]

    def sub(g: Polynomial) -> Polynomial:
        return compose_affine(g, scale, shift)

    dyn = tuple(sub(f).scale(T / s[i]).cleanup() for i, f in enumerate(p.dynamics))
    n = p.n
    box_polys = [
        Polynomial.constant(n, 1.0) - Polynomial.variable(n, i + 1) ** 2 for i in range(n)
    ]
    X = _append_unique([sub(g) for g in p.X], box_polys)
    X_u = tuple(sub(g) for g in p.X_u)

    init = p.initial
    if isinstance(init, Dirac):
        new_init: InitialDistribution = Dirac(tuple(float(v) for v in (np.asarray(init.point) - c) / s))
    elif isinstance(init, UniformBox):
        new_init = UniformBox(
            tuple(float(v) for v in (np.asarray(init.lower) - c) / s),
            tuple(float(v) for v in (np.asarray(init.upper) - c) / s),
        )
    else:
        new_init = RawMoments(init.degree, tuple(_transform_raw_moments(init, s, c)))

    out = replace(
        p,
        dynamics=dyn,
        T=1.0,
        X=X,
        X_u=X_u,
        initial=new_init,
        objective=sub(p.objective),
        box=tuple((-1.0, 1.0) for _ in range(n)),
    )
    return out, ScalingRecord(T, tuple(float(v) for v in s), tuple(float(v) for v in c))


def _transform_raw_moments(init: RawMoments, s: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Moments of ``xt = (x - c) / s`` from moments of ``x``."""
    n = len(s)
    y = MomentVector(n, init.degree, np.asarray(init.values, dtype=float))
    out = []
    for beta in enumerate_monomials(n, init.degree):
        mono = Polynomial(n, {(0, *beta): 1.0})
        expanded = compose_affine(mono, [1.0, *(1.0 / s)], [0.0, *(-c / s)])
        out.append(riesz(y, expanded))
    return np.array(out)


def initial_moments(p: SafetyProblem, d: int) -> MomentVector:
    """Moments of the initial distribution over the states up to degree ``d``."""
    if d < 0:
        raise ProblemError("degree must be >= 0")
    init = p.initial
    if isinstance(init, Dirac):
        return dirac_moments(init.point, d, p.n)
    if isinstance(init, UniformBox):
        return box_uniform_moments(init.lower, init.upper, d)
    if abs(init.values[0] - 1.0) > 1e-9:
        raise ProblemError(f"raw initial moments must have mass 1, got {init.values[0]}")
    if init.degree < d:
        raise ProblemError(f"raw initial moments given up to degree {init.degree}, need {d}")
    try:
        return MomentVector(p.n, init.degree, np.asarray(init.values, dtype=float)).truncate(d)
    except MomentError as exc:
        raise ProblemError(str(exc)) from exc
