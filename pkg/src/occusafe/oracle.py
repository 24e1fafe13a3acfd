"""Simulation ground truth: trajectories, time spent in the unsafe set, empirical moments."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .moments import MomentVector
from .polyalg import Polynomial, enumerate_monomials
from .problem import Dirac, RawMoments, SafetyProblem, UniformBox, in_set

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


class OracleError(RuntimeError):
    pass


@dataclass
class Trajectory:
    """Samples ``x(t_k)`` of one solution plus the integrator's dense interpolant."""

    t: np.ndarray
    x: np.ndarray  # (len(t), n)
    rel_tol: float
    abs_tol: float
    n_accepted: int
    n_evaluations: int
    interpolant: object | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.t.ndim != 1 or len(self.t) < 2:
            raise OracleError("a trajectory needs at least two time stamps")
        if np.any(np.diff(self.t) <= 0):
            raise OracleError("time stamps must be strictly increasing")

    @property
    def T(self) -> float:
        return float(self.t[-1])

    def state(self, t: float) -> np.ndarray:
        if self.interpolant is not None:
            return np.asarray(self.interpolant(t), dtype=float)
        return np.array([np.interp(t, self.t, self.x[:, i]) for i in range(self.x.shape[1])])


@dataclass(frozen=True)
class TimeEstimate:
    seconds: float
    standard_error: float
    samples: int
    per_sample: tuple[float, ...]


def _vector_field(p: SafetyProblem):
    dyn = p.dynamics

    def rhs(t: float, x: np.ndarray) -> np.ndarray:
        pt = np.concatenate(([t], x))[None, :]
        return np.array([f.evaluate_many(pt)[0] for f in dyn])

    return rhs


def integrate(
    p: SafetyProblem,
    x0: Sequence[float],
    rel_tol: float = 1e-9,
    abs_tol: float = 1e-12,
    max_step: float | None = None,
) -> Trajectory:
    """Solve ``dx/dt = f(t, x)`` on ``[0, T]`` with an embedded 4(5) Runge-Kutta pair.

    Output is sampled at least every ``max_step`` (default ``T/1000``) on top of
    the accepted steps.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (p.n,):
        raise OracleError(f"initial state has {x0.size} entries, expected {p.n}")
    if rel_tol <= 0 or abs_tol <= 0:
        raise OracleError("integrator tolerances must be positive")
    h = p.T / 1000 if max_step is None else float(max_step)
    sol = solve_ivp(
        _vector_field(p),
        (0.0, p.T),
        x0,
        method="RK45",
        rtol=rel_tol,
        atol=abs_tol,
        max_step=h,
        dense_output=True,
    )
    if sol.status != 0:
        raise OracleError(f"integration stopped at t={sol.t[-1]:.6g}: {sol.message} (stiff or blow-up)")
    grid = np.linspace(0.0, p.T, int(math.ceil(p.T / h)) + 1)
    t = np.union1d(sol.t, grid)
    t = t[np.concatenate(([True], np.diff(t) > 1e-14 * p.T))]
    t[-1] = p.T
    x = sol.sol(t).T
    x[0] = x0
    return Trajectory(t, x, rel_tol, abs_tol, len(sol.t) - 1, sol.nfev, sol.sol)


def _membership(traj: Trajectory, X_u: Sequence[Polynomial], t: float) -> bool:
    pt = np.concatenate(([t], traj.state(t)))[None, :]
    return bool(in_set(X_u, pt)[0])


def _crossing(traj: Trajectory, X_u: Sequence[Polynomial], a: float, b: float, inside_a: bool, tol: float) -> float:
    while b - a > tol:
        m = 0.5 * (a + b)
        if _membership(traj, X_u, m) == inside_a:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def time_in_unsafe(traj: Trajectory, X_u: Sequence[Polynomial], refine_tol: float = 1e-10) -> float:
    """Length of ``{t : min_i g_i(x(t)) >= 0}``, boundaries located by bisection.

    Points on the boundary count as unsafe.  Between consecutive samples the
    membership is assumed to change at most once.
    """
    pts = np.hstack([traj.t[:, None], traj.x])
    inside = in_set(X_u, pts)
    total = 0.0
    start = 0.0 if inside[0] else None
    for k in range(1, len(traj.t)):
        if inside[k] == inside[k - 1]:
            continue
        tc = _crossing(traj, X_u, traj.t[k - 1], traj.t[k], bool(inside[k - 1]), refine_tol)
        if inside[k]:
            start = tc
        else:
            total += tc - start
            start = None
    if start is not None:
        total += traj.T - start
    return float(min(max(total, 0.0), traj.T))


def expected_time(
    p: SafetyProblem,
    samples: int = 1,
    seed: int = 0,
    rel_tol: float = 1e-9,
    abs_tol: float = 1e-12,
    refine_tol: float = 1e-10,
) -> TimeEstimate:
    """Expected time in ``X_u`` over the initial distribution.

    Draw ``k`` uses its own generator spawned from ``(seed, k)``, so results do
    not depend on evaluation order.
    """
    if samples < 1:
        raise OracleError("samples must be >= 1")
    init = p.initial
    if isinstance(init, RawMoments):
        raise OracleError("cannot sample an initial distribution given only by its moments")
    if isinstance(init, Dirac):
        tau = time_in_unsafe(integrate(p, init.point, rel_tol, abs_tol), p.X_u, refine_tol)
        return TimeEstimate(tau, 0.0, 1, (tau,))
    assert isinstance(init, UniformBox)
    children = np.random.SeedSequence(seed).spawn(samples)
    times = []
    for child in children:
        x0 = np.random.default_rng(child).uniform(init.lower, init.upper)
        times.append(time_in_unsafe(integrate(p, x0, rel_tol, abs_tol), p.X_u, refine_tol))
    arr = np.array(times)
    se = float(arr.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return TimeEstimate(float(arr.mean()), se, samples, tuple(times))


def empirical_moments(traj: Trajectory, degree: int) -> MomentVector:
    """Trapezoidal ``y_(a, alpha) = int_0^T t^a x(t)^alpha dt`` of one trajectory."""
    if degree < 0:
        raise OracleError("degree must be >= 0")
    pts = np.hstack([traj.t[:, None], traj.x])
    basis = np.array(enumerate_monomials(pts.shape[1], degree), dtype=float)
    vals = np.prod(pts[:, None, :] ** basis[None, :, :], axis=2)
    return MomentVector(pts.shape[1], degree, _trapezoid(vals, traj.t, axis=0))


def dump_trajectory(traj: Trajectory, X_u: Sequence[Polynomial], path: str | Path, names: Sequence[str] | None = None) -> None:
    n = traj.x.shape[1]
    names = list(names) if names else [f"x{i + 1}" for i in range(n)]
    flags = in_set(X_u, np.hstack([traj.t[:, None], traj.x]))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *names, "unsafe"])
        for t, x, u in zip(traj.t, traj.x, flags):
            w.writerow([repr(float(t)), *(repr(float(v)) for v in x), int(u)])
