"""Equilibrium detection, delay-stability bound, direction fields, adaptation metrics."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory
from .errors import DomainError, ValidationError

EPS_ACTIVE = 1e-3


@dataclass(frozen=True)
class EquilibriumReport:
    equilibrium_shares: np.ndarray
    utility_spread: float  # max - min utility over active strategies
    relative_spread: float  # utility_spread / |average utility|
    converged: bool
    time_to_converge: float | None
    residual: float  # max_g |dp_g/dt| at the final state
    active: tuple[int, ...]


def convergence_time(traj: Trajectory, tol=1e-6, sustain=100):
    """Start of the final run of residuals below ``tol``, if that run is long enough.

    Runs shorter than ``sustain`` count only when they reach back to ``t=0``
    on a trajectory shorter than ``sustain`` samples.
    """
    below = traj.residuals < tol
    n = len(below)
    if n == 0 or not below[-1]:
        return None
    k = n - 1
    while k > 0 and below[k - 1]:
        k -= 1
    if n - k < min(sustain, n):
        return None
    return float(traj.times[k])


def detect_equilibrium(traj: Trajectory, tol=1e-6, eps_active=EPS_ACTIVE, sustain=100):
    """Summarize whether ``traj`` settled and how equal the surviving utilities are.

    Parameters
    ----------
    traj : Trajectory
    tol : float
        Residual threshold on ``max_g |dp_g/dt|``.
    eps_active : float
        Strategies with final share at most this are treated as extinct and
        excluded from the utility spread.
    sustain : int
        Number of trailing samples that must satisfy the residual test.
    """
    if len(traj) == 0:
        raise ValidationError("empty trajectory")
    final = traj.shares[-1]
    active = tuple(int(g) for g in np.flatnonzero(final > eps_active))
    t_conv = convergence_time(traj, tol, sustain)
    spread = rel = float("nan")
    if traj.utilities is not None and active:
        u = traj.utilities[-1][list(active)]
        spread = float(u.max() - u.min())
        mean = float(traj.average_utilities[-1])
        rel = spread / abs(mean) if mean != 0 else float("inf")
    return EquilibriumReport(
        equilibrium_shares=final.copy(),
        utility_spread=spread,
        relative_spread=rel,
        converged=t_conv is not None,
        time_to_converge=t_conv,
        residual=float(traj.residuals[-1]),
        active=active,
    )


def delay_stability_bound(net_values, learning_rate, population):
    """Largest delay ``pi / (2 kappa)`` with ``kappa = mu sum_g a_g / N`` guaranteeing stability.

    The bound is exact for two strategies; for larger strategy sets it is a
    heuristic and a warning is issued.
    """
    a = np.asarray(net_values, dtype=float)
    if a.size != 2:
        warnings.warn(
            f"delay bound derived for two services; applied heuristically to G={a.size}",
            stacklevel=2)
    kappa = learning_rate * a.sum() / population
    if not kappa > 0:
        raise DomainError(f"delay bound undefined: kappa={kappa:.6g} is not positive")
    return math.pi / (2.0 * kappa)


@dataclass(frozen=True)
class DirectionField:
    axes: tuple[int, int]
    grid: np.ndarray  # (n, 2) values of (p_a, p_b)
    vectors: np.ndarray  # (n, 2) values of (dp_a/dt, dp_b/dt)
    full_vectors: np.ndarray  # (n, G)
    points: np.ndarray  # (n, G) full share vectors
    closure_rule: str
    t_eval: float


def direction_field(field, axes, fixed_shares=None, closure=None, grid_n=11, t_eval=0.0):
    """Replicator vectors on a triangular grid over two strategies.

    Strategies listed in ``fixed_shares`` keep their value, the ``closure``
    strategy takes ``1 - sum(others)`` and any remaining strategy is 0. The
    grid covers ``p_a, p_b >= 0`` with ``p_a + p_b`` at most the room left by
    the fixed shares. The field is autonomous, so ``t_eval`` is only recorded.
    """
    G = field.size
    a, b = (int(x) for x in axes)
    fixed = {int(k): float(v) for k, v in (fixed_shares or {}).items()}
    if closure is None:
        closure = next(g for g in range(G) if g not in (a, b) and g not in fixed)
    closure = int(closure)
    used = {a, b, closure, *fixed}
    if len({a, b, closure}) < 3 or closure in fixed or a in fixed or b in fixed:
        raise ValidationError("axes, closure and fixed strategies must be distinct")
    if not all(0 <= g < G for g in used):
        raise ValidationError("strategy index out of range")
    if grid_n < 2:
        raise ValidationError("grid_n must be >= 2")
    room = 1.0 - sum(fixed.values())
    if room < 0 or any(v < 0 for v in fixed.values()):
        raise ValidationError("fixed shares must be non-negative and sum to at most 1")
    grid, pts = [], []
    for i in range(grid_n):
        for j in range(grid_n - i):
            pa, pb = room * i / (grid_n - 1), room * j / (grid_n - 1)
            p = np.zeros(G)
            for g, v in fixed.items():
                p[g] = v
            p[a], p[b] = pa, pb
            p[closure] = max(room - pa - pb, 0.0)
            grid.append((pa, pb))
            pts.append(p)
    pts = np.array(pts)
    full = np.array([field(p) for p in pts])
    rule = f"p[{closure}] = 1 - sum(others); fixed {sorted(fixed.items())}"
    return DirectionField(axes=(a, b), grid=np.array(grid), vectors=full[:, [a, b]],
                          full_vectors=full, points=pts, closure_rule=rule, t_eval=float(t_eval))


@dataclass(frozen=True)
class AdaptationMetrics:
    time_to_converge: float | None
    total_variation: np.ndarray  # per step, sum_g |p_g(t_{n+1}) - p_g(t_n)|
    early_total_variation: float
    fluctuation_amplitude: float  # largest per-strategy share range in the early window
    total_utility: np.ndarray | None  # N * average utility per sample


def adaptation_metrics(traj: Trajectory, early_window=100.0, tol=1e-6, sustain=100,
                       population=None):
    """Adaptation statistics of a trajectory.

    The early window covers ``t <= early_window``. Strategy-adaptation
    frequency is measured as per-step total variation of the shares.
    """
    if len(traj) == 0:
        raise ValidationError("empty trajectory")
    tv = np.abs(np.diff(traj.shares, axis=0)).sum(axis=1)
    early = traj.times <= early_window
    early_tv = float(tv[early[1:]].sum())
    window = traj.shares[early]
    amp = float((window.max(axis=0) - window.min(axis=0)).max())
    N = population if population is not None else traj.metadata.get("population")
    total = None
    if traj.average_utilities is not None and N is not None:
        total = N * traj.average_utilities
    return AdaptationMetrics(
        time_to_converge=convergence_time(traj, tol, sustain),
        total_variation=tv,
        early_total_variation=early_tv,
        fluctuation_amplitude=amp,
        total_utility=total,
    )
