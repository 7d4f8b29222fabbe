"""Replicator dynamics on the strategy simplex: classical, delayed and fractional.

All integrators are fixed-step and deterministic. They accept any callable
``field(p) -> dp/dt``; population studies use :class:`ReplicatorField`, while
scalar test problems pass plain functions with ``project=False``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import gamma, rgamma

from .errors import BlowUpError, DomainError, NonConvergenceError, ValidationError
from .utility import PopulationState, utilities as _utilities

KINDS = ("classical", "delayed", "fractional")
BLOWUP_THRESHOLD = 10.0


def replicator_rhs(p, u, learning_rate=1.0):
    """Textbook replicator field ``mu p_g (u_g - sum_h p_h u_h)``."""
    p = np.asarray(p, dtype=float)
    u = np.asarray(u, dtype=float)
    return learning_rate * p * (u - np.dot(p, u))


class ReplicatorField:
    """Replicator field for congestion utilities ``u_g = a_g / (p_g N)``.

    Because ``p_g u_g = a_g / N`` the field is evaluated in product form,

        dp_g/dt = mu (a_g / N - p_g sum_h a_h / N),

    which is finite everywhere on the simplex. An empty group is credited
    with the limit of ``p_g u_g`` as ``p_g -> 0+``, i.e. ``max(a_g, 0) / N``:
    a profitable service attracts its first users, an unprofitable one stays
    empty. With ``absorbing=True`` empty groups earn nothing and remain
    extinct, which is the usual boundary convention for replicator flows.

    Parameters
    ----------
    net_values : array_like
        Group surplus ``a_g`` (currency), one per strategy.
    population : int
    learning_rate : float
    absorbing : bool
    """

    def __init__(self, net_values, population, learning_rate, absorbing=False):
        self.net_values = np.asarray(net_values, dtype=float)
        if self.net_values.ndim != 1 or self.net_values.size == 0:
            raise ValidationError("net_values must be a non-empty vector")
        if population < 1:
            raise ValidationError("population must be >= 1")
        if not learning_rate > 0:
            raise ValidationError("learning_rate must be positive")
        self.population = int(population)
        self.learning_rate = float(learning_rate)
        self.absorbing = bool(absorbing)

    @property
    def size(self):
        return self.net_values.size

    def payoff_mass(self, p):
        """``p_g u_g`` in product form, with the boundary convention applied."""
        p = np.asarray(p, dtype=float)
        a = self.net_values
        empty = p <= 0
        if not empty.any():
            return a / self.population
        boundary = 0.0 if self.absorbing else np.maximum(a, 0.0)
        return np.where(empty, boundary, a) / self.population

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        mass = self.payoff_mass(p)
        return self.learning_rate * (mass - p * mass.sum())

    def utilities(self, p):
        return _utilities(self.net_values, p, self.population)

    def average_utility(self, p):
        return float(self.payoff_mass(p).sum())

    def equilibrium(self):
        """Interior rest point ``a / sum(a)`` (requires every ``a_g > 0``)."""
        a = self.net_values
        if np.any(a <= 0):
            raise DomainError("interior equilibrium requires every net value to be positive")
        return a / a.sum()

    def convergence_rate(self):
        """Decay rate ``mu sum(a) / N`` of the linear interior flow."""
        return self.learning_rate * self.net_values.sum() / self.population


@dataclass(frozen=True)
class DynamicsConfig:
    """Integration settings.

    ``initial_shares`` is ``"uniform"``, ``"dirichlet"`` (seeded) or an
    explicit vector. ``initial_rate`` fixes the extra Caputo initial condition
    ``p'(0)`` needed when ``order > 1``: ``"zero"`` or ``"classical"``.
    """

    kind: str = "classical"
    learning_rate: float = math.exp(-2)
    step: float = 0.01
    horizon: float = 100.0
    delay: float = 0.0
    order: float = 1.0
    initial_shares: str | Sequence[float] = "uniform"
    seed: int = 0
    tol_conv: float = 1e-6
    sustain: int = 100
    stop_at_convergence: bool = True
    memory_window: int | None = None
    initial_rate: str = "zero"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.step > 0:
            raise ValidationError("step must be positive")
        if not self.horizon >= self.step:
            raise ValidationError("horizon must be at least one step")
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be positive")
        if not self.delay >= 0:
            raise ValidationError("delay must be non-negative")
        if not 0 < self.order < 2:
            raise ValidationError(f"order beta must lie in (0, 2), got {self.order}")
        if self.sustain < 1:
            raise ValidationError("sustain must be >= 1")
        if self.memory_window is not None and self.memory_window < 1:
            raise ValidationError("memory_window must be >= 1")
        if self.initial_rate not in ("zero", "classical"):
            raise ValidationError("initial_rate must be 'zero' or 'classical'")
        if not isinstance(self.initial_shares, str):
            object.__setattr__(self, "initial_shares",
                               tuple(float(x) for x in self.initial_shares))

    @property
    def n_steps(self):
        return int(round(self.horizon / self.step))


def initial_state(cfg: DynamicsConfig, size, project=True):
    spec = cfg.initial_shares
    if isinstance(spec, str):
        if spec == "uniform":
            return np.full(size, 1.0 / size)
        if spec == "dirichlet":
            return np.random.default_rng(cfg.seed).dirichlet(np.ones(size))
        raise ValidationError(f"unknown initial_shares preset {spec!r}")
    p0 = np.array(spec, dtype=float)
    if p0.shape != (size,):
        raise ValidationError(f"initial_shares has length {p0.size}, expected {size}")
    if project:
        PopulationState(p0)
    return p0


@dataclass
class Trajectory:
    times: np.ndarray
    shares: np.ndarray  # (n, G)
    # (n, G); rates[0] is the field at p0, later rows the step increment / h taken
    # before projection, so a state pinned against the boundary is not mistaken
    # for a rest point
    rates: np.ndarray
    utilities: np.ndarray | None = None
    average_utilities: np.ndarray | None = None
    converged_at: float | None = None
    metadata: dict = dc_field(default_factory=dict)

    @property
    def states(self):
        return [PopulationState(p, float(t)) for t, p in zip(self.times, self.shares)]

    @property
    def final(self):
        return self.shares[-1]

    @property
    def residuals(self):
        return np.abs(self.rates).max(axis=1)

    def __len__(self):
        return len(self.times)


def project_simplex(q):
    """Clamp negatives and renormalize; returns ``(p, l1_change)``."""
    p = np.maximum(q, 0.0)
    s = p.sum()
    if not s > 0:
        raise BlowUpError("all shares became non-positive; reduce the step size")
    p = p / s
    return p, float(np.abs(p - q).sum())


class _Monitor:
    """Tracks the sustained-convergence criterion while integrating."""

    def __init__(self, tol, sustain):
        self.tol, self.sustain = tol, sustain
        self.run = 0
        self.start = None

    def update(self, n, residual):
        if residual < self.tol:
            if self.run == 0:
                self.start = n
            self.run += 1
        else:
            self.run = 0
            self.start = None
        return self.run >= self.sustain


def _check(q, project, t):
    if not np.all(np.isfinite(q)):
        raise BlowUpError(f"non-finite state at t={t:g}; reduce the step size")
    if project and np.any(np.abs(q) > BLOWUP_THRESHOLD):
        raise BlowUpError(f"share magnitude exceeded {BLOWUP_THRESHOLD} at t={t:g}; "
                          "reduce the step size")


def _finish(cfg, field, times, Y, rates, converged_at, meta):
    traj = Trajectory(times=times, shares=Y, rates=rates, converged_at=converged_at, metadata=meta)
    if isinstance(field, ReplicatorField):
        traj.utilities = np.array([field.utilities(p) for p in Y])
        traj.average_utilities = np.array([field.average_utility(p) for p in Y])
        meta["population"] = field.population
    meta.update(kind=cfg.kind, step=cfg.step, horizon=cfg.horizon, steps=len(times) - 1,
                learning_rate=cfg.learning_rate)
    return traj


def _euler(cfg: DynamicsConfig, field, lag, project):
    h, n = cfg.step, cfg.n_steps
    p0 = initial_state(cfg, _field_size(field, cfg), project)
    Y = np.empty((n + 1, p0.size))
    rates = np.empty_like(Y)
    Y[0] = p0
    rates[0] = field(p0)
    renorm = []
    mon = _Monitor(cfg.tol_conv, cfg.sustain)
    done = mon.update(0, np.abs(rates[0]).max())
    last = 0
    for i in range(n):
        if done and cfg.stop_at_convergence:
            break
        lagged = Y[i - lag] if i >= lag else Y[0]
        q = Y[i] + h * field(lagged)
        _check(q, project, (i + 1) * h)
        rates[i + 1] = (q - Y[i]) / h
        if project:
            q, r = project_simplex(q)
            renorm.append(r)
        Y[i + 1] = q
        last = i + 1
        done = mon.update(i + 1, np.abs(rates[i + 1]).max())
    Y, rates = Y[: last + 1], rates[: last + 1]
    times = h * np.arange(last + 1)
    meta = _renorm_meta(renorm)
    conv = times[mon.start] if done else None
    return times, Y, rates, conv, meta


def _renorm_meta(renorm):
    r = np.asarray(renorm, dtype=float)
    return {"renormalization_total": float(r.sum()) if r.size else 0.0,
            "renormalization_max": float(r.max()) if r.size else 0.0}


def _field_size(field, cfg):
    if isinstance(field, ReplicatorField):
        return field.size
    if isinstance(cfg.initial_shares, str):
        raise ValidationError("a generic field needs explicit initial_shares")
    return len(cfg.initial_shares)


def integrate_classical(cfg: DynamicsConfig, field: Callable, project=True):
    """Forward Euler with clamp-and-renormalize after every step."""
    times, Y, rates, conv, meta = _euler(cfg, field, 0, project)
    return _finish(cfg, field, times, Y, rates, conv, meta)


def integrate_delayed(cfg: DynamicsConfig, field: Callable, project=True):
    """Euler for ``p'(t) = F(p(t - delta))`` with constant pre-history ``p(0)``.

    The delay is rounded to a whole number of steps; the effective value is
    stored in ``metadata['effective_delay']``. A zero delay runs exactly the
    classical update.
    """
    lag = int(round(cfg.delay / cfg.step))
    times, Y, rates, conv, meta = _euler(cfg, field, lag, project)
    meta.update(delay=cfg.delay, effective_delay=lag * cfg.step, lag_steps=lag)
    return _finish(cfg, field, times, Y, rates, conv, meta)


class CaputoABM:
    """Fractional Adams-Bashforth-Moulton scheme for ``D^beta y = F(y)`` (Caputo).

    Solves the Volterra form

        y(t) = sum_{k<m} t^k y^(k)(0) / k! + 1/Gamma(beta) int_0^t (t-s)^(beta-1) F(y(s)) ds

    with product-rectangle predictor and product-trapezoid corrector weights.
    The full history ``y``/``f`` is stored and exposed so that callers can
    inspect (or perturb) the memory.
    """

    def __init__(self, field, y0, beta, step, n_steps, dy0=None, project=True,
                 memory_window=None):
        if not 0 < beta < 2:
            raise ValidationError(f"order beta must lie in (0, 2), got {beta}")
        self.field, self.beta, self.h = field, float(beta), float(step)
        self.project, self.window = project, memory_window
        y0 = np.asarray(y0, dtype=float)
        self.y = np.empty((n_steps + 1, y0.size))
        self.f = np.empty_like(self.y)
        self.y[0] = y0
        self.f[0] = field(y0)
        self.n = 0
        self.dy0 = np.zeros_like(y0) if dy0 is None else np.asarray(dy0, dtype=float)
        self.two_term = math.ceil(self.beta) == 2
        b, k = self.beta, np.arange(n_steps + 2, dtype=float)
        self._b = k[1:] ** b - k[:-1] ** b
        self._a = k[2:] ** (b + 1) + k[:-2] ** (b + 1) - 2.0 * k[1:-1] ** (b + 1)
        self._cb = self.h ** b / gamma(b + 1)
        self._ca = self.h ** b / gamma(b + 2)
        self.renorm = []
        self.raw = y0  # last unprojected iterate

    def base(self, n):
        t = n * self.h
        return self.y[0] + t * self.dy0 if self.two_term else self.y[0]

    def step(self):
        n, b = self.n, self.beta
        lo = 0 if self.window is None else max(0, n - self.window)
        base = self.base(n + 1)
        pred = base + self._cb * np.dot(self._b[n - lo::-1], self.f[lo:n + 1])
        if lo == 0:
            hist = (n ** (b + 1) - (n - b) * (n + 1) ** b) * self.f[0]
            if n >= 1:
                hist = hist + np.dot(self._a[n - 1::-1], self.f[1:n + 1])
        else:
            hist = np.dot(self._a[n - lo::-1], self.f[lo:n + 1])
        q = base + self._ca * (self.field(pred) + hist)
        _check(q, self.project, (n + 1) * self.h)
        self.raw = q
        if self.project:
            q, r = project_simplex(q)
            self.renorm.append(r)
        self.y[n + 1] = q
        self.f[n + 1] = self.field(q)
        self.n = n + 1
        return q


def integrate_fractional(cfg: DynamicsConfig, field: Callable, project=True):
    """Caputo-fractional replicator dynamics of order ``cfg.order``.

    Cost is quadratic in the number of steps unless ``cfg.memory_window``
    truncates the history.
    """
    p0 = initial_state(cfg, _field_size(field, cfg), project)
    n, h = cfg.n_steps, cfg.step
    dy0 = field(p0) if cfg.initial_rate == "classical" else None
    solver = CaputoABM(field, p0, cfg.order, h, n, dy0=dy0, project=project,
                       memory_window=cfg.memory_window)
    rates = np.empty_like(solver.y)
    rates[0] = solver.f[0]
    mon = _Monitor(cfg.tol_conv, cfg.sustain)
    done = mon.update(0, np.abs(rates[0]).max())
    while solver.n < n and not (done and cfg.stop_at_convergence):
        i = solver.n
        solver.step()
        rates[i + 1] = (solver.raw - solver.y[i]) / h
        done = mon.update(i + 1, np.abs(rates[i + 1]).max())
    last = solver.n
    times = h * np.arange(last + 1)
    meta = _renorm_meta(solver.renorm)
    meta.update(order=cfg.order, initial_rate=cfg.initial_rate, memory_window=cfg.memory_window)
    conv = times[mon.start] if done else None
    return _finish(cfg, field, times, solver.y[: last + 1].copy(), rates[: last + 1], conv, meta)


def integrate(cfg: DynamicsConfig, field: Callable, project=True):
    """Dispatch on ``cfg.kind``."""
    if cfg.kind == "classical":
        return integrate_classical(cfg, field, project)
    if cfg.kind == "delayed":
        return integrate_delayed(cfg, field, project)
    return integrate_fractional(cfg, field, project)


def _apply_rows(field, Y):
    return np.array([field(y) for y in Y])


def picard_solve(cfg: DynamicsConfig, field: Callable, sweeps=50, tol=1e-10, project=True):
    """Successive approximation ``p_{z+1}(t) = p0 + int_0^t F(p_z(s)) ds`` on the step grid.

    The integral uses the trapezoidal rule. ``metadata['residuals']`` holds
    the sweep-to-sweep max differences.

    Raises
    ------
    NonConvergenceError
        If the residual is still above ``tol`` after ``sweeps`` sweeps.
    """
    if sweeps < 1:
        raise ValidationError("sweeps must be >= 1")
    p0 = initial_state(cfg, _field_size(field, cfg), project)
    n, h = cfg.n_steps, cfg.step
    times = h * np.arange(n + 1)
    Y = np.tile(p0, (n + 1, 1))
    residuals = []
    for z in range(sweeps):
        F = _apply_rows(field, Y)
        nxt = p0 + cumulative_trapezoid(F, dx=h, axis=0, initial=0.0)
        res = float(np.abs(nxt - Y).max())
        residuals.append(res)
        Y = nxt
        if res < tol:
            break
    else:
        raise NonConvergenceError(
            f"Picard iteration did not converge in {sweeps} sweeps (residual {res:.3e})",
            residual=res, iterations=sweeps)
    F = _apply_rows(field, Y)
    meta = {"sweeps": len(residuals), "residuals": residuals}
    traj = Trajectory(times=times, shares=Y, rates=F, metadata=meta)
    if isinstance(field, ReplicatorField):
        traj.utilities = np.array([field.utilities(p) for p in Y])
        traj.average_utilities = np.array([field.average_utility(p) for p in Y])
        meta["population"] = field.population
    meta.update(kind="picard", step=h, horizon=cfg.horizon, steps=n)
    return traj


def mittag_leffler(beta, z, terms=60):
    """Truncated series ``E_beta(z) = sum_k z^k / Gamma(beta k + 1)``."""
    k = np.arange(terms)
    z = np.asarray(z, dtype=float)
    return np.sum(np.power.outer(z, k) * rgamma(beta * k + 1.0), axis=-1)
