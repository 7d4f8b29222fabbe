"""Phase-shift optimization by unit-modulus power iteration, and MRT beamforming.

The received amplitude for phases ``theta`` and beamformer ``w`` is
``c(theta)^H w`` with the combined channel

    c(theta) = h + G^H diag(h_IU) theta.

Maximizing ``||c||^2`` over unit-modulus ``theta`` is lifted to a quadratic
form ``v^H R v`` over ``v = [theta * t, t]`` with ``|t| = 1``, which the power
iteration ``v <- unt(R v)`` ascends.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet
from .errors import DomainError, NonConvergenceError


@dataclass(frozen=True)
class PhaseShiftConfig:
    phases: np.ndarray  # unit-modulus, length K
    iterations: int = 0
    objective_trace: tuple[float, ...] = field(default=(), repr=False)
    converged: bool = True

    @property
    def angles(self):
        return np.angle(self.phases)


@dataclass(frozen=True)
class Beamformer:
    w: np.ndarray
    power: float


def unit_projection(a):
    """Entry-wise ``a_i / |a_i|``; raises :class:`DomainError` on a zero entry."""
    a = np.asarray(a, dtype=complex)
    mag = np.abs(a)
    if np.any(mag == 0):
        raise DomainError("unit projection undefined for zero entries")
    return a / mag


def _safe_projection(a, fallback):
    # zero entries keep their previous phase (e.g. when the IRS sees no signal)
    mag = np.abs(a)
    out = fallback.copy()
    nz = mag > 0
    out[nz] = a[nz] / mag[nz]
    return out


def build_r_matrix(ch: ChannelSet):
    """Lifted Hermitian matrix ``[[F F^H, F h], [h^H F^H, 0]]`` with ``F = diag(h_IU^*) G``."""
    F = ch.irs_user.conj()[:, None] * ch.bs_irs
    Fh = F @ ch.direct
    K = ch.elements
    R = np.zeros((K + 1, K + 1), dtype=complex)
    R[:K, :K] = F @ F.conj().T
    R[:K, K] = Fh
    R[K, :K] = Fh.conj()
    return R


def optimize_phase_shifts(ch: ChannelSet, tol=1e-8, max_iter=10_000, accept_last=False):
    """Ascend ``v^H R v`` over unit-modulus ``v`` by power iteration.

    Parameters
    ----------
    ch : ChannelSet
    tol : float
        Relative stopping tolerance on the objective ``||R v||_1``: the loop
        stops once the change is at most ``tol * ||R v||_1``. Channel entries
        are ~1e-10, so an absolute threshold would be meaningless.
    max_iter : int
    accept_last : bool
        Return the last iterate instead of raising when ``max_iter`` is hit.

    Returns
    -------
    (PhaseShiftConfig, int)
        Phases ``theta`` with the lifting phase removed, and the iteration count.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    if max_iter < 1:
        raise DomainError("max_iter must be >= 1")
    R = build_r_matrix(ch)
    K = ch.elements
    v = np.ones(K + 1, dtype=complex)
    obj = float(np.abs(R @ v).sum())
    trace = [obj]
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        v = _safe_projection(R @ v, v)
        new = float(np.abs(R @ v).sum())
        trace.append(new)
        delta = abs(new - obj)
        obj = new
        if delta <= tol * max(obj, np.finfo(float).tiny):
            converged = True
            break
    if not converged and not accept_last:
        raise NonConvergenceError(
            f"phase-shift iteration did not converge in {max_iter} iterations",
            residual=delta, iterations=it)
    theta = v[:K] * np.conj(v[K])
    cfg = PhaseShiftConfig(phases=theta, iterations=it, objective_trace=tuple(trace),
                           converged=converged)
    return cfg, it


def combined_channel(ch: ChannelSet, theta: PhaseShiftConfig | np.ndarray):
    """Column form ``h + G^H diag(h_IU) theta`` of the effective MISO channel."""
    phases = theta.phases if isinstance(theta, PhaseShiftConfig) else np.asarray(theta)
    return ch.direct + ch.bs_irs.conj().T @ (ch.irs_user * phases)


def compute_beamformer(ch: ChannelSet, theta, power):
    """Matched-filter beamformer ``sqrt(J) c / ||c||`` with ``||w||^2 = J``."""
    if not power > 0:
        raise DomainError("transmit power must be positive")
    c = combined_channel(ch, theta)
    norm = np.linalg.norm(c)
    if norm == 0:
        raise DomainError("combined channel is zero; beamformer undefined")
    return Beamformer(w=np.sqrt(power) * c / norm, power=float(power))
