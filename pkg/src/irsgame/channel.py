"""LoS-dominated THz channel synthesis for BS-user, BS-IRS and IRS-user links.

Arrays are uniform linear arrays with half-wavelength spacing whose broadside
is aligned with the x-axis, so the spatial direction toward a point offset by
``(dx, dy)`` at distance ``r`` is ``(d / lambda) * dy / r = 0.5 * dy / r``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .scenario import SPEED_OF_LIGHT, Scenario, Strategy

NLOS_ATTENUATION_DB = 20.0
ELEMENT_SPACING = 0.5  # in wavelengths


@dataclass(frozen=True)
class ChannelSet:
    """Channels seen by a user of one strategy.

    direct : (L,) BS-user channel ``h``.
    irs_user : (K,) IRS-user channel ``h^IU`` over the active elements.
    bs_irs : (K, L) BS-IRS channel ``G``.
    """

    direct: np.ndarray
    irs_user: np.ndarray
    bs_irs: np.ndarray
    strategy: Strategy | None = None

    def __post_init__(self):
        L, K = self.direct.shape[0], self.irs_user.shape[0]
        if self.direct.ndim != 1 or self.irs_user.ndim != 1 or self.bs_irs.shape != (K, L):
            raise DomainError(
                f"inconsistent channel dimensions: h {self.direct.shape}, "
                f"h_IU {self.irs_user.shape}, G {self.bs_irs.shape}")
        for arr in (self.direct, self.irs_user, self.bs_irs):
            if not np.all(np.isfinite(arr)):
                raise DomainError("channel contains non-finite entries")

    @property
    def antennas(self):
        return self.direct.shape[0]

    @property
    def elements(self):
        return self.irs_user.shape[0]


def steering_vector(n, phi):
    """Unit-norm ULA response ``exp(-j 2 pi phi (i - (n-1)/2)) / sqrt(n)``."""
    if n < 1:
        raise DomainError("steering vector needs at least one element")
    i = np.arange(n) - (n - 1) / 2.0
    return np.exp(-2j * np.pi * phi * i) / np.sqrt(n)


def spreading_loss(f, r):
    """Free-space amplitude factor ``c / (4 pi f r)``."""
    if not r > 0:
        raise DomainError(f"link distance must be positive, got r={r}")
    if not f > 0:
        raise DomainError(f"carrier frequency must be positive, got f={f}")
    return SPEED_OF_LIGHT / (4.0 * np.pi * f * r)


def absorption_loss(f, r, zeta):
    """Molecular absorption amplitude factor ``exp(-zeta r / 2)``.

    ``f`` is accepted for signature symmetry; the coefficient ``zeta`` is
    already frequency specific.
    """
    return float(np.exp(-0.5 * zeta * r))


def propagation_phase(f, r):
    """Unit phasor ``exp(-j 2 pi f r / c)``, reduced modulo one cycle first.

    The reduction keeps the phase accurate when ``f r / c`` is ~1e5 cycles.
    """
    cycles = np.mod(f * r / SPEED_OF_LIGHT, 1.0)
    return np.exp(-2j * np.pi * cycles)


def los_path_gain(f, r, zeta=0.0):
    return spreading_loss(f, r) * absorption_loss(f, r, zeta) * propagation_phase(f, r)


def link_geometry(src, dst):
    """Distance and spatial direction of ``dst`` seen from an array at ``src``."""
    dx, dy = dst[0] - src[0], dst[1] - src[1]
    r = float(np.hypot(dx, dy))
    if r == 0.0:
        raise DomainError(f"zero-length link between {tuple(src)} and {tuple(dst)}")
    return r, ELEMENT_SPACING * dy / r


def _nlos_terms(rng, n_paths, gain, n_rx, n_tx=None):
    """Sum of ``n_paths`` scattered components 20 dB below ``|gain|``."""
    scale = abs(gain) * 10.0 ** (-NLOS_ATTENUATION_DB / 20.0)
    shape = (n_rx,) if n_tx is None else (n_rx, n_tx)
    out = np.zeros(shape, dtype=complex)
    for _ in range(n_paths):
        g = scale * (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2.0)
        a_rx = steering_vector(n_rx, ELEMENT_SPACING * np.sin(rng.uniform(-np.pi / 2, np.pi / 2)))
        if n_tx is None:
            out += g * a_rx
        else:
            a_tx = steering_vector(n_tx, ELEMENT_SPACING * np.sin(rng.uniform(-np.pi / 2, np.pi / 2)))
            out += g * np.outer(a_rx, a_tx.conj())
    return out


def cascade_gains(scenario, r_bs_irs, r_irs_user):
    """Complex gains (kappa_BS-I, kappa_I-U) of the two reflected hops."""
    f, zeta = scenario.carrier_frequency, scenario.absorption_coefficient
    if scenario.cascade_model == "product":
        return los_path_gain(f, r_bs_irs, zeta), los_path_gain(f, r_irs_user, zeta)
    # specular: the unfolded path loss is carried by the first hop and the
    # second hop is a pure phase, so the product equals chi(r1 + r2)
    hop2 = propagation_phase(f, r_irs_user)
    hop1 = los_path_gain(f, r_bs_irs + r_irs_user, zeta) / hop2
    return hop1, hop2


def synthesize_channels(scenario: Scenario, strategy: Strategy, nlos_paths=0, seed=0):
    """Build the channel triple of ``strategy``; pure in (scenario, strategy, seed)."""
    if nlos_paths < 0:
        raise DomainError("nlos_paths must be >= 0")
    sp = scenario.provider_of(strategy)
    panel = scenario.panel_of(strategy)
    f, zeta = scenario.carrier_frequency, scenario.absorption_coefficient
    L, K = sp.antennas, strategy.active_elements
    user = scenario.user_position

    r0, phi0 = link_geometry(sp.bs_position, user)
    k0 = los_path_gain(f, r0, zeta)
    h = k0 * steering_vector(L, phi0)

    r1, phi_aod = link_geometry(sp.bs_position, panel.position)
    _, phi_aoa = link_geometry(panel.position, sp.bs_position)
    r2, phi_iu = link_geometry(panel.position, user)
    k1, k2 = cascade_gains(scenario, r1, r2)
    G = k1 * np.outer(steering_vector(K, phi_aoa), steering_vector(L, phi_aod).conj())
    h_iu = k2 * steering_vector(K, phi_iu)

    if nlos_paths:
        rng = np.random.default_rng(np.random.SeedSequence([seed, strategy.index]))
        h = h + _nlos_terms(rng, nlos_paths, k0, L)
        G = G + _nlos_terms(rng, nlos_paths, k1, K, L)
        h_iu = h_iu + _nlos_terms(rng, nlos_paths, k2, K)
    G = np.sqrt(L * K / (1 + nlos_paths)) * G

    if not scenario.irs_enabled:
        G = np.zeros_like(G)
        h_iu = np.zeros_like(h_iu)
    return ChannelSet(direct=h, irs_user=h_iu, bs_irs=G, strategy=strategy)
