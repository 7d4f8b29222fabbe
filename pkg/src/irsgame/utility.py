"""SINR, expected rate and congestion-priced utility of each strategy.

A user in group ``g`` shares the group's rate and resource cost with the
``p_g N`` other members, so

    u_g = (v B log2(1 + eta) - gamma_I K - gamma_P J) / (p_g N).

The numerator (``StrategyEconomics.net_value``) does not depend on the
population state; dynamics work with it directly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, synthesize_channels
from .errors import DomainError, ValidationError
from .irs_optim import (Beamformer, PhaseShiftConfig, combined_channel, compute_beamformer,
                        optimize_phase_shifts)
from .scenario import Scenario, Strategy

SIMPLEX_ATOL = 1e-9


@dataclass(frozen=True)
class StrategyEconomics:
    strategy: Strategy | None
    sinr: float
    rate_numerator: float  # bit/s, B log2(1 + eta)
    element_cost: float
    power_cost: float
    value: float  # per bit/s
    subtract_power_cost: bool = False

    def __post_init__(self):
        for name in ("sinr", "rate_numerator", "element_cost", "power_cost", "value"):
            x = getattr(self, name)
            if not np.isfinite(x) or x < 0:
                raise DomainError(f"{name} must be finite and non-negative, got {x}")

    @property
    def cost(self):
        # alternative reading in which the power charge offsets the element charge
        if self.subtract_power_cost:
            return self.element_cost - self.power_cost
        return self.element_cost + self.power_cost

    @property
    def net_value(self):
        """Group-level surplus ``v * rate_numerator - cost``."""
        return self.value * self.rate_numerator - self.cost


@dataclass(frozen=True)
class PopulationState:
    shares: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.shares, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValidationError("shares must be a non-empty vector")
        if np.any(p < 0) or abs(p.sum() - 1.0) > SIMPLEX_ATOL:
            raise ValidationError(f"shares must lie on the simplex (sum={p.sum()!r})")
        object.__setattr__(self, "shares", p)


def sinr(ch: ChannelSet, theta, w: Beamformer | np.ndarray, bandwidth, noise_psd):
    """Interference-free SINR ``|c^H w|^2 / (B sigma0^2)``."""
    wv = w.w if isinstance(w, Beamformer) else np.asarray(w)
    signal = abs(np.vdot(combined_channel(ch, theta), wv)) ** 2
    return float(signal / (bandwidth * noise_psd))


def sinr_with_interference(ch: ChannelSet, theta, w, interferers, bandwidth, noise_psd):
    """SINR when the BS serves other users concurrently on the same band.

    ``interferers`` are the beamformers of the co-scheduled users. Their
    leakage through this user's effective channel adds coherently:
    ``|sum_n c^H w_n|^2``.
    """
    c = combined_channel(ch, theta)
    wv = w.w if isinstance(w, Beamformer) else np.asarray(w)
    signal = abs(np.vdot(c, wv)) ** 2
    leak = 0j
    for wn in interferers:
        leak += np.vdot(c, wn.w if isinstance(wn, Beamformer) else np.asarray(wn))
    return float(signal / (abs(leak) ** 2 + bandwidth * noise_psd))


def _check_share(p_g, population):
    if not p_g > 0:
        raise DomainError("expected rate undefined for an empty group (p_g = 0)")
    if population < 1:
        raise DomainError("population must be >= 1")


def expected_rate(econ: StrategyEconomics, p_g, population):
    _check_share(p_g, population)
    return econ.rate_numerator / (p_g * population)


def strategy_utility(econ: StrategyEconomics, p_g, population):
    _check_share(p_g, population)
    return econ.net_value / (p_g * population)


def utilities(net_values, shares, population):
    """Vector form of :func:`strategy_utility`; empty groups get ``inf``/``-inf``/0."""
    a = np.asarray(net_values, dtype=float)
    p = np.asarray(shares, dtype=float)
    empty = p == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = a / (p * population)
    u[empty] = np.where(a[empty] > 0, np.inf, np.where(a[empty] < 0, -np.inf, 0.0))
    return u


def average_utility(p, utilities_):
    """Population mean ``sum_g p_g u_g``; empty groups contribute nothing."""
    shares = p.shares if isinstance(p, PopulationState) else np.asarray(p, dtype=float)
    u = np.asarray(utilities_, dtype=float)
    mask = shares > 0
    return float(np.dot(shares[mask], u[mask]))


@dataclass(frozen=True)
class ServiceDesign:
    """Channels, optimized phases and beamformer of one strategy."""

    channels: ChannelSet
    phases: PhaseShiftConfig
    beamformer: Beamformer


def design_strategy(scenario: Scenario, strategy: Strategy, nlos_paths=0, seed=0):
    ch = synthesize_channels(scenario, strategy, nlos_paths=nlos_paths, seed=seed)
    theta, _ = optimize_phase_shifts(ch, accept_last=True)
    power = scenario.provider_of(strategy).power_levels[strategy.power_index]
    return ServiceDesign(ch, theta, compute_beamformer(ch, theta, power))


def evaluate_strategies(scenario: Scenario, nlos_paths=0, seed=0, subtract_power_cost=False,
                        interference=False):
    """Economics of every strategy in canonical order.

    With ``interference=True`` each strategy is charged the leakage from one
    representative user of every other strategy of the same provider.
    """
    designs = [design_strategy(scenario, s, nlos_paths, seed) for s in scenario.strategies]
    out = []
    for s, d in zip(scenario.strategies, designs):
        sp = scenario.provider_of(s)
        if interference:
            others = [designs[o].beamformer for o in scenario.strategies_of(s.sp) if o != s.index]
            eta = sinr_with_interference(d.channels, d.phases, d.beamformer, others,
                                         sp.bandwidth, scenario.noise_psd)
        else:
            eta = sinr(d.channels, d.phases, d.beamformer, sp.bandwidth, scenario.noise_psd)
        elements = s.active_elements if scenario.irs_enabled else 0
        out.append(StrategyEconomics(
            strategy=s,
            sinr=eta,
            rate_numerator=sp.bandwidth * np.log2(1.0 + eta),
            element_cost=sp.price_per_element * elements,
            power_cost=sp.price_per_power * sp.power_levels[s.power_index],
            value=sp.unit_data_value,
            subtract_power_cost=subtract_power_cost,
        ))
    return tuple(out)


def net_values(economics):
    return np.array([e.net_value for e in economics], dtype=float)
