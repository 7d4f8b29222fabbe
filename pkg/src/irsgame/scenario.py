"""Network configuration: providers, IRS panels, user population, physics.

A scenario file is a YAML tree with four sections (``providers``, ``irs``,
``user``, ``physics``). Powers are given in dBm and the noise density in
dBm/Hz; both are converted to SI units on load and everything downstream
works in W, W/Hz, Hz and metres.

Indices inside the package are 0-based. ``Strategy.label`` renders the
1-based ``(m, l, k, j)`` tuple used in tables and logs.
"""
from __future__ import annotations

import copy
import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .errors import ScenarioParseError, ValidationError

SPEED_OF_LIGHT = 3e8  # m/s
DEFAULT_NOISE_PSD_DBM_HZ = -174.0
CASCADE_MODELS = ("product", "specular")

_PROVIDER_KEYS = {
    "id", "bs_position", "antennas", "bandwidth", "power_levels",
    "price_per_element", "price_per_power", "unit_data_value",
}
_IRS_KEYS = {"owner_sp", "position", "modules", "elements_per_module"}
_USER_KEYS = {"position", "population"}
_PHYSICS_KEYS = {
    "carrier_frequency", "noise_psd", "absorption_coefficient",
    "cascade_model", "irs_enabled",
}


def dbm_to_watt(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class ServiceProvider:
    id: int
    bs_position: tuple[float, float]
    antennas: int
    bandwidth: float
    power_levels: tuple[float, ...]  # W, strictly increasing
    price_per_element: float
    price_per_power: float
    unit_data_value: float

    def __post_init__(self):
        where = f"provider {self.id}"
        if self.antennas < 1:
            raise ValidationError(f"{where}: antennas must be >= 1")
        for name in ("bandwidth", "price_per_element", "price_per_power", "unit_data_value"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{where}: {name} must be strictly positive")
        if not self.power_levels:
            raise ValidationError(f"{where}: power_levels must not be empty")
        if any(b <= a for a, b in zip(self.power_levels, self.power_levels[1:])):
            raise ValidationError(f"{where}: power_levels must be strictly increasing")


@dataclass(frozen=True)
class IrsPanel:
    owner_sp: int
    position: tuple[float, float]
    modules: int
    elements_per_module: int

    def __post_init__(self):
        if self.modules < 1 or self.elements_per_module < 1:
            raise ValidationError(
                f"IRS of provider {self.owner_sp}: modules and elements_per_module must be >= 1")

    @property
    def total_elements(self):
        return self.modules * self.elements_per_module


@dataclass(frozen=True)
class Strategy:
    """One (provider, IRS, module subset size, power level) service."""

    index: int
    sp: int
    irs: int  # position of the panel among this provider's panels
    panel: int  # position of the panel in ``Scenario.irs_panels``
    subset_size: int  # k, number of engaged modules
    power_index: int
    active_elements: int

    @property
    def label(self):
        return (self.sp + 1, self.irs + 1, self.subset_size, self.power_index + 1)

    def __str__(self):
        return "(%d,%d,%d,%d)" % self.label


@dataclass(frozen=True)
class Scenario:
    providers: tuple[ServiceProvider, ...]
    irs_panels: tuple[IrsPanel, ...]
    user_position: tuple[float, float]
    population: int
    carrier_frequency: float
    noise_psd: float  # W/Hz
    absorption_coefficient: float = 0.0
    cascade_model: str = "product"
    irs_enabled: bool = True
    strategies: tuple[Strategy, ...] = field(init=False, repr=False)

    def __post_init__(self):
        if not self.providers:
            raise ValidationError("providers: at least one service provider is required")
        ids = [sp.id for sp in self.providers]
        if len(set(ids)) != len(ids):
            raise ValidationError("providers: ids must be unique")
        for panel in self.irs_panels:
            if panel.owner_sp not in ids:
                raise ValidationError(
                    f"irs: owner_sp {panel.owner_sp} does not refer to an existing provider")
        if self.population < 1:
            raise ValidationError("user.population must be >= 1")
        if not self.carrier_frequency > 0:
            raise ValidationError("physics.carrier_frequency must be strictly positive")
        if not self.noise_psd > 0:
            raise ValidationError("physics.noise_psd must be strictly positive")
        if self.absorption_coefficient < 0:
            raise ValidationError("physics.absorption_coefficient must be >= 0")
        if self.cascade_model not in CASCADE_MODELS:
            raise ValidationError(
                f"physics.cascade_model must be one of {CASCADE_MODELS}, got {self.cascade_model!r}")
        object.__setattr__(self, "strategies", tuple(enumerate_strategies(self)))
        if not self.strategies:
            raise ValidationError("scenario has no strategies (no provider owns an IRS)")
        if self.population < len(self.strategies):
            raise ValidationError(
                f"user.population={self.population} is smaller than the number of "
                f"strategies G={len(self.strategies)}")

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def num_strategies(self):
        return len(self.strategies)

    def panels_of(self, sp_index):
        owner = self.providers[sp_index].id
        return [i for i, p in enumerate(self.irs_panels) if p.owner_sp == owner]

    def provider_of(self, strategy):
        return self.providers[strategy.sp]

    def panel_of(self, strategy):
        return self.irs_panels[strategy.panel]

    def strategies_of(self, sp_index):
        return [s.index for s in self.strategies if s.sp == sp_index]


def enumerate_strategies(scenario):
    """Canonical strategy list, ordered by provider, IRS, subset size, power level."""
    out = []
    order = sorted(range(len(scenario.providers)), key=lambda i: scenario.providers[i].id)
    for m in order:
        sp = scenario.providers[m]
        owned = [i for i, p in enumerate(scenario.irs_panels) if p.owner_sp == sp.id]
        for l, panel_index in enumerate(owned):
            panel = scenario.irs_panels[panel_index]
            for k in range(1, panel.modules + 1):
                for j in range(len(sp.power_levels)):
                    out.append(Strategy(
                        index=len(out), sp=m, irs=l, panel=panel_index, subset_size=k,
                        power_index=j, active_elements=k * panel.elements_per_module))
    return out


# -- file handling -------------------------------------------------------------

def _pair(value, where):
    try:
        x, y = value
        return (float(x), float(y))
    except (TypeError, ValueError):
        raise ValidationError(f"{where}: expected a 2D coordinate [x, y], got {value!r}") from None


def _number(section, key, where, cast=float, default=None):
    if key not in section:
        if default is not None:
            return default
        raise ValidationError(f"{where}: missing field {key!r}")
    value = section[key]
    if isinstance(value, bool):
        raise ValidationError(f"{where}.{key}: expected a number, got {value!r}")
    try:
        out = cast(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{where}.{key}: expected a number, got {value!r}") from None
    if cast is int and out != value:
        raise ValidationError(f"{where}.{key}: expected an integer, got {value!r}")
    return out


def _check_keys(section, allowed, where):
    if not isinstance(section, dict):
        raise ValidationError(f"{where}: expected a mapping")
    unknown = set(section) - allowed
    if unknown:
        raise ValidationError(f"{where}: unknown field(s) {sorted(unknown)}")


def scenario_from_dict(raw):
    """Build and validate a :class:`Scenario` from a parsed config tree."""
    if not isinstance(raw, dict):
        raise ValidationError("scenario root must be a mapping")
    unknown = set(raw) - {"providers", "irs", "user", "physics"}
    if unknown:
        raise ValidationError(f"unknown section(s) {sorted(unknown)}")
    providers_raw = raw.get("providers") or []
    if not isinstance(providers_raw, list) or not providers_raw:
        raise ValidationError("providers: at least one service provider is required")

    providers = []
    for i, sp in enumerate(providers_raw):
        where = f"providers[{i}]"
        _check_keys(sp, _PROVIDER_KEYS, where)
        levels = sp.get("power_levels")
        if not isinstance(levels, list) or not levels:
            raise ValidationError(f"{where}.power_levels: expected a non-empty list of dBm values")
        sp_id = _number(sp, "id", where, int)
        dbm = [float(x) for x in levels]
        if any(b <= a for a, b in zip(dbm, dbm[1:])):
            raise ValidationError(
                f"{where}.power_levels: provider {sp_id} power levels must be strictly increasing")
        providers.append(ServiceProvider(
            id=sp_id,
            bs_position=_pair(sp.get("bs_position"), f"{where}.bs_position"),
            antennas=_number(sp, "antennas", where, int),
            bandwidth=_number(sp, "bandwidth", where),
            power_levels=tuple(dbm_to_watt(x) for x in dbm),
            price_per_element=_number(sp, "price_per_element", where),
            price_per_power=_number(sp, "price_per_power", where),
            unit_data_value=_number(sp, "unit_data_value", where),
        ))

    panels = []
    irs_raw = raw.get("irs") or []
    if not isinstance(irs_raw, list):
        raise ValidationError("irs: expected a list")
    for i, panel in enumerate(irs_raw):
        where = f"irs[{i}]"
        _check_keys(panel, _IRS_KEYS, where)
        panels.append(IrsPanel(
            owner_sp=_number(panel, "owner_sp", where, int),
            position=_pair(panel.get("position"), f"{where}.position"),
            modules=_number(panel, "modules", where, int),
            elements_per_module=_number(panel, "elements_per_module", where, int),
        ))

    user = raw.get("user") or {}
    _check_keys(user, _USER_KEYS, "user")
    physics = raw.get("physics") or {}
    _check_keys(physics, _PHYSICS_KEYS, "physics")
    noise_dbm = _number(physics, "noise_psd", "physics", default=DEFAULT_NOISE_PSD_DBM_HZ)
    enabled = physics.get("irs_enabled", True)
    if not isinstance(enabled, bool):
        raise ValidationError("physics.irs_enabled must be true or false")

    return Scenario(
        providers=tuple(providers),
        irs_panels=tuple(panels),
        user_position=_pair(user.get("position"), "user.position"),
        population=_number(user, "population", "user", int),
        carrier_frequency=_number(physics, "carrier_frequency", "physics"),
        noise_psd=dbm_to_watt(noise_dbm),
        absorption_coefficient=_number(physics, "absorption_coefficient", "physics", default=0.0),
        cascade_model=str(physics.get("cascade_model", "product")),
        irs_enabled=enabled,
    )


def read_config(path):
    """Parse a scenario file into a plain dict (no validation)."""
    text = Path(path).read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioParseError(f"{path}: malformed scenario file: {exc}") from None
    if not isinstance(raw, dict):
        raise ScenarioParseError(f"{path}: scenario root must be a mapping")
    return raw


def load_scenario(path):
    """Load, validate and enumerate the strategies of a scenario file."""
    return scenario_from_dict(read_config(path))


def config_hash(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def builtin_scenario_path(name):
    """Path of a scenario shipped with the package (``table2``, ``two_sp``)."""
    path = Path(__file__).parent / "scenarios" / f"{name}.yaml"
    if not path.exists():
        raise ValidationError(f"no built-in scenario named {name!r}")
    return path


# -- overrides used by parameter sweeps ---------------------------------------

_TOKEN = re.compile(r"([A-Za-z_]\w*)|\[(\d+)\]")


def _parse_path(path):
    tokens = []
    for part in path.split("."):
        pos = 0
        for m in _TOKEN.finditer(part):
            if m.start() != pos:
                break
            tokens.append(m.group(1) if m.group(1) is not None else int(m.group(2)))
            pos = m.end()
        if pos != len(part) or not part:
            raise ValidationError(f"malformed parameter path {path!r}")
    return tokens


def with_override(raw, path, value):
    """Return a copy of ``raw`` with ``path`` (e.g. ``irs[2].elements_per_module``) replaced.

    A value of ``None`` on a list item deletes that item. The path must name
    an existing field so typos in sweep definitions fail loudly.
    """
    tokens = _parse_path(path)
    out = copy.deepcopy(raw)
    node: Any = out
    for tok in tokens[:-1]:
        try:
            node = node[tok]
        except (KeyError, IndexError, TypeError):
            raise ValidationError(f"parameter path {path!r} does not name a scenario field") from None
    last = tokens[-1]
    if isinstance(last, int):
        if not isinstance(node, list) or last >= len(node):
            raise ValidationError(f"parameter path {path!r} does not name a scenario field")
        if value is None:
            del node[last]
        else:
            node[last] = value
        return out
    if not isinstance(node, dict):
        raise ValidationError(f"parameter path {path!r} does not name a scenario field")
    section_keys = {
        "providers": _PROVIDER_KEYS, "irs": _IRS_KEYS,
        "user": _USER_KEYS, "physics": _PHYSICS_KEYS,
    }
    allowed = section_keys.get(tokens[0] if isinstance(tokens[0], str) else "", set())
    if last not in node and last not in allowed:
        raise ValidationError(f"parameter path {path!r} does not name a scenario field")
    node[last] = value
    return out
