"""
Run configuration: flat text files of `section.key=value` lines.

    # comments and blank lines are ignored
    family.name=poisson
    prior.d=8
    sampler.warmup=5000

Every key maps onto a field of one of the settings dataclasses below. Values `none` or
`auto` leave an optional field unset so its default is derived at run time.
"""
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Callable, Dict, List, Optional, Tuple

from exceptions import ConfigError
from families import Family, get_family
from sampler import PRIORS, SamplerConfig
from simulate import SimConfig
from ssibp_prior import HyperParams


@dataclass
class FamilySettings:
    name: str = "bernoulli"
    link: Optional[str] = None
    phi: Optional[float] = None
    power: Optional[float] = None
    series_terms: int = 128


@dataclass
class DataSettings:
    path: Optional[str] = None
    format: str = "edge-csv"
    intercept: bool = False
    n: Optional[int] = None


@dataclass
class SelectSettings:
    d_min: int = 1
    d_max: int = 8
    cv: bool = False
    folds: int = 5


@dataclass
class GofSettings:
    statistic: str = "transitivity"
    subsample: int = 200
    binary_degree: bool = False


@dataclass
class SimulateSettings:
    n: int = 100
    d0: int = 3
    family: Optional[str] = None
    link: Optional[str] = None
    c: Optional[float] = None
    phi: Optional[float] = None
    power: Optional[float] = None
    zero_inflation: float = 0.0
    replicates: int = 10
    fit_family: Optional[str] = None
    select: bool = False


def _bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got '{raw}'")


def _optional(convert: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse(raw: str):
        return None if raw.strip().lower() in ("none", "auto", "") else convert(raw)
    return parse


_CONVERTERS = {int: int, float: float, bool: _bool, str: str,
               Optional[int]: _optional(int), Optional[float]: _optional(float), Optional[str]: _optional(str)}

# config section -> RunConfig attribute
SECTIONS = {"family": "family", "prior": "hyper", "sampler": "sampler", "data": "data",
            "select": "select", "gof": "gof", "simulate": "simulate"}


@dataclass
class RunConfig:
    family: FamilySettings = field(default_factory=FamilySettings)
    hyper: HyperParams = field(default_factory=HyperParams)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    data: DataSettings = field(default_factory=DataSettings)
    select: SelectSettings = field(default_factory=SelectSettings)
    gof: GofSettings = field(default_factory=GofSettings)
    simulate: SimulateSettings = field(default_factory=SimulateSettings)
    prior: str = "ssibp"
    out_dir: str = "glnem_out"

    # -- parsing ------------------------------------------------------------

    def set(self, key: str, raw: str, where: str = "config") -> None:
        key = key.strip().lower()
        if key == "out.dir":
            self.out_dir = raw.strip()
            return
        if key == "prior.kind":
            self.prior = raw.strip().lower()
            return
        section, _, name = key.partition(".")
        if section not in SECTIONS or not name:
            raise ConfigError(f"{where}: unknown key '{key}'")
        target = getattr(self, SECTIONS[section])
        types = {f.name: f.type for f in fields(target)}
        if name not in types:
            raise ConfigError(f"{where}: unknown key '{key}'")
        convert = _CONVERTERS.get(types[name], str)
        try:
            setattr(target, name, convert(raw.strip()))
        except ValueError as e:
            raise ConfigError(f"{where}: bad value for '{key}': {e}") from e

    def update(self, pairs: Dict[str, Any], where: str = "override") -> "RunConfig":
        for key, value in pairs.items():
            if value is not None:
                self.set(key, str(value), where)
        return self

    @classmethod
    def from_text(cls, text: str, source: str = "config") -> "RunConfig":
        config = cls()
        for number, raw_line in enumerate(text.splitlines(), start=1):
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}: line {number}: expected key=value, got '{raw_line.strip()}'")
            key, value = line.split("=", 1)
            config.set(key, value, where=f"{source}: line {number}")
        return config

    @classmethod
    def from_file(cls, path: Optional[str]) -> "RunConfig":
        if not path:
            return cls()
        if not os.path.exists(path):
            raise ConfigError(f"{path}: no such config file")
        with open(path, "r", encoding="utf-8") as handle:
            return cls.from_text(handle.read(), source=path)

    # -- validation and construction ---------------------------------------

    def validate(self) -> "RunConfig":
        if self.prior not in PRIORS:
            raise ConfigError(f"prior.kind must be one of {', '.join(PRIORS)}, got '{self.prior}'")
        self.build_family()
        self.hyper.validate()
        self.sampler.validate()
        if self.select.d_min < 0 or self.select.d_max < self.select.d_min:
            raise ConfigError(f"select.d_min/d_max must satisfy 0 <= d_min <= d_max, "
                              f"got {self.select.d_min}/{self.select.d_max}")
        if self.select.cv and self.select.folds < 2:
            raise ConfigError(f"select.folds must be at least 2, got {self.select.folds}")
        return self

    def build_family(self) -> Family:
        return get_family(self.family.name, self.family.link, phi=self.family.phi, power=self.family.power,
                          series_terms=self.family.series_terms)

    def sim_config(self) -> SimConfig:
        sim = self.simulate
        return SimConfig(n=sim.n, d0=sim.d0, family=sim.family or self.family.name,
                         link=sim.link or (None if sim.family else self.family.link),
                         c=sim.c, phi=sim.phi, power=sim.power, zero_inflation=sim.zero_inflation,
                         seed=self.sampler.seed)

    def d_grid(self) -> List[int]:
        return list(range(self.select.d_min, self.select.d_max + 1))

    # -- serialisation -------------------------------------------------------

    def to_pairs(self) -> List[Tuple[str, Any]]:
        pairs: List[Tuple[str, Any]] = [("prior.kind", self.prior), ("out.dir", self.out_dir)]
        for section, attribute in SECTIONS.items():
            for name, value in asdict(getattr(self, attribute)).items():
                pairs.append((f"{section}.{name}", value))
        return pairs

    def to_text(self) -> str:
        return "\n".join(f"{key}={'none' if value is None else value}" for key, value in self.to_pairs()) + "\n"

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.to_pairs())
