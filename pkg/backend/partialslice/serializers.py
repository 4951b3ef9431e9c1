"""
Experiment Serializers

Pydantic models for the data that crosses the process boundary:
- DomainConfig / ExperimentConfig: the TOML experiment configuration
- ResultRow: one verification metric at one refinement level
"""

import math

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

SIGNIFICANT_DIGITS = 15


def round_significant(value: float) -> float:
    """Round to 15 significant digits, the precision written to CSV."""
    return float(f'{value:.{SIGNIFICANT_DIGITS - 1}e}')


class DomainConfig(BaseModel):
    """Mirrored-ball base domain: balls of radius rho centred at (center_p, +-r0)."""
    model_config = ConfigDict(extra='forbid', frozen=True)

    center_p: List[float] = Field(default_factory=lambda: [0.0, 0.0])
    r0: float = 2.0
    rho: float = Field(default=1.0, gt=0)

    @model_validator(mode='after')
    def validate_separation(self):
        """The balls must stay off R^(p+1)"""
        if not self.r0 > self.rho:
            raise ValueError(f"r0 > rho violated (r0={self.r0}, rho={self.rho})")
        return self


class ExperimentConfig(BaseModel):
    """Serializer for a verification experiment"""
    model_config = ConfigDict(extra='forbid', frozen=True)

    p: int = Field(default=1, ge=1)
    q: int = Field(default=2, ge=2)
    domain: DomainConfig = Field(default_factory=DomainConfig)
    levels: List[int] = Field(default_factory=lambda: [2, 3, 4, 5])
    fd_step: float = Field(default=1e-5, gt=0)
    pv_factor: float = Field(default=2.0, ge=2.0)
    seed: int = 42
    suites: List[str] = Field(default_factory=lambda: ['all'])

    @field_validator('levels')
    @classmethod
    def validate_levels(cls, levels):
        """Levels must be nonempty, ascending and at least 1"""
        if not levels:
            raise ValueError("levels must not be empty")
        if any(level < 1 for level in levels):
            raise ValueError("levels must be >= 1")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError("levels must be strictly ascending")
        return levels

    @model_validator(mode='after')
    def validate_dimensions(self):
        """center_p carries p+1 coordinates and R_{p+q} stays within the supported size"""
        if len(self.domain.center_p) != self.p + 1:
            raise ValueError(f"domain.center_p needs p+1 = {self.p + 1} coordinates")
        if self.p + self.q > 12:
            raise ValueError("p + q must not exceed 12")
        return self

    @property
    def finest_level(self) -> int:
        return self.levels[-1]

    def signature(self):
        from .services.clifford_core import AlgebraSignature
        return AlgebraSignature(self.p, self.q)

    def build_domain(self):
        from .services.domains_quadrature import MirroredBallDomain
        return MirroredBallDomain(tuple(self.domain.center_p), self.domain.r0, self.domain.rho)

    @classmethod
    def from_toml(cls, path: Union[str, Path]) -> 'ExperimentConfig':
        """
        Load and validate a TOML configuration file

        Raises:
            ServiceException: If the file cannot be read or parsed
            ValidationError: If a field is invalid
        """
        from .services.base_service import ServiceException
        try:
            with open(path, 'rb') as handle:
                data = tomllib.load(handle)
        except OSError as e:
            raise ServiceException(message=f"Cannot read config {path}: {e}", code='invalid_config') from e
        except tomllib.TOMLDecodeError as e:
            raise ServiceException(message=f"Malformed TOML in {path}: {e}", code='invalid_config') from e
        return cls.model_validate(data)


def describe_validation_error(error: ValidationError) -> str:
    """One 'field.path: message' line per problem."""
    lines = []
    for item in error.errors():
        location = '.'.join(str(part) for part in item['loc']) or '<config>'
        lines.append(f"{location}: {item['msg']}")
    return '\n'.join(lines)


class ResultRow(BaseModel):
    """One metric of one suite case at one level"""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    suite: str
    case: str
    level: int = Field(ge=0)
    metric: str
    value: float
    tolerance: float
    passed: bool = Field(alias='pass')

    @field_validator('value')
    @classmethod
    def validate_value(cls, value):
        if not math.isfinite(value):
            raise ValueError("value must be finite")
        return round_significant(value)

    @field_validator('tolerance')
    @classmethod
    def validate_tolerance(cls, tolerance):
        if math.isnan(tolerance):
            raise ValueError("tolerance must not be NaN")
        return tolerance if math.isinf(tolerance) else round_significant(tolerance)

    @classmethod
    def residual(cls, suite: str, case: str, level: int, metric: str, value: float, tolerance: float) -> 'ResultRow':
        """Row that passes when value <= tolerance"""
        value = float(value)
        return cls(suite=suite, case=case, level=level, metric=metric, value=value,
                   tolerance=tolerance, passed=round_significant(value) <= tolerance)

    @classmethod
    def at_least(cls, suite: str, case: str, level: int, metric: str, value: float, tolerance: float) -> 'ResultRow':
        """Row that passes when value >= tolerance (orders, negative controls)"""
        value = float(value)
        return cls(suite=suite, case=case, level=level, metric=metric, value=value,
                   tolerance=tolerance, passed=round_significant(value) >= tolerance)

    @classmethod
    def reported(cls, suite: str, case: str, level: int, metric: str, value: float) -> 'ResultRow':
        """Row without a claim: infinite tolerance"""
        return cls.residual(suite, case, level, metric, value, math.inf)


def default_config(overrides: Optional[dict] = None) -> ExperimentConfig:
    return ExperimentConfig.model_validate(overrides or {})
