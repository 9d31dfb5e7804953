from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from utils.errors import DomainError

ALPHA_MIN = 1e-3


@dataclass(frozen=True)
class FluxAlpha:
    """Flux parameter alpha in (0, 1) and the constants derived from it.

    Values inside (0, 1) but closer than ALPHA_MIN to an endpoint are clamped.
    """

    alpha: float

    def __post_init__(self):
        value = float(self.alpha)
        if not math.isfinite(value) or value <= 0.0 or value >= 1.0:
            raise DomainError(f"alpha must lie in (0,1), got {self.alpha}")
        clamped = min(max(value, ALPHA_MIN), 1.0 - ALPHA_MIN)
        if clamped != value:
            print(f"⚠ alpha={value} clamped to {clamped}")
        object.__setattr__(self, "alpha", clamped)

    @classmethod
    def of(cls, alpha: float | FluxAlpha) -> FluxAlpha:
        return alpha if isinstance(alpha, FluxAlpha) else cls(alpha)

    @property
    def nu_plus(self) -> float:
        return 1.0 - self.alpha

    @property
    def nu_minus(self) -> float:
        return self.alpha

    @property
    def c_alpha(self) -> float:
        return math.sin(math.pi * self.alpha) / (4.0 * math.pi ** 2)

    @property
    def sin_pi_alpha(self) -> float:
        return math.sin(math.pi * self.alpha)


@dataclass(frozen=True)
class SpectralParameter:
    """Point z off the half-line [0, inf) with kappa = principal sqrt(-z)."""

    z: complex

    def __post_init__(self):
        value = complex(self.z)
        if not (math.isfinite(value.real) and math.isfinite(value.imag)):
            raise DomainError(f"z must be finite, got {self.z}")
        if value.imag == 0.0 and value.real >= 0.0:
            raise DomainError(f"z must avoid [0, inf), got {self.z}")
        object.__setattr__(self, "z", value)

    @classmethod
    def of(cls, z) -> SpectralParameter:
        return z if isinstance(z, SpectralParameter) else cls(z)

    @property
    def kappa(self) -> complex:
        return complex(np.sqrt(-self.z))

    @property
    def is_real(self) -> bool:
        return self.z.imag == 0.0

    def power(self, beta: float) -> complex:
        """(-z)**beta on the principal branch."""
        return complex(np.exp(beta * np.log(-self.z)))


@dataclass(frozen=True)
class PolarPoint:
    r: float
    theta: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.r) or self.r < 0.0:
            raise DomainError(f"radius must be finite and >= 0, got {self.r}")
        if not (-math.pi < self.theta <= math.pi):
            raise DomainError(f"theta must lie in (-pi, pi], got {self.theta}")


class SpinChannel(Enum):
    PLUS = "plus"
    MINUS = "minus"

    @classmethod
    def of(cls, value) -> SpinChannel:
        if isinstance(value, SpinChannel):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"spin must be 'plus' or 'minus', got {value!r}") from None

    def nu(self, flux: FluxAlpha) -> float:
        return flux.nu_plus if self is SpinChannel.PLUS else flux.nu_minus

    @property
    def critical_m(self) -> int:
        # channel carrying the virtual bound state
        return -1 if self is SpinChannel.PLUS else 0

    @property
    def index(self) -> int:
        return 0 if self is SpinChannel.PLUS else 1


@dataclass(frozen=True)
class NoEigenvalue:
    reason: str

    def __bool__(self):
        return False
