"""Isotropic elastic materials and the high-contrast inclusion scaling.

Units are left to the caller; every formula here is homogeneous, so any
consistent system works.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .errors import ConfigError, ConvexityViolation, NonPositiveDensity


class ContrastWarning(UserWarning):
    """Parameters fall outside the asymptotic regime the model assumes."""


@dataclass(frozen=True)
class Material:
    """Lamé parameters ``lambda_``, ``mu`` and mass density ``rho``.

    Build instances through :func:`validate_material` when the inputs come
    from outside; the constructor itself also validates.
    """

    lambda_: float
    mu: float
    rho: float

    def __post_init__(self):
        _check(self.lambda_, self.mu, self.rho)

    @property
    def c_s(self) -> float:
        """Shear wave speed."""
        return math.sqrt(self.mu / self.rho)

    @property
    def c_p(self) -> float:
        """Compressional wave speed."""
        return math.sqrt((self.lambda_ + 2.0 * self.mu) / self.rho)

    @property
    def alpha1(self) -> float:
        return 1.0 / self.mu + 1.0 / (self.lambda_ + 2.0 * self.mu)

    @property
    def alpha2(self) -> float:
        return 1.0 / self.mu - 1.0 / (self.lambda_ + 2.0 * self.mu)

    def wavenumbers(self, omega: float) -> tuple[float, float]:
        return wavenumbers(self, omega)

    def as_dict(self) -> dict:
        return {"lambda": self.lambda_, "mu": self.mu, "rho": self.rho}


def _check(lambda_, mu, rho):
    for name, v in (("lambda", lambda_), ("mu", mu), ("rho", rho)):
        if not math.isfinite(v):
            raise ConfigError(f"{name} must be finite, got {v!r}")
    if mu <= 0 or 3.0 * lambda_ + 2.0 * mu <= 0:
        raise ConvexityViolation(
            f"strong convexity requires mu > 0 and 3*lambda + 2*mu > 0 "
            f"(lambda={lambda_}, mu={mu})"
        )
    if rho <= 0:
        raise NonPositiveDensity(f"density must be positive, got {rho}")


def validate_material(lambda_: float, mu: float, rho: float) -> Material:
    return Material(float(lambda_), float(mu), float(rho))


def wavenumbers(m: Material, omega: float) -> tuple[float, float]:
    """Return ``(k_p, k_s)`` at angular frequency ``omega``."""
    if omega < 0:
        raise ConfigError(f"omega must be non-negative, got {omega}")
    k_s = omega * math.sqrt(m.rho / m.mu)
    k_p = omega * math.sqrt(m.rho / (m.lambda_ + 2.0 * m.mu))
    return k_p, k_s


@dataclass(frozen=True)
class ContrastConfig:
    """Lamé contrast ``delta`` and density contrast ``epsilon``.

    The inclusion has moduli ``lambda/delta``, ``mu/delta`` and density
    ``rho/epsilon``.  A speed contrast ``tau = sqrt(delta/epsilon)`` above one
    triggers a :class:`ContrastWarning` but is allowed.
    """

    delta: float
    epsilon: float

    def __post_init__(self):
        for name, v in (("delta", self.delta), ("epsilon", self.epsilon)):
            if not (math.isfinite(v) and 0 < v <= 1):
                raise ConfigError(f"{name} must lie in (0, 1], got {v!r}")
        if self.tau > 1.0:
            warnings.warn(
                f"speed contrast tau={self.tau:.4g} exceeds 1; the inclusion is "
                "expected to be the faster medium",
                ContrastWarning,
                stacklevel=3,
            )

    @property
    def tau(self) -> float:
        return math.sqrt(self.delta / self.epsilon)

    def assumption_flags(self) -> list[str]:
        out = []
        if self.tau > 1.0:
            out.append(f"tau={self.tau:.6g} > 1: inclusion slower than background")
        return out


def inclusion_material(background: Material, c: ContrastConfig) -> Material:
    return Material(
        background.lambda_ / c.delta,
        background.mu / c.delta,
        background.rho / c.epsilon,
    )
