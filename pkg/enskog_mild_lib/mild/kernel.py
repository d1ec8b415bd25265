"""Collision kernel, weight function and the geometric factor Y.

The example pair is
    m(x, p)     = (1 + |x cross p|)^(-(1 + delta)/2) exp(-p0)
    sigma       = |w.(p1 cross p)| sigma~(w) / [p10 g (1 + g^2)^(delta + 1/2)]
    B(g, theta) = g sqrt(s) sigma / 2
"""

from enum import Enum

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field

from .errors import InputError
from .kinematics import _dot, _out, _vec, collision_invariants


class SigmaTildeKind(str, Enum):
    """Angular factor families."""
    CONSTANT = "constant"  # sigma~ = value
    POLAR = "polar"        # sigma~ = value |w_3|


class KernelSpec(BaseModel):
    """Exponent delta, angular factor sigma~ and the reporting constant c0."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    delta: float = Field(0.5, gt=0.0, lt=1.0)
    sigma_kind: SigmaTildeKind = SigmaTildeKind.CONSTANT
    sigma_value: float = Field(1.0, ge=0.0)
    c0: float = Field(1.0, gt=0.0)

    def sigma_tilde(self, omega: ArrayLike):
        omega = _vec(omega)
        if self.sigma_kind == SigmaTildeKind.POLAR:
            return _out(self.sigma_value * np.abs(omega[..., 2]))
        return _out(np.full(omega.shape[:-1], self.sigma_value))

    def sigma_tilde_sup(self, n: int = 10_000, seed: int = 0) -> float:
        """Sup of sigma~ over a random sphere sample."""
        rng = np.random.default_rng(seed)
        omega = rng.standard_normal((n, 3))
        omega /= np.linalg.norm(omega, axis=1, keepdims=True)
        return float(np.max(self.sigma_tilde(omega)))


class YKind(str, Enum):
    CONSTANT = "constant"
    LINEAR = "linear"


class YFactorSpec(BaseModel):
    """Geometric factor Y(rho): constant y0, or 1 + b rho."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: YKind = YKind.LINEAR
    y0: float = Field(1.0, gt=0.0)
    b: float = Field(0.3, ge=0.0)

    @property
    def at_zero(self) -> float:
        return self.y0 if self.kind == YKind.CONSTANT else 1.0

    @property
    def slope(self) -> float:
        """Lipschitz constant of Y in rho."""
        return 0.0 if self.kind == YKind.CONSTANT else self.b


def weight_m(x: ArrayLike, p: ArrayLike, spec: KernelSpec):
    """m(x, p) = (1 + |x cross p|)^(-(1 + delta)/2) exp(-p0), in (0, 1/e]."""
    x, p = _vec(x), _vec(p)
    cross = np.linalg.norm(np.cross(x, p), axis=-1)
    p0 = np.sqrt(1.0 + _dot(p, p))
    return _out((1.0 + cross) ** (-(1.0 + spec.delta) / 2.0) * np.exp(-p0))


def _triple(p: np.ndarray, p1: np.ndarray, omega: np.ndarray) -> np.ndarray:
    return np.abs(_dot(omega, np.cross(p1, p)))


def cross_section(p: ArrayLike, p1: ArrayLike, omega: ArrayLike, spec: KernelSpec):
    """sigma(p, p1, w); 0 by convention at g = 0."""
    p, p1, omega = _vec(p), _vec(p1), _vec(omega)
    _, g, _ = collision_invariants(p, p1)
    g = np.asarray(g)
    p10 = np.sqrt(1.0 + _dot(p1, p1))
    numerator = _triple(p, p1, omega) * spec.sigma_tilde(omega)
    denominator = p10 * g * (1.0 + g * g) ** (spec.delta + 0.5)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma = np.where(g > 0.0, numerator / np.where(g > 0.0, denominator, 1.0), 0.0)
    return _out(sigma)


def kernel_B(p: ArrayLike, p1: ArrayLike, omega: ArrayLike, spec: KernelSpec):
    """B = g sqrt(s) sigma / 2 with the g factors cancelled."""
    p, p1, omega = _vec(p), _vec(p1), _vec(omega)
    s, g, _ = collision_invariants(p, p1)
    s, g = np.asarray(s), np.asarray(g)
    p10 = np.sqrt(1.0 + _dot(p1, p1))
    value = (
        np.sqrt(s) * _triple(p, p1, omega) * spec.sigma_tilde(omega)
        / (2.0 * p10 * (1.0 + g * g) ** (spec.delta + 0.5))
    )
    return _out(value)


def Y_factor(rho: ArrayLike, spec: YFactorSpec):
    """Geometric factor at density rho >= 0."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0.0):
        raise InputError(f"Density must be nonnegative, got min rho = {float(np.min(rho)):.3e}")
    if spec.kind == YKind.CONSTANT:
        return _out(np.full(rho.shape, spec.y0))
    return _out(1.0 + spec.b * rho)
