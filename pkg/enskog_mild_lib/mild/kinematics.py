"""Relativistic two-body elastic collision geometry.

Momenta are dimensionless (mc = 1). Every function accepts a single momentum
(Momentum3 or a length-3 sequence) or stacked arrays of shape (..., 3) and
broadcasts over the leading axes.

Post-collision momenta use the momentum-conserving pair
    p' = p + q w,   p1' = p1 - q w
with q from the Glassey-Strauss parametrization.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike

from .errors import DegenerateCollisionError, DomainError, InputError, IssueCollector, IssueType

UNIT_TOL = 1e-12       # |w| = 1 tolerance
COS_CLAMP_TOL = 1e-12  # max excursion of cos(theta) outside [-1, 1]
DEGENERATE_G = 1e-9    # g at or below this is treated as p = p1


@dataclass(frozen=True)
class Momentum3:
    """Dimensionless 3-momentum with derived energy p0 = sqrt(1 + |p|^2)."""
    components: Tuple[float, float, float]

    @classmethod
    def of(cls, x: float, y: float, z: float) -> "Momentum3":
        return cls((float(x), float(y), float(z)))

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.components, dtype=float)

    @property
    def energy(self) -> float:
        return float(energy(self.vector))

    def __array__(self, dtype=None, copy=None):
        return np.array(self.components, dtype=dtype or float)


def _vec(v: ArrayLike) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.shape[-1:] != (3,):
        raise InputError(f"Expected 3-vectors, got array of shape {arr.shape}")
    return arr


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...i->...", a, b)


def _out(x):
    """Return Python floats for scalar results, arrays otherwise."""
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def _check_unit(omega: np.ndarray):
    norm = np.sqrt(_dot(omega, omega))
    bad = np.abs(norm - 1.0) > UNIT_TOL
    if np.any(bad):
        worst = float(np.max(np.abs(norm - 1.0)))
        raise InputError(f"omega must be a unit vector (|omega| - 1 = {worst:.3e})")


def energy(p: ArrayLike):
    """p0 = sqrt(1 + |p|^2)."""
    p = _vec(p)
    return _out(np.sqrt(1.0 + _dot(p, p)))


def relative_velocity(p: ArrayLike, p1: ArrayLike) -> np.ndarray:
    """p1/p10 - p/p0."""
    p, p1 = _vec(p), _vec(p1)
    return p1 / np.sqrt(1.0 + _dot(p1, p1))[..., None] - p / np.sqrt(1.0 + _dot(p, p))[..., None]


def _g_squared(p: np.ndarray, p1: np.ndarray, p0: np.ndarray, p10: np.ndarray) -> np.ndarray:
    # |p1 - p|^2 - (p10 - p0)^2 with p10 - p0 = (p1 - p).(p1 + p) / (p10 + p0)
    d = p1 - p
    de = _dot(d, p1 + p) / (p10 + p0)
    return np.maximum(_dot(d, d) - de * de, 0.0) / 4.0


def collision_invariants(p: ArrayLike, p1: ArrayLike):
    """Return (s, g, v_M) for the pre-collision pair.

    s = (p10 + p0)^2 - |p1 + p|^2, g = sqrt(|p1 - p|^2 - (p10 - p0)^2) / 2,
    v_M = g sqrt(s) / (p0 p10).
    """
    p, p1 = _vec(p), _vec(p1)
    p0 = np.sqrt(1.0 + _dot(p, p))
    p10 = np.sqrt(1.0 + _dot(p1, p1))
    total = p + p1
    s = (p0 + p10) ** 2 - _dot(total, total)
    g = np.sqrt(_g_squared(p, p1, p0, p10))
    v_m = g * np.sqrt(s) / (p0 * p10)
    return _out(s), _out(g), _out(v_m)


def in_S_plus(p: ArrayLike, p1: ArrayLike, omega: ArrayLike):
    """True iff w.(p1/p10 - p/p0) >= 0."""
    omega = _vec(omega)
    _check_unit(omega)
    flux = _dot(omega, relative_velocity(p, p1))
    result = flux >= 0.0
    return bool(result) if np.ndim(result) == 0 else result


def _transfer(p, p1, omega, p0, p10, check: bool):
    u = p1 / p10[..., None] - p / p0[..., None]
    flux = _dot(omega, u)
    if check and np.any(flux < -UNIT_TOL):
        raise DomainError(f"omega outside S+^2 (w.(p1/p10 - p/p0) = {float(np.min(flux)):.3e})")
    # boundary round-off
    flux = np.where((flux < 0.0) & (flux >= -UNIT_TOL), 0.0, flux)
    esum = p0 + p10
    along = _dot(omega, p + p1)
    return 2.0 * esum * p0 * p10 * flux / (esum * esum - along * along)


def post_collision(p: ArrayLike, p1: ArrayLike, omega: ArrayLike, check: bool = True):
    """Return (p', p1', q) for the elastic collision with impact direction w.

    Raises DomainError when w lies outside S+^2 (unless check=False, which the
    vectorized sweeps use after masking).
    """
    p, p1, omega = _vec(p), _vec(p1), _vec(omega)
    if check:
        _check_unit(omega)
    p0 = np.sqrt(1.0 + _dot(p, p))
    p10 = np.sqrt(1.0 + _dot(p1, p1))
    q = _transfer(p, p1, omega, p0, p10, check)
    shift = q[..., None] * omega
    return p + shift, p1 - shift, _out(q)


def omega_flux(p: ArrayLike, p1: ArrayLike, omega: ArrayLike):
    """8 (p0 + p10)^2 |w.(p1/p10 - p/p0)| / {(p0 + p10)^2 - [w.(p + p1)]^2}^2.

    Jacobian-type factor of the w-parametrized collision integral. It is
    not equal to g / sqrt(s) in general.
    """
    p, p1, omega = _vec(p), _vec(p1), _vec(omega)
    _check_unit(omega)
    p0 = np.sqrt(1.0 + _dot(p, p))
    p10 = np.sqrt(1.0 + _dot(p1, p1))
    esum2 = (p0 + p10) ** 2
    along = _dot(omega, p + p1)
    flux = np.abs(_dot(omega, relative_velocity(p, p1)))
    return _out(8.0 * esum2 * flux / (esum2 - along * along) ** 2)


def _cos_theta(p, p1, omega, q, p_prime):
    """Vectorized cos(theta), unclamped, with g > 0 assumed by the caller.

    cos(theta) = 1 - 2 N / (4 - s) where 4 - s = -4 g^2 and
    N = (p0 - p10)(p0 - p0') - (p - p1).(p - p').
    """
    p0 = np.sqrt(1.0 + _dot(p, p))
    p10 = np.sqrt(1.0 + _dot(p1, p1))
    p0_prime = np.sqrt(1.0 + _dot(p_prime, p_prime))
    d = p1 - p
    de = _dot(d, p1 + p) / (p10 + p0)
    # p0 - p0' = -(2 q p.w + q^2) / (p0 + p0')
    energy_drop = -(2.0 * q * _dot(p, omega) + q * q) / (p0 + p0_prime)
    numerator = -de * energy_drop - q * _dot(d, omega)
    g2 = np.maximum(_dot(d, d) - de * de, 0.0) / 4.0
    return 1.0 + numerator / (2.0 * g2)


def _clamp_cos(cos: np.ndarray, collector: Optional[IssueCollector] = None, stage: str = "kinematics") -> np.ndarray:
    """Clip cos(theta) into [-1, 1]; excursions beyond COS_CLAMP_TOL are errors.

    Clipped entries are reported to the collector as one CLAMPED_COSINE issue
    carrying the largest excursion.
    """
    excess = np.abs(cos) - 1.0
    if np.any(excess > COS_CLAMP_TOL):
        raise DomainError(f"cos(theta) outside [-1, 1] by {float(np.max(excess)):.3e}")
    _report_clamped(excess, collector, stage)
    return np.clip(cos, -1.0, 1.0)


def _report_clamped(excess: np.ndarray, collector: Optional[IssueCollector], stage: str):
    clamped = excess > 0.0
    if collector is None or not np.any(clamped):
        return
    count = int(np.count_nonzero(clamped))
    collector.add_issue(
        IssueType.CLAMPED_COSINE,
        stage,
        f"{count} cos(theta) values clipped into [-1, 1]",
        float(np.max(excess)),
        count=count,
    )


@dataclass(frozen=True)
class CollisionGeometry:
    """A pre-collision pair, an impact direction and all derived invariants."""
    p: Momentum3
    p1: Momentum3
    omega: Tuple[float, float, float]
    s: float
    g: float
    q: float
    v_M: float
    theta: float
    p_prime: Momentum3
    p1_prime: Momentum3

    @classmethod
    def from_pair(
        cls, p: ArrayLike, p1: ArrayLike, omega: ArrayLike, collector: Optional[IssueCollector] = None
    ) -> "CollisionGeometry":
        """Build the geometry; theta = 0 by convention when g = 0."""
        pv, p1v, w = _vec(p), _vec(p1), _vec(omega)
        s, g, v_m = collision_invariants(pv, p1v)
        p_prime, p1_prime, q = post_collision(pv, p1v, w)
        if g <= DEGENERATE_G:
            theta = 0.0
        else:
            theta = float(np.arccos(_clamp_cos(_cos_theta(pv, p1v, w, q, p_prime), collector, "geometry")))
        return cls(
            p=Momentum3(tuple(pv.tolist())),
            p1=Momentum3(tuple(p1v.tolist())),
            omega=tuple(w.tolist()),
            s=s,
            g=g,
            q=q,
            v_M=v_m,
            theta=theta,
            p_prime=Momentum3(tuple(p_prime.tolist())),
            p1_prime=Momentum3(tuple(p1_prime.tolist())),
        )


def scattering_angle(geom: CollisionGeometry, collector: Optional[IssueCollector] = None) -> float:
    """theta in [0, pi] from the pre- and post-collision momenta."""
    if geom.g <= DEGENERATE_G:
        raise DegenerateCollisionError(f"Scattering angle undefined for g = {geom.g:.3e} (p = p1)")
    cos = _cos_theta(
        geom.p.vector, geom.p1.vector, np.asarray(geom.omega), geom.q, geom.p_prime.vector
    )
    return float(np.arccos(_clamp_cos(np.asarray(cos), collector, "geometry")))


def sample_collisions(
    n: int, p_max: float, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw n random (p, p1, w) with |p|, |p1| <= p_max and w in S+^2.

    Momenta are uniform in the ball; w is uniform on the sphere and flipped
    when it falls outside S+^2.
    """
    def ball(count):
        direction = rng.standard_normal((count, 3))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radius = p_max * rng.random(count) ** (1.0 / 3.0)
        return direction * radius[:, None]

    p = ball(n)
    p1 = ball(n)
    omega = rng.standard_normal((n, 3))
    omega /= np.linalg.norm(omega, axis=1, keepdims=True)
    flip = _dot(omega, relative_velocity(p, p1)) < 0.0
    omega[flip] *= -1.0
    return p, p1, omega


def kinematics_selftest(
    n: int = 1_000_000,
    seed: int = 0,
    p_max: float = 10.0,
    chunk: int = 250_000,
    collector: Optional[IssueCollector] = None,
) -> Dict[str, float]:
    """Maximum deviations of the collision identities over a random sweep.

    cos_theta_excess is the largest |cos(theta)| - 1 seen on non-degenerate
    pairs before clipping; clipped values go to the collector.
    """
    rng = np.random.default_rng(seed)
    worst = {
        "momentum_conservation": 0.0,
        "energy_conservation": 0.0,
        "s_identity": 0.0,
        "v_moller_identity": 0.0,
        "v_moller_bound_excess": 0.0,
        "invariants_preserved": 0.0,
        "cos_theta_excess": 0.0,
        "q_min": np.inf,
    }
    excess_seen = []
    done = 0
    while done < n:
        count = min(chunk, n - done)
        p, p1, omega = sample_collisions(count, p_max, rng)
        p_prime, p1_prime, q = post_collision(p, p1, omega, check=False)
        p0, p10 = energy(p), energy(p1)
        s, g, v_m = collision_invariants(p, p1)
        s_post, g_post, _ = collision_invariants(p_prime, p1_prime)

        u = relative_velocity(p, p1)
        cross = np.cross(p, p1) / (p0 * p10)[:, None]
        v_identity = _dot(u, u) - _dot(cross, cross)

        updates = {
            "momentum_conservation": np.linalg.norm(p_prime + p1_prime - p - p1, axis=1).max(),
            "energy_conservation": np.abs(energy(p_prime) + energy(p1_prime) - p0 - p10).max(),
            "s_identity": np.abs(s - 4.0 - 4.0 * g * g).max(),
            "v_moller_identity": np.abs(v_m * v_m - v_identity).max(),
            "v_moller_bound_excess": np.maximum(v_m - np.linalg.norm(u, axis=1), 0.0).max(),
            "invariants_preserved": max(np.abs(s_post - s).max(), np.abs(g_post - g).max()),
        }
        for key, value in updates.items():
            worst[key] = max(worst[key], float(value))
        worst["q_min"] = min(worst["q_min"], float(np.min(q)))
        live = g > DEGENERATE_G
        cos = _cos_theta(p[live], p1[live], omega[live], q[live], p_prime[live])
        excess = np.abs(cos) - 1.0
        excess_seen.append(excess[excess > 0.0])
        worst["cos_theta_excess"] = max(worst["cos_theta_excess"], float(np.max(excess, initial=0.0)))
        done += count
    _report_clamped(np.concatenate(excess_seen), collector, "selftest")
    return worst
