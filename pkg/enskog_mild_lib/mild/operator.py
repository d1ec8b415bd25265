"""Enskog gain and loss operators in # form.

For a slice f# at time t and a query (x, p):

    Q+#(t,x,p) = (A/p0) sum_p1 (w/p10) sum_{w in S+} w_w F+ f#(t, x + tp/p0 - tp'/p0', p')
                                                           f#(t, x + d w + tp/p0 - tp1'/p10', p1') B
    Q-#(t,x,p) = (A/p0) sum_p1 (w/p10) sum_{w in S+} w_w F- f#(t,x,p) f#(t, x - d w + tp/p0 - tp1/p10, p1) B

with A = a^2 (enskog) or lambda (boltzmann), d the shift diameter and F+-
the geometric factor Y(rho) at the physical contact points x + tp/p0 +- d w / 2.

The collision geometry (S+ mask, post-collision momenta, B) depends only on
(p, p1, w); it is tabulated once per momentum and reused for every spatial
query.
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field

from .errors import InputError, IssueCollector, IssueType
from .kernel import KernelSpec, YFactorSpec, YKind, Y_factor, kernel_B
from .kinematics import _dot, _out, _vec, post_collision, relative_velocity
from .lattice import FieldLattice, GridSpec, QuadratureRule, lattice_nodes, momentum_rule, sphere_rule

# interpolation points evaluated per batch
CHUNK_POINTS = 1 << 18


class OperatorMode(str, Enum):
    ENSKOG = "enskog"
    BOLTZMANN = "boltzmann"


class OperatorConfig(BaseModel):
    """Hard-sphere diameter, mode switch and kernel choices."""
    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    a: float = Field(0.1, ge=0.0)
    mode: OperatorMode = OperatorMode.ENSKOG
    lambda_: float = Field(1.0, gt=0.0, alias="lambda")
    kernel: KernelSpec = Field(default_factory=KernelSpec)
    y: YFactorSpec = Field(default_factory=YFactorSpec)
    # diameter in the aw shifts; None means a (enskog) or 0 (boltzmann)
    shift_diameter: Optional[float] = Field(None, ge=0.0)

    @property
    def shift(self) -> float:
        if self.shift_diameter is not None:
            return self.shift_diameter
        return self.a if self.mode == OperatorMode.ENSKOG else 0.0

    @property
    def prefactor(self) -> float:
        return self.a * self.a if self.mode == OperatorMode.ENSKOG else self.lambda_

    @property
    def needs_density(self) -> bool:
        return self.mode == OperatorMode.ENSKOG and self.y.kind == YKind.LINEAR


@lru_cache(maxsize=16)
def _rules(grid: GridSpec) -> Tuple[QuadratureRule, QuadratureRule]:
    return momentum_rule(grid), sphere_rule(grid.n_omega)


def _batched(n_points: int, per_point: int):
    step = max(1, CHUNK_POINTS // max(per_point, 1))
    for start in range(0, n_points, step):
        yield slice(start, min(start + step, n_points))


def _density_points(field: FieldLattice, t: float, points: np.ndarray) -> np.ndarray:
    rule, _ = _rules(field.spec)
    velocity = rule.nodes / np.sqrt(1.0 + _dot(rule.nodes, rule.nodes))[:, None]
    rho = np.empty(len(points))
    for sl in _batched(len(points), len(rule.nodes)):
        queries = points[sl, None, :] - t * velocity[None, :, :]
        values = field.interpolate(queries, np.broadcast_to(rule.nodes, queries.shape))
        rho[sl] = values @ rule.weights
    return rho


def density(slice: FieldLattice, t: float, x: ArrayLike):
    """rho(t, x) = int f(t, x, p) d^3p, recovering f from f# by the inverse shift."""
    x = _vec(x)
    flat = x.reshape(-1, 3)
    return _out(_density_points(slice, float(t), flat).reshape(x.shape[:-1]))


@dataclass
class _DensityFloor:
    """Running tally of contact densities floored at zero."""
    count: int = 0
    minimum: float = 0.0

    def observe(self, rho: np.ndarray) -> None:
        negative = rho < 0.0
        if np.any(negative):
            self.count += int(negative.sum())
            self.minimum = min(self.minimum, float(rho.min()))

    def report(self, collector: Optional[IssueCollector], t: float) -> None:
        if collector is not None and self.count:
            collector.add_issue(
                IssueType.NEGATIVE_DENSITY,
                "operator",
                f"{self.count} contact densities below zero floored before Y",
                self.minimum,
                t=t,
            )


def _contact_factors(
    field: FieldLattice,
    t: float,
    xs: np.ndarray,
    omegas: np.ndarray,
    cfg: OperatorConfig,
    sign: float,
    floor: Optional[_DensityFloor] = None,
) -> np.ndarray:
    """F+ (sign=+1) or F- (sign=-1) on the (len(xs), len(omegas)) product.

    `xs` are physical positions; callers working in # coordinates pass x + tp/p0.
    """
    shape = (len(xs), len(omegas))
    if cfg.mode == OperatorMode.BOLTZMANN:
        return np.ones(shape)
    if not cfg.needs_density:
        return np.full(shape, cfg.y.y0)
    contacts = xs[:, None, :] + sign * 0.5 * cfg.shift * omegas[None, :, :]
    rho = _density_points(field, t, contacts.reshape(-1, 3)).reshape(shape)
    if floor is not None:
        floor.observe(rho)
    return Y_factor(np.maximum(rho, 0.0), cfg.y)


def F_plus(slice: FieldLattice, t: float, x: ArrayLike, omega: ArrayLike, cfg: OperatorConfig):
    """Y(rho(t, x + d w / 2)); 1 in boltzmann mode."""
    x, omega = np.broadcast_arrays(_vec(x), _vec(omega))
    return _contact_point_factor(slice, t, x, omega, cfg, 1.0)


def F_minus(slice: FieldLattice, t: float, x: ArrayLike, omega: ArrayLike, cfg: OperatorConfig):
    """Y(rho(t, x - d w / 2)); 1 in boltzmann mode."""
    x, omega = np.broadcast_arrays(_vec(x), _vec(omega))
    return _contact_point_factor(slice, t, x, omega, cfg, -1.0)


def _contact_point_factor(field, t, x, omega, cfg, sign):
    lead = x.shape[:-1]
    if cfg.mode == OperatorMode.BOLTZMANN:
        return _out(np.ones(lead))
    if not cfg.needs_density:
        return _out(np.full(lead, cfg.y.y0))
    contacts = (x + sign * 0.5 * cfg.shift * omega).reshape(-1, 3)
    rho = _density_points(field, float(t), contacts)
    return _out(Y_factor(np.maximum(rho, 0.0), cfg.y).reshape(lead))


@dataclass(frozen=True)
class CollisionTable:
    """Admissible (p1, w) pairs for one momentum p with their quadrature weights.

    `weight` folds w_p1 w_w B / p10; pairs with zero weight are dropped.
    """
    p: np.ndarray
    p0: float
    p1: np.ndarray
    p_prime: np.ndarray
    p1_prime: np.ndarray
    omega: np.ndarray
    omega_index: np.ndarray
    weight: np.ndarray

    def __len__(self) -> int:
        return len(self.weight)

    @property
    def velocity(self) -> np.ndarray:
        return self.p / self.p0


def collision_table(p: ArrayLike, grid: GridSpec, kernel: KernelSpec) -> CollisionTable:
    p = _vec(p)
    rule_p, rule_w = _rules(grid)
    n_p1, n_w = len(rule_p.nodes), len(rule_w.nodes)
    P1 = np.repeat(rule_p.nodes, n_w, axis=0)
    W = np.tile(rule_w.nodes, (n_p1, 1))
    P = np.broadcast_to(p, P1.shape)
    admissible = _dot(W, relative_velocity(P, P1)) >= 0.0

    p10 = np.sqrt(1.0 + _dot(P1, P1))
    B = np.where(admissible, kernel_B(P, P1, W, kernel), 0.0)
    weight = np.repeat(rule_p.weights, n_w) * np.tile(rule_w.weights, n_p1) * B / p10
    keep = weight > 0.0

    P, P1, W = P[keep], P1[keep], W[keep]
    p_prime, p1_prime, _ = post_collision(P, P1, W, check=False)
    return CollisionTable(
        p=p,
        p0=float(np.sqrt(1.0 + p @ p)),
        p1=P1,
        p_prime=p_prime,
        p1_prime=p1_prime,
        omega=W,
        omega_index=np.tile(np.arange(n_w), n_p1)[keep],
        weight=weight[keep],
    )


def _speed(p: np.ndarray) -> np.ndarray:
    return p / np.sqrt(1.0 + _dot(p, p))[..., None]


def _parts_for_momentum(
    field: FieldLattice,
    t: float,
    xs: np.ndarray,
    table: CollisionTable,
    cfg: OperatorConfig,
    floor: Optional[_DensityFloor] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Gain and loss rate (loss without the f#(t,x,p) factor) for one p and many # positions x.

    F+- read the density at the physical contact points x + tp/p0 +- d w / 2.
    """
    gain = np.zeros(len(xs))
    loss_rate = np.zeros(len(xs))
    if len(table) == 0:
        return gain, loss_rate

    v = table.velocity
    _, rule_w = _rules(field.spec)
    physical = xs + t * v
    f_plus = _contact_factors(field, t, physical, rule_w.nodes, cfg, 1.0, floor)
    f_minus = _contact_factors(field, t, physical, rule_w.nodes, cfg, -1.0, floor)
    d = cfg.shift
    gain_offset = t * (v - _speed(table.p_prime))
    partner_offset = d * table.omega + t * (v - _speed(table.p1_prime))
    loss_offset = -d * table.omega + t * (v - _speed(table.p1))

    for sl in _batched(len(table), 3 * len(xs)):
        w = table.weight[sl]
        oi = table.omega_index[sl]
        base = xs[:, None, :]
        first = field.interpolate(
            base + gain_offset[None, sl], np.broadcast_to(table.p_prime[sl], (len(xs), len(w), 3))
        )
        second = field.interpolate(
            base + partner_offset[None, sl], np.broadcast_to(table.p1_prime[sl], (len(xs), len(w), 3))
        )
        gain += np.sum(f_plus[:, oi] * first * second * w, axis=1)
        partner = field.interpolate(base + loss_offset[None, sl], np.broadcast_to(table.p1[sl], (len(xs), len(w), 3)))
        loss_rate += np.sum(f_minus[:, oi] * partner * w, axis=1)

    scale = cfg.prefactor / table.p0
    return scale * gain, scale * loss_rate


def _evaluate(
    slice: FieldLattice, t: float, x: ArrayLike, p: ArrayLike, cfg: OperatorConfig
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gain, loss rate and f#(t,x,p) at paired query points."""
    x, p = np.broadcast_arrays(_vec(x), _vec(p))
    lead = x.shape[:-1]
    xs, ps = x.reshape(-1, 3), p.reshape(-1, 3)
    gain = np.zeros(len(xs))
    loss_rate = np.zeros(len(xs))
    tables = {}
    for i, (xi, pi) in enumerate(zip(xs, ps)):
        key = tuple(pi)
        if key not in tables:
            tables[key] = collision_table(pi, slice.spec, cfg.kernel)
        g, l = _parts_for_momentum(slice, t, xi[None], tables[key], cfg)
        gain[i], loss_rate[i] = g[0], l[0]
    own = np.asarray(slice.interpolate(xs, ps)).reshape(-1)
    return gain.reshape(lead), loss_rate.reshape(lead), own.reshape(lead)


def probe_series(
    field: FieldLattice, times: ArrayLike, x: ArrayLike, p: ArrayLike, cfg: OperatorConfig
) -> Tuple[np.ndarray, np.ndarray]:
    """Gain and loss rate at one (x, p) for every time in `times`, on a fixed field."""
    x, p = _vec(x).reshape(1, 3), _vec(p)
    table = collision_table(p, field.spec, cfg.kernel)
    gains, rates = [], []
    for t in np.asarray(times, dtype=float):
        g, l = _parts_for_momentum(field, float(t), x, table, cfg)
        gains.append(g[0])
        rates.append(l[0])
    return np.array(gains), np.array(rates)


def gain_sharp(slice: FieldLattice, t: float, x: ArrayLike, p: ArrayLike, cfg: OperatorConfig):
    """Q+(f)#(t, x, p)."""
    gain, _, _ = _evaluate(slice, float(t), x, p, cfg)
    return _out(gain)


def loss_sharp(slice: FieldLattice, t: float, x: ArrayLike, p: ArrayLike, cfg: OperatorConfig):
    """Q-(f)#(t, x, p) = f#(t, x, p) times the loss rate."""
    _, loss_rate, own = _evaluate(slice, float(t), x, p, cfg)
    return _out(own * loss_rate)


def loss_rate_sharp(slice: FieldLattice, t: float, x: ArrayLike, p: ArrayLike, cfg: OperatorConfig):
    """The loss frequency: Q-# with the f#(t, x, p) factor removed."""
    _, loss_rate, _ = _evaluate(slice, float(t), x, p, cfg)
    return _out(loss_rate)


def collision_sharp(slice: FieldLattice, t: float, x: ArrayLike, p: ArrayLike, cfg: OperatorConfig):
    gain, loss_rate, own = _evaluate(slice, float(t), x, p, cfg)
    return _out(gain - own * loss_rate)


@dataclass(frozen=True)
class SweepResult:
    """Operator values at every lattice node, shaped like the lattice."""
    gain: np.ndarray
    loss: np.ndarray
    loss_rate: np.ndarray

    @property
    def collision(self) -> np.ndarray:
        return self.gain - self.loss


def collision_sweep(
    slice: FieldLattice,
    t: float,
    cfg: OperatorConfig,
    collector: Optional[IssueCollector] = None,
) -> SweepResult:
    """Evaluate Q+# and Q-# at every node of the slice's lattice."""
    grid = slice.spec
    t = float(t)
    xs, ps = lattice_nodes(grid)
    floor = _DensityFloor()

    gain = np.zeros((len(xs), len(ps)))
    loss_rate = np.zeros((len(xs), len(ps)))
    for j, p in enumerate(ps):
        table = collision_table(p, grid, cfg.kernel)
        gain[:, j], loss_rate[:, j] = _parts_for_momentum(slice, t, xs, table, cfg, floor)
    floor.report(collector, t)

    own = slice.values.reshape(len(xs), len(ps))
    return SweepResult(
        gain=gain.reshape(grid.shape),
        loss=(own * loss_rate).reshape(grid.shape),
        loss_rate=loss_rate.reshape(grid.shape),
    )


def monte_carlo_sharp(
    slice: FieldLattice,
    t: float,
    x: ArrayLike,
    p: ArrayLike,
    cfg: OperatorConfig,
    part: str = "gain",
    n_samples: int = 1_000_000,
    seed: int = 0,
    chunk: int = 1 << 17,
) -> Tuple[float, float]:
    """Monte Carlo estimate of Q+# or Q-# at one point, with its standard error.

    p1 is uniform on the momentum box and w uniform on the sphere. With a
    linear Y the contact density is sampled too, from one more uniform
    momentum per sample; Y is affine in rho, so the estimate stays unbiased
    for nonnegative slices.
    """
    if part not in ("gain", "loss"):
        raise InputError(f"part must be 'gain' or 'loss', got {part!r}")
    x, p = _vec(x), _vec(p)
    t = float(t)
    grid = slice.spec
    rng = np.random.default_rng(seed)
    p0 = float(np.sqrt(1.0 + p @ p))
    v = p / p0
    d = cfg.shift
    box = (2.0 * grid.p_max) ** 3
    own = float(slice.interpolate(x, p))

    def factor(X, omega, sign):
        physical = X + t * v
        if not cfg.needs_density:
            return _contact_point_factor(slice, t, physical, omega, cfg, sign)
        p2 = rng.uniform(-grid.p_max, grid.p_max, size=X.shape)
        contact = physical + sign * 0.5 * d * omega
        rho = box * slice.interpolate(contact - t * _speed(p2), p2)
        return Y_factor(np.maximum(rho, 0.0), cfg.y)

    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_samples:
        count = min(chunk, n_samples - done)
        p1 = rng.uniform(-grid.p_max, grid.p_max, size=(count, 3))
        omega = rng.standard_normal((count, 3))
        omega /= np.linalg.norm(omega, axis=1, keepdims=True)
        P = np.broadcast_to(p, p1.shape)
        admissible = _dot(omega, relative_velocity(P, p1)) >= 0.0
        B = np.where(admissible, kernel_B(P, p1, omega, cfg.kernel), 0.0)
        p10 = np.sqrt(1.0 + _dot(p1, p1))
        X = np.broadcast_to(x, p1.shape)

        if part == "gain":
            p_prime, p1_prime, _ = post_collision(P, p1, omega, check=False)
            first = slice.interpolate(X + t * (v - _speed(p_prime)), p_prime)
            second = slice.interpolate(X + d * omega + t * (v - _speed(p1_prime)), p1_prime)
            values = factor(X, omega, 1.0) * first * second
        else:
            values = factor(X, omega, -1.0) * own * slice.interpolate(X - d * omega + t * (v - _speed(p1)), p1)

        sample = box * 4.0 * np.pi * cfg.prefactor / p0 * values * B / p10
        total += float(np.sum(sample))
        total_sq += float(np.sum(sample * sample))
        done += count

    mean = total / n_samples
    variance = max(total_sq / n_samples - mean * mean, 0.0)
    return mean, float(np.sqrt(variance / n_samples))
