"""Empirical constants for the kernel hypotheses and the Galeano comparison.

K1 bounds int_0^t of the gain integral built from m, divided by m(x, p);
K2 bounds int_0^t of the loss frequency built from m. Both are suprema over
the lattice nodes plus off-grid probes on the truncated domain, so K is an
empirical constant, not a certificate.
"""

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from scipy import integrate

from .errors import InputError
from .kernel import KernelSpec, YFactorSpec, YKind, weight_m
from .lattice import FieldLattice, GridSpec, Trajectory, lattice_nodes, sphere_rule, weight_lattice
from .operator import OperatorConfig, OperatorMode, _density_points, probe_series
from .solver import collision_history

K_LABEL = "empirical K (truncated domain)"


class HypothesisReport(BaseModel):
    """Measured hypothesis constants."""
    model_config = ConfigDict(frozen=True)

    K1_estimate: float = Field(ge=0.0)
    K2_estimate: float = Field(ge=0.0)
    K: float = Field(ge=0.0)
    samples: int
    lattice_nodes: int
    t_probe: List[float]
    sigma_tilde_ratio_sup: float
    label: str = K_LABEL


def unit_config(kernel: KernelSpec, a: float) -> OperatorConfig:
    """Prefactor 1, F = 1 and shifts of diameter a: the bare kernel integrals."""
    return OperatorConfig(
        a=a,
        mode=OperatorMode.BOLTZMANN,
        lambda_=1.0,
        kernel=kernel,
        y=YFactorSpec(kind=YKind.CONSTANT, y0=1.0),
        shift_diameter=a,
    )


def _lattice_integrals(kernel: KernelSpec, grid: GridSpec, a: float, threads: int):
    """Cumulative time integrals of the m-built gain and loss frequency at every node."""
    m_field = weight_lattice(grid, kernel)
    sweeps = collision_history(Trajectory.constant_in_time(m_field), unit_config(kernel, a), threads)
    times = grid.times
    gain = integrate.cumulative_trapezoid(np.stack([s.gain for s in sweeps]), x=times, axis=0, initial=0.0)
    rate = integrate.cumulative_trapezoid(np.stack([s.loss_rate for s in sweeps]), x=times, axis=0, initial=0.0)
    return m_field, gain, rate


def _probe_points(grid: GridSpec, n: int, seed: int):
    """Uniform x in the box and |p| in [0.75, 1] p_max; rows are nested across n."""
    rng = np.random.default_rng(seed)
    draws = rng.random((n, 6))
    x = grid.x_max * (2.0 * draws[:, :3] - 1.0)
    theta = np.arccos(1.0 - 2.0 * draws[:, 3])
    psi = 2.0 * np.pi * draws[:, 4]
    radius = grid.p_max * (0.75 + 0.25 * draws[:, 5])
    direction = np.stack([np.sin(theta) * np.cos(psi), np.sin(theta) * np.sin(psi), np.cos(theta)], axis=1)
    return x, radius[:, None] * direction


def estimate_K(
    kernel: KernelSpec,
    grid: GridSpec,
    a: float,
    n_samples: int = 100,
    seed: int = 0,
    threads: int = 1,
    sigma_n_omega: int = 1024,
    verbose: bool = False,
) -> HypothesisReport:
    """Suprema of the hypothesis integrands over nodes and n_samples off-grid probes."""
    if n_samples < 100:
        raise InputError(f"n_samples must be >= 100, got {n_samples}")
    times = grid.times
    m_field, gain, rate = _lattice_integrals(kernel, grid, a, threads)
    K1 = float(np.max(gain / m_field.values[None]))
    K2 = float(np.max(rate))
    if verbose:
        print(f"  lattice nodes: K1={K1:.6e} K2={K2:.6e}")

    cfg = unit_config(kernel, a)
    xs, ps = _probe_points(grid, n_samples, seed)
    for x, p in zip(xs, ps):
        g, r = probe_series(m_field, times, x, p, cfg)
        K1 = max(K1, float(integrate.trapezoid(g, x=times)) / float(weight_m(x, p, kernel)))
        K2 = max(K2, float(integrate.trapezoid(r, x=times)))
    if verbose:
        print(f"  with {n_samples} probes: K1={K1:.6e} K2={K2:.6e}")

    n_x_nodes, n_p_nodes = (len(v) for v in lattice_nodes(grid))
    return HypothesisReport(
        K1_estimate=K1,
        K2_estimate=K2,
        K=max(K1, K2),
        samples=n_samples,
        lattice_nodes=n_x_nodes * n_p_nodes,
        t_probe=[float(t) for t in times],
        sigma_tilde_ratio_sup=sigma_tilde_ratio_sup(kernel, n_omega=sigma_n_omega, seed=seed),
    )


def _contact_density_sup(field: FieldLattice, t: float, contacts: np.ndarray, velocities: np.ndarray) -> float:
    """max |rho| over contacts shifted by t v for every lattice velocity v."""
    if t == 0.0:
        return float(np.max(np.abs(_density_points(field, t, contacts.reshape(-1, 3)))))
    return max(
        float(np.max(np.abs(_density_points(field, t, (contacts + t * v).reshape(-1, 3))))) for v in velocities
    )


def estimate_lipschitz(cfg: OperatorConfig, grid: GridSpec, n_pairs: int = 8, seed: int = 0) -> float:
    """sup |Y(rho_f) - Y(rho_g)| / |||f - g||| over sampled differences h = f - g.

    Densities are read at every physical contact point x + tp/p0 +- d w / 2
    the lattice sweep visits, at every time node. h = m is always included
    and bounds every other h.
    """
    if not cfg.needs_density:
        return 0.0
    xs, ps = lattice_nodes(grid)
    velocities = ps / np.sqrt(1.0 + np.sum(ps * ps, axis=1))[:, None]
    omegas = sphere_rule(grid.n_omega).nodes
    offsets = 0.5 * cfg.shift * np.concatenate([omegas, -omegas])
    contacts = xs[:, None, :] + offsets[None]

    m_field = weight_lattice(grid, cfg.kernel)
    rng = np.random.default_rng(seed)
    fields = [m_field]
    for _ in range(n_pairs):
        fields.append(FieldLattice(grid, rng.uniform(-1.0, 1.0, grid.shape) * m_field.values))

    best = 0.0
    for h in fields:
        scale = float(np.max(np.abs(h.values) / m_field.values))
        if scale == 0.0:
            continue
        rho = max(_contact_density_sup(h, float(t), contacts, velocities) for t in grid.times)
        best = max(best, cfg.y.slope * rho / scale)
    return best


def sigma_tilde_ratio_sup(
    kernel: KernelSpec,
    n_omega: int = 1024,
    n_z: int = 41,
    n_directions: int = 16,
    seed: int = 0,
) -> float:
    """sup over |z| in [1e-2, 1e2] (log-spaced) and sampled directions of |z| int sigma~ / (1 + |z.w|) dw.

    The integral runs over the full sphere, which bounds every S+ half.
    """
    rule = sphere_rule(n_omega)
    sigma = np.asarray(kernel.sigma_tilde(rule.nodes))
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((n_directions, 3))
    directions = np.concatenate([np.eye(3), directions / np.linalg.norm(directions, axis=1, keepdims=True)])
    best = 0.0
    for r in np.logspace(-2.0, 2.0, n_z):
        dots = np.abs(directions @ rule.nodes.T) * r
        integrals = (sigma / (1.0 + dots)) @ rule.weights
        best = max(best, float(r * np.max(integrals)))
    return best


def k_growth(
    kernel: KernelSpec,
    grid: GridSpec,
    a: float,
    doublings: int = 2,
    threads: int = 1,
) -> pd.DataFrame:
    """Lattice-node K at t_max, 2 t_max, 4 t_max, ... with the time step held fixed.

    Nested grids share their time nodes, so one sweep over the longest grid
    gives every row.
    """
    factor = 2 ** doublings
    longest = grid.model_copy(update={"t_max": grid.t_max * factor, "n_t": (grid.n_t - 1) * factor + 1})
    m_field, gain, rate = _lattice_integrals(kernel, longest, a, threads)
    rows = []
    previous: Optional[float] = None
    for j in range(doublings + 1):
        k = (grid.n_t - 1) * 2 ** j
        K1 = float(np.max(gain[: k + 1] / m_field.values[None]))
        K2 = float(np.max(rate[: k + 1]))
        K = max(K1, K2)
        growth = math.nan if previous in (None, 0.0) else K / previous
        rows.append({"t_max": grid.t_max * 2 ** j, "K1": K1, "K2": K2, "K": K, "growth": growth})
        previous = K
    return pd.DataFrame(rows)


class GaleanoParams(BaseModel):
    """Constants of the earlier smallness conditions R^2 < beta^4 |v| / (16 pi^2 c L a)."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    beta: float = Field(1.0, gt=0.0)
    c: float = Field(1.0, gt=0.0)
    L: float = Field(1.0, gt=0.0)
    a: float = Field(1.0, gt=0.0)


def galeano_bound(params: GaleanoParams, v) -> float:
    speed = float(np.linalg.norm(np.asarray(v, dtype=float)))
    return params.beta ** 4 * speed / (16.0 * math.pi ** 2 * params.c * params.L * params.a)


def galeano_infimum(params: GaleanoParams) -> float:
    """inf over v of the bound; linear in |v|, so attained at v = 0."""
    return galeano_bound(params, np.zeros(3))


@dataclass(frozen=True)
class RadiusInterval:
    """A set of radii {R >= 0 : lower (<)<= R (<)<= upper}."""
    lower: float
    upper: float
    include_lower: bool
    include_upper: bool

    @property
    def is_empty(self) -> bool:
        if self.lower < self.upper:
            return False
        return not (self.lower == self.upper and self.include_lower and self.include_upper)

    def contains(self, R: float) -> bool:
        above = R > self.lower or (self.include_lower and R == self.lower)
        below = R < self.upper or (self.include_upper and R == self.upper)
        return above and below

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "include_lower": self.include_lower,
            "include_upper": self.include_upper,
            "empty": self.is_empty,
        }


def galeano_admissible_radii(
    params: GaleanoParams, v0: Optional[float] = None, strict: bool = True
) -> RadiusInterval:
    """Radii satisfying R^2 < bound (or <= when strict=False).

    With v free the bound must hold for every v, so the infimum 0 applies:
    strict gives the empty set, non-strict only R = 0. A fixed speed v0 > 0
    gives [0, sqrt(bound)).
    """
    bound = galeano_infimum(params) if v0 is None else galeano_bound(params, [v0, 0.0, 0.0])
    upper = math.sqrt(bound)
    if strict and bound == 0.0:
        return RadiusInterval(0.0, 0.0, False, False)
    return RadiusInterval(0.0, upper, True, not strict)
