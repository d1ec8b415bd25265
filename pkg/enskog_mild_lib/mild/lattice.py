"""Discretized f# on a truncated uniform (x, p) lattice.

A FieldLattice stores f#(t, x, p) at one time node on the tensor grid
[-x_max, x_max]^3 x [-p_max, p_max]^3, C-ordered as (x1, x2, x3, p1, p2, p3).
Off-grid values come from 6-D multilinear interpolation; everything outside
the box is 0.

Binary layout (save_lattice / save_trajectory):
    little-endian float64, C order, x-major then p; a JSON header carries the
    GridSpec, the array shape and the dtype.
"""

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterator, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import integrate
from scipy.interpolate import RegularGridInterpolator

from .errors import InputError
from .kernel import KernelSpec, weight_m
from .kinematics import _vec

BINARY_DTYPE = "<f8"


class GridSpec(BaseModel):
    """Truncation radii, node counts and quadrature sizes."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    x_max: float = Field(4.0, gt=0.0)
    p_max: float = Field(4.0, gt=0.0)
    n_x: int = Field(7, ge=3)
    n_p: int = Field(7, ge=3)
    n_omega: int = Field(32, ge=6)
    t_max: float = Field(2.0, gt=0.0)
    n_t: int = Field(9, ge=2)
    # Gauss-Legendre points per panel per axis of the momentum rule
    n_quad_p: int = Field(1, ge=1)
    # panels per axis; None aligns panels with lattice cells
    n_panels_p: Optional[int] = Field(None, ge=1)

    @field_validator("n_x", "n_p")
    @classmethod
    def _odd(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError(f"node count must be odd so the origin is a node, got {value}")
        return value

    @property
    def x_axis(self) -> np.ndarray:
        return np.linspace(-self.x_max, self.x_max, self.n_x)

    @property
    def p_axis(self) -> np.ndarray:
        return np.linspace(-self.p_max, self.p_max, self.n_p)

    @property
    def dx(self) -> float:
        return 2.0 * self.x_max / (self.n_x - 1)

    @property
    def dp(self) -> float:
        return 2.0 * self.p_max / (self.n_p - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.n_t)

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.n_x,) * 3 + (self.n_p,) * 3

    @property
    def panels_p(self) -> int:
        return self.n_panels_p if self.n_panels_p is not None else self.n_p - 1

    def same_lattice(self, other: "GridSpec") -> bool:
        return self == other


def _axis_points(axis: np.ndarray) -> np.ndarray:
    grids = np.meshgrid(axis, axis, axis, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def lattice_nodes(spec: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Flat C-ordered spatial nodes (n_x^3, 3) and momentum nodes (n_p^3, 3)."""
    return _axis_points(spec.x_axis), _axis_points(spec.p_axis)


@dataclass(frozen=True, eq=False)
class FieldLattice:
    """f# sampled on the lattice at one time node. Values are read-only."""
    spec: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.spec.shape:
            raise InputError(f"Lattice values have shape {values.shape}, grid expects {self.spec.shape}")
        if not np.all(np.isfinite(values)):
            raise InputError("Lattice values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, spec: GridSpec) -> "FieldLattice":
        return cls(spec, np.zeros(spec.shape))

    @classmethod
    def from_function(cls, spec: GridSpec, fn) -> "FieldLattice":
        """Sample fn(x, p) (vectorized over (N, 3) arrays) at every node."""
        xs, ps = lattice_nodes(spec)
        x = np.repeat(xs, len(ps), axis=0)
        p = np.tile(ps, (len(xs), 1))
        return cls(spec, np.asarray(fn(x, p), dtype=float).reshape(spec.shape))

    @cached_property
    def _interpolator(self) -> RegularGridInterpolator:
        x, p = self.spec.x_axis, self.spec.p_axis
        return RegularGridInterpolator(
            (x, x, x, p, p, p), np.array(self.values), method="linear", bounds_error=False, fill_value=0.0
        )

    def interpolate(self, x: ArrayLike, p: ArrayLike):
        return interpolate(self, x, p)

    def scaled(self, factor: float) -> "FieldLattice":
        return FieldLattice(self.spec, factor * self.values)

    def __add__(self, other: "FieldLattice") -> "FieldLattice":
        _require_same_grid(self.spec, other.spec)
        return FieldLattice(self.spec, self.values + other.values)

    def __sub__(self, other: "FieldLattice") -> "FieldLattice":
        _require_same_grid(self.spec, other.spec)
        return FieldLattice(self.spec, self.values - other.values)


def _require_same_grid(a: GridSpec, b: GridSpec):
    if not a.same_lattice(b):
        raise InputError(f"Grid mismatch: {a} vs {b}")


def interpolate(field: FieldLattice, x: ArrayLike, p: ArrayLike):
    """Multilinear value of the stored field at (x, p); 0 outside the box."""
    x, p = _vec(x), _vec(p)
    x, p = np.broadcast_arrays(x, p)
    lead = x.shape[:-1]
    points = np.concatenate([x, p], axis=-1).reshape(-1, 6)
    result = field._interpolator(points).reshape(lead)
    return float(result) if result.ndim == 0 else result


@dataclass(frozen=True, eq=False)
class Trajectory:
    """f# at the time nodes t_k = k t_max / (n_t - 1)."""
    spec: GridSpec
    slices: Tuple[FieldLattice, ...]

    def __post_init__(self):
        slices = tuple(self.slices)
        if len(slices) != self.spec.n_t:
            raise InputError(f"Trajectory has {len(slices)} slices, grid expects {self.spec.n_t}")
        for s in slices:
            _require_same_grid(self.spec, s.spec)
        object.__setattr__(self, "slices", slices)

    @classmethod
    def zeros(cls, spec: GridSpec) -> "Trajectory":
        zero = FieldLattice.zeros(spec)
        return cls(spec, (zero,) * spec.n_t)

    @classmethod
    def constant_in_time(cls, f0: FieldLattice) -> "Trajectory":
        return cls(f0.spec, (f0,) * f0.spec.n_t)

    @classmethod
    def from_stacked(cls, spec: GridSpec, values: np.ndarray) -> "Trajectory":
        return cls(spec, tuple(FieldLattice(spec, v) for v in values))

    @property
    def times(self) -> np.ndarray:
        return self.spec.times

    def stacked(self) -> np.ndarray:
        return np.stack([s.values for s in self.slices])

    def __iter__(self) -> Iterator[FieldLattice]:
        return iter(self.slices)

    def __len__(self) -> int:
        return len(self.slices)

    def scaled(self, factor: float) -> "Trajectory":
        return Trajectory.from_stacked(self.spec, factor * self.stacked())

    def __add__(self, other: "Trajectory") -> "Trajectory":
        _require_same_grid(self.spec, other.spec)
        return Trajectory.from_stacked(self.spec, self.stacked() + other.stacked())

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        _require_same_grid(self.spec, other.spec)
        return Trajectory.from_stacked(self.spec, self.stacked() - other.stacked())


class QuadratureRule(NamedTuple):
    nodes: np.ndarray    # (N, 3)
    weights: np.ndarray  # (N,)


def sphere_rule(n_omega: int) -> QuadratureRule:
    """Gauss-Legendre in cos(theta) x uniform in psi over the full sphere.

    n_theta = max(2, round(sqrt(n_omega / 2))), n_psi = max(3, ceil(n_omega / n_theta)).
    """
    if n_omega < 6:
        raise InputError(f"n_omega must be >= 6, got {n_omega}")
    n_theta = max(2, int(round(np.sqrt(n_omega / 2.0))))
    n_psi = max(3, int(np.ceil(n_omega / n_theta)))
    mu, w_mu = np.polynomial.legendre.leggauss(n_theta)
    psi = 2.0 * np.pi * (np.arange(n_psi) + 0.5) / n_psi
    mu_g, psi_g = np.meshgrid(mu, psi, indexing="ij")
    sin_t = np.sqrt(1.0 - mu_g ** 2)
    nodes = np.stack([sin_t * np.cos(psi_g), sin_t * np.sin(psi_g), mu_g], axis=-1).reshape(-1, 3)
    weights = np.repeat(w_mu * (2.0 * np.pi / n_psi), n_psi)
    return QuadratureRule(nodes, weights)


def _composite_gauss_legendre(half_width: float, panels: int, order: int) -> Tuple[np.ndarray, np.ndarray]:
    edges = np.linspace(-half_width, half_width, panels + 1)
    ref, ref_w = np.polynomial.legendre.leggauss(order)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * ref[None, :]).ravel()
    weights = (half[:, None] * ref_w[None, :]).ravel()
    return nodes, weights


def momentum_rule(spec: GridSpec) -> QuadratureRule:
    """Tensorized composite Gauss-Legendre rule on [-p_max, p_max]^3.

    With the default panels (one per lattice cell) it integrates the
    multilinear interpolant of any lattice field exactly.
    """
    nodes_1d, weights_1d = _composite_gauss_legendre(spec.p_max, spec.panels_p, spec.n_quad_p)
    nodes = _axis_points(nodes_1d)
    w = np.einsum("i,j,k->ijk", weights_1d, weights_1d, weights_1d).ravel()
    return QuadratureRule(nodes, w)


def weight_lattice(spec: GridSpec, kernel: KernelSpec) -> FieldLattice:
    """m(x, p) at every lattice node."""
    return FieldLattice.from_function(spec, lambda x, p: weight_m(x, p, kernel))


def weighted_norm(traj: Union[Trajectory, FieldLattice], spec: KernelSpec) -> float:
    """max over slices and nodes of |f#| / m."""
    grid = traj.spec
    m = weight_lattice(grid, spec).values
    values = traj.stacked() if isinstance(traj, Trajectory) else traj.values[None]
    if values.size == 0:
        return 0.0
    return float(np.max(np.abs(values) / m))


def lattice_mass(field: FieldLattice) -> float:
    """6-D trapezoid of f# over the box; equals the mass of f."""
    spec = field.spec
    values = field.values
    for _ in range(3):
        values = integrate.trapezoid(values, dx=spec.dx, axis=0)
    for _ in range(3):
        values = integrate.trapezoid(values, dx=spec.dp, axis=0)
    return float(values)


def truncation_loss(spec: GridSpec) -> float:
    """Fraction of the momentum mass of exp(-p0) outside the momentum box."""
    total, _ = integrate.quad(lambda r: 4.0 * np.pi * r * r * np.exp(-np.sqrt(1.0 + r * r)), 0.0, np.inf)
    rule = momentum_rule(spec)
    inside = float(np.sum(rule.weights * np.exp(-np.sqrt(1.0 + np.sum(rule.nodes ** 2, axis=1)))))
    return max(0.0, 1.0 - inside / total)


def _header(spec: GridSpec, shape: Sequence[int], kind: str) -> dict:
    return {
        "kind": kind,
        "grid": spec.model_dump(mode="json"),
        "shape": list(shape),
        "dtype": BINARY_DTYPE,
        "order": "C",
        "layout": "x-major then p",
    }


def _write(values: np.ndarray, header: dict, bin_path: Path, header_path: Path):
    bin_path.parent.mkdir(parents=True, exist_ok=True)
    bin_path.write_bytes(np.ascontiguousarray(values, dtype=BINARY_DTYPE).tobytes(order="C"))
    header_path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")


def _read(bin_path: Path, header_path: Path, kind: str) -> Tuple[GridSpec, np.ndarray]:
    header = json.loads(Path(header_path).read_text())
    if header.get("kind") != kind:
        raise InputError(f"{header_path} describes a {header.get('kind')!r}, expected {kind!r}")
    spec = GridSpec.model_validate(header["grid"])
    values = np.frombuffer(Path(bin_path).read_bytes(), dtype=header["dtype"]).reshape(header["shape"])
    return spec, values.astype(float)


def save_lattice(field: FieldLattice, bin_path: Path | str, header_path: Path | str | None = None):
    bin_path = Path(bin_path)
    header_path = Path(header_path) if header_path else bin_path.with_suffix(".json")
    _write(field.values, _header(field.spec, field.values.shape, "lattice"), bin_path, header_path)


def load_lattice(bin_path: Path | str, header_path: Path | str | None = None) -> FieldLattice:
    bin_path = Path(bin_path)
    header_path = Path(header_path) if header_path else bin_path.with_suffix(".json")
    spec, values = _read(bin_path, header_path, "lattice")
    return FieldLattice(spec, values)


def save_trajectory(traj: Trajectory, bin_path: Path | str, header_path: Path | str | None = None):
    bin_path = Path(bin_path)
    header_path = Path(header_path) if header_path else bin_path.parent / "header.json"
    values = traj.stacked()
    _write(values, _header(traj.spec, values.shape, "trajectory"), bin_path, header_path)


def load_trajectory(bin_path: Path | str, header_path: Path | str | None = None) -> Trajectory:
    bin_path = Path(bin_path)
    header_path = Path(header_path) if header_path else bin_path.parent / "header.json"
    spec, values = _read(bin_path, header_path, "trajectory")
    return Trajectory.from_stacked(spec, values)
