"""Mild-form fixed point map J and its Picard iteration.

    J(f#)(t_k) = f0 + int_0^{t_k} Q(f)#(tau) dtau

with the time integral taken by the cumulative trapezoid rule on the
uniform time grid. Smallness follows from C(R) = L~(R) A K where
L~(R) = L(R) R + |F+(0)| + |F-(0)| and A is the operator prefactor.
"""

import math
import os
from dataclasses import dataclass, field
from multiprocessing.pool import ThreadPool
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from scipy import integrate

from .errors import InputError, IssueCollector, IssueType, NoConvergence, SmallnessViolated
from .kernel import KernelSpec, YFactorSpec, YKind
from .lattice import FieldLattice, Trajectory, lattice_mass, weight_lattice, weighted_norm
from .operator import OperatorConfig, OperatorMode, collision_sweep

RATIO_SLACK = 1e-12


class SolverParams(BaseModel):
    """Ball radius, hypothesis constants and iteration controls."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    R: float = Field(gt=0.0)
    L_of_R: float = Field(0.0, ge=0.0)
    K: float = Field(gt=0.0)
    max_iter: int = Field(50, ge=1)
    tol: float = Field(1e-10, gt=0.0)
    prefactor: float = Field(1.0, ge=0.0)
    f_plus_zero: float = Field(1.0, ge=0.0)
    f_minus_zero: float = Field(1.0, ge=0.0)

    @classmethod
    def from_operator(
        cls,
        cfg: OperatorConfig,
        R: float,
        K: float,
        L_of_R: float = 0.0,
        max_iter: int = 50,
        tol: float = 1e-10,
    ) -> "SolverParams":
        """|F+-(0)| is Y(0) in enskog mode and 1 in boltzmann mode."""
        f_zero = cfg.y.at_zero if cfg.mode == OperatorMode.ENSKOG else 1.0
        return cls(
            R=R,
            L_of_R=L_of_R,
            K=K,
            max_iter=max_iter,
            tol=tol,
            prefactor=cfg.prefactor,
            f_plus_zero=f_zero,
            f_minus_zero=f_zero,
        )

    def L_tilde(self, R: Optional[float] = None) -> float:
        R = self.R if R is None else R
        return self.L_of_R * R + abs(self.f_plus_zero) + abs(self.f_minus_zero)

    def C(self, R: Optional[float] = None) -> float:
        return self.L_tilde(R) * self.prefactor * self.K


def smallness_threshold(params: SolverParams, rel_tol: float = 1e-15) -> float:
    """Largest R with 4 C(R) R <= 1, by bisection."""
    def excess(R: float) -> float:
        return 4.0 * params.C(R) * R - 1.0

    base = params.prefactor * params.K * (abs(params.f_plus_zero) + abs(params.f_minus_zero))
    if base <= 0.0 and params.L_of_R * params.prefactor * params.K <= 0.0:
        return math.inf
    # 4 C(R) R >= 4 base R, so 1 / (4 base) already overshoots when base > 0
    lo, hi = 0.0, (1.0 / (4.0 * base) if base > 0.0 else 1.0)
    while excess(hi) < 0.0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rel_tol * hi:
            break
    return lo


@dataclass
class SolverDiagnostics:
    """Per-iteration record of a Picard run."""
    times: List[float] = field(default_factory=list)
    iteration: List[int] = field(default_factory=list)
    norm: List[float] = field(default_factory=list)
    residual: List[float] = field(default_factory=list)
    ratio: List[float] = field(default_factory=list)
    min_value: List[float] = field(default_factory=list)
    mass: List[List[float]] = field(default_factory=list)
    converged: bool = False

    def record(self, traj: Trajectory, norm: float, residual: float):
        previous = self.residual[-1] if self.residual else None
        if previous is None:
            ratio = math.nan
        elif previous == 0.0:
            ratio = 0.0
        else:
            ratio = residual / previous
        self.iteration.append(len(self.iteration) + 1)
        self.norm.append(norm)
        self.residual.append(residual)
        self.ratio.append(ratio)
        self.min_value.append(float(np.min(traj.stacked())))
        self.mass.append([lattice_mass(s) for s in traj])

    @property
    def iterations(self) -> int:
        return len(self.iteration)

    @property
    def final_residual(self) -> float:
        return self.residual[-1] if self.residual else math.nan

    @property
    def max_ratio(self) -> float:
        finite = [r for r in self.ratio if not math.isnan(r)]
        return max(finite) if finite else math.nan

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({
            "iteration": self.iteration,
            "norm": self.norm,
            "residual": self.residual,
            "ratio": self.ratio,
            "min_value": self.min_value,
        })
        for k in range(len(self.times)):
            frame[f"mass_t{k}"] = [m[k] for m in self.mass]
        return frame

    def write_csv(self, path: Path | str):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


def _map_slices(fn, items: Sequence, threads: int) -> list:
    """Ordered map over time slices, optionally on a thread pool."""
    if threads == 0:
        threads = os.cpu_count() or 1
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    pool = ThreadPool(min(threads, len(items)))
    try:
        return pool.map(fn, items)
    finally:
        pool.close()
        pool.join()


def collision_history(
    traj: Trajectory,
    cfg: OperatorConfig,
    threads: int = 1,
    collector: Optional[IssueCollector] = None,
):
    """Sweep results at every time node, in time order."""
    def sweep(k: int):
        local = IssueCollector()
        return collision_sweep(traj.slices[k], traj.times[k], cfg, local), local

    results = _map_slices(sweep, list(range(len(traj))), threads)
    if collector is not None:
        for _, local in results:
            collector.extend(local)
    return [r for r, _ in results]


def apply_J(
    traj: Trajectory,
    f0: FieldLattice,
    cfg: OperatorConfig,
    threads: int = 1,
    collector: Optional[IssueCollector] = None,
) -> Trajectory:
    """One application of the mild-form map; slice 0 equals f0 exactly."""
    if not traj.spec.same_lattice(f0.spec):
        raise InputError("Trajectory and initial datum live on different grids")
    sweeps = collision_history(traj, cfg, threads, collector)
    rates = np.stack([s.collision for s in sweeps])
    integral = integrate.cumulative_trapezoid(rates, x=traj.times, axis=0, initial=0.0)
    return Trajectory.from_stacked(traj.spec, f0.values[None] + integral)


def picard_solve(
    f0: FieldLattice,
    params: SolverParams,
    cfg: OperatorConfig,
    threads: int = 1,
    verbose: bool = False,
    collector: Optional[IssueCollector] = None,
) -> Tuple[Trajectory, SolverDiagnostics]:
    """Iterate f(n+1) = J(f(n)) from f(0) = f0 held constant in time.

    Raises SmallnessViolated when |||f0||| > R/2 or R exceeds the smallness
    threshold; NoConvergence (carrying the last iterate) after max_iter.
    """
    kernel = cfg.kernel
    start = weighted_norm(f0, kernel)
    if start > 0.5 * params.R * (1.0 + RATIO_SLACK):
        raise SmallnessViolated(f"|||f0||| = {start:.6e} exceeds R/2 = {0.5 * params.R:.6e}")
    threshold = smallness_threshold(params)
    if params.R > threshold * (1.0 + RATIO_SLACK):
        raise SmallnessViolated(f"R = {params.R:.6e} exceeds the smallness threshold {threshold:.6e}")

    diagnostics = SolverDiagnostics(times=[float(t) for t in f0.spec.times])
    current = Trajectory.constant_in_time(f0)
    for n in range(1, params.max_iter + 1):
        following = apply_J(current, f0, cfg, threads, collector)
        residual = weighted_norm(following - current, kernel)
        norm = weighted_norm(following, kernel)
        diagnostics.record(following, norm, residual)
        if verbose:
            print(f"  iteration {n}: norm={norm:.6e} residual={residual:.6e}")
        if norm > params.R * (1.0 + 1e-9) and collector is not None:
            collector.add_issue(
                IssueType.BALL_EXIT, "picard", f"iterate {n} left the ball of radius {params.R:.6e}", norm
            )
        current = following
        if residual < params.tol:
            diagnostics.converged = True
            return current, diagnostics

    if collector is not None:
        collector.add_issue(
            IssueType.NO_CONVERGENCE,
            "picard",
            f"residual {diagnostics.final_residual:.3e} above tol after {params.max_iter} iterations",
            diagnostics.final_residual,
            ratio=diagnostics.max_ratio,
        )
    raise NoConvergence(
        f"Picard iteration stopped after {params.max_iter} iterations with residual "
        f"{diagnostics.final_residual:.3e} >= tol {params.tol:.3e} (max contraction ratio {diagnostics.max_ratio:.3f})",
        trajectory=current,
        diagnostics=diagnostics,
    )


def contraction_estimate(
    f: Trajectory,
    g: Trajectory,
    cfg: OperatorConfig,
    params: Optional[SolverParams] = None,
    threads: int = 1,
) -> float:
    """|||J(f) - J(g)||| / |||f - g|||, or 0 when f = g.

    f0 cancels in the difference, so the zero datum is used.
    """
    denominator = weighted_norm(f - g, cfg.kernel)
    if denominator == 0.0:
        return 0.0
    zero = FieldLattice.zeros(f.spec)
    difference = apply_J(f, zero, cfg, threads) - apply_J(g, zero, cfg, threads)
    return weighted_norm(difference, cfg.kernel) / denominator


def positivity_check(
    traj: Trajectory,
    tol: Optional[float] = None,
    kernel: Optional[KernelSpec] = None,
) -> Tuple[float, bool]:
    """(min value, min >= -tol); tol defaults to 1e-10 times the weighted norm."""
    values = traj.stacked()
    min_value = float(np.min(values)) if values.size else 0.0
    if tol is None:
        tol = 1e-10 * weighted_norm(traj, kernel or KernelSpec())
    return min_value, min_value >= -tol


def integrated_bound_ratios(
    traj: Trajectory,
    cfg: OperatorConfig,
    params: SolverParams,
    threads: int = 1,
) -> Tuple[float, float]:
    """Largest int |Q+-#| dt / (C(R) m R^2) over the lattice nodes, for gain and loss.

    Both stay <= 1 for trajectories with weighted norm <= R.
    """
    sweeps = collision_history(traj, cfg, threads)
    times = traj.times
    gain = integrate.trapezoid(np.abs(np.stack([s.gain for s in sweeps])), x=times, axis=0)
    loss = integrate.trapezoid(np.abs(np.stack([s.loss for s in sweeps])), x=times, axis=0)
    bound = params.C() * weight_lattice(traj.spec, cfg.kernel).values * params.R ** 2
    return float(np.max(gain / bound)), float(np.max(loss / bound))


def boltzmann_limit_sweep(
    f0: FieldLattice,
    kernel: KernelSpec,
    lambda_: float,
    K: float,
    diameters: Sequence[float] = (0.2, 0.1, 0.05),
    safety: float = 0.5,
    max_iter: int = 50,
    tol: float = 1e-10,
    threads: int = 1,
    verbose: bool = False,
    collector: Optional[IssueCollector] = None,
) -> pd.DataFrame:
    """Weighted distance between enskog and boltzmann solutions as a -> 0.

    Each enskog run uses the constant factor y0 = lambda / a^2 so that
    a^2 F+- = lambda; only the aw shifts differ from the boltzmann run.
    All runs share one radius, safety times the smallest threshold.
    """
    reference_cfg = OperatorConfig(mode=OperatorMode.BOLTZMANN, lambda_=lambda_, kernel=kernel)
    enskog_cfgs = [
        OperatorConfig(
            a=a,
            mode=OperatorMode.ENSKOG,
            kernel=kernel,
            y=YFactorSpec(kind=YKind.CONSTANT, y0=lambda_ / (a * a)),
        )
        for a in diameters
    ]
    thresholds = [
        smallness_threshold(SolverParams.from_operator(c, R=1.0, K=K)) for c in [reference_cfg, *enskog_cfgs]
    ]
    R = safety * min(thresholds)

    if verbose:
        print(f"  boltzmann reference (lambda={lambda_}, R={R:.6e})")
    reference_params = SolverParams.from_operator(reference_cfg, R, K, 0.0, max_iter, tol)
    reference, _ = picard_solve(f0, reference_params, reference_cfg, threads, False, collector)

    rows = []
    for cfg, threshold in zip(enskog_cfgs, thresholds[1:]):
        if verbose:
            print(f"  enskog a={cfg.a}")
        solution, diagnostics = picard_solve(
            f0, SolverParams.from_operator(cfg, R, K, 0.0, max_iter, tol), cfg, threads, False, collector
        )
        rows.append({
            "a": cfg.a,
            "y0": cfg.y.y0,
            "threshold": threshold,
            "R": R,
            "iterations": diagnostics.iterations,
            "difference_norm": weighted_norm(solution - reference, kernel),
        })
    return pd.DataFrame(rows)
