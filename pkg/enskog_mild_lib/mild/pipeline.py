"""Runs one scenario end to end and writes its artifacts.

Scenario files are TOML with dotted keys:

    seed = 0
    grid.n_x = 5
    operator.a = 0.1
    solver.R = "auto"
    initial_data.kind = "gaussian"

Outputs in {output_dir}/:
    diagnostics.csv, trajectory.bin + header.json, summary.json   (solve)
    report.json                                                  (check-hypotheses)
    boltzmann_limit.csv                                          (boltzmann-limit)
    issues.jsonl                                                 (when issues were collected)
"""

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..report import GaleanoSummary, HypothesesRunReport, SolveSummary, write_pydantic_json
from .errors import InputError, IssueCollector, IssueType, NoConvergence
from .hypotheses import (
    GaleanoParams,
    HypothesisReport,
    estimate_K,
    estimate_lipschitz,
    galeano_admissible_radii,
    galeano_infimum,
    k_growth,
)
from .kernel import KernelSpec, YFactorSpec
from .lattice import (
    FieldLattice,
    GridSpec,
    Trajectory,
    load_lattice,
    save_trajectory,
    truncation_loss,
    weighted_norm,
)
from .operator import OperatorConfig, OperatorMode
from .solver import (
    SolverDiagnostics,
    SolverParams,
    boltzmann_limit_sweep,
    picard_solve,
    positivity_check,
    smallness_threshold,
)

TRUNCATION_WARN = 1e-3


class OperatorSection(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    a: float = Field(0.1, ge=0.0)
    mode: OperatorMode = OperatorMode.ENSKOG
    lambda_: float = Field(1.0, gt=0.0, alias="lambda")
    shift_diameter: Optional[float] = Field(None, ge=0.0)


class SolverSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    R: Union[float, Literal["auto"]] = "auto"
    # R = safety * threshold when R is "auto"
    safety: float = Field(0.5, gt=0.0, le=1.0)
    K: Optional[float] = Field(None, gt=0.0)
    L_of_R: Optional[float] = Field(None, ge=0.0)
    tol: float = Field(1e-10, gt=0.0)
    max_iter: int = Field(50, ge=1)

    @model_validator(mode="after")
    def _positive_radius(self):
        if self.R != "auto" and self.R <= 0.0:
            raise ValueError(f"R must be positive or 'auto', got {self.R}")
        return self


class InitialKind(str, Enum):
    ZERO = "zero"
    GAUSSIAN = "gaussian"
    FROM_FILE = "from_file"


class InitialDataSection(BaseModel):
    """f0(x, p) = amplitude exp(-|x|^2 / x_width^2 - |p|^2 / p_width^2).

    Without an amplitude the Gaussian is scaled so |||f0||| = norm_fraction * R.
    """
    model_config = ConfigDict(extra="forbid")

    kind: InitialKind = InitialKind.GAUSSIAN
    amplitude: Optional[float] = Field(None, ge=0.0)
    norm_fraction: float = Field(0.5, ge=0.0)
    x_width: float = Field(1.0, gt=0.0)
    p_width: float = Field(1.0, gt=0.0)
    path: Optional[Path] = None

    @model_validator(mode="after")
    def _path_for_file(self):
        if self.kind == InitialKind.FROM_FILE and self.path is None:
            raise ValueError("initial_data.path is required when kind = 'from_file'")
        return self


class HypothesesSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_samples: int = Field(100, ge=100)
    sigma_n_omega: int = Field(1024, ge=6)
    doublings: int = Field(2, ge=0)
    lipschitz_pairs: int = Field(8, ge=0)


class GaleanoSection(GaleanoParams):
    v0: Optional[float] = Field(1.0, gt=0.0)


class LimitSection(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    diameters: List[float] = Field(default_factory=lambda: [0.2, 0.1, 0.05], min_length=1)
    lambda_: float = Field(0.01, gt=0.0, alias="lambda")
    safety: float = Field(0.5, gt=0.0, le=1.0)


class ScenarioConfig(BaseModel):
    """Validated scenario file."""
    model_config = ConfigDict(extra="forbid")

    seed: int = 0
    threads: int = Field(1, ge=0)
    output_dir: Path = Path("output")
    grid: GridSpec = Field(default_factory=GridSpec)
    kernel: KernelSpec = Field(default_factory=KernelSpec)
    y: YFactorSpec = Field(default_factory=YFactorSpec)
    operator: OperatorSection = Field(default_factory=OperatorSection)
    solver: SolverSection = Field(default_factory=SolverSection)
    initial_data: InitialDataSection = Field(default_factory=InitialDataSection)
    hypotheses: HypothesesSection = Field(default_factory=HypothesesSection)
    galeano: GaleanoSection = Field(default_factory=GaleanoSection)
    limit: LimitSection = Field(default_factory=LimitSection)

    @property
    def operator_config(self) -> OperatorConfig:
        return OperatorConfig(
            a=self.operator.a,
            mode=self.operator.mode,
            lambda_=self.operator.lambda_,
            shift_diameter=self.operator.shift_diameter,
            kernel=self.kernel,
            y=self.y,
        )


def load_scenario(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> ScenarioConfig:
    """Parse and validate a scenario file; overrides replace top-level keys."""
    with open(path, "rb") as f:
        data = tomllib.load(f)
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return ScenarioConfig.model_validate(data)


def gaussian_initial(grid: GridSpec, amplitude: float, x_width: float, p_width: float) -> FieldLattice:
    return FieldLattice.from_function(
        grid,
        lambda x, p: amplitude * np.exp(-np.sum(x * x, axis=1) / x_width ** 2 - np.sum(p * p, axis=1) / p_width ** 2),
    )


@dataclass
class RunStats:
    """Statistics from a scenario run."""
    sweeps: int = 0
    iterations: int = 0
    K: Optional[float] = None
    L_of_R: Optional[float] = None
    threshold: Optional[float] = None
    R: Optional[float] = None
    converged: Optional[bool] = None
    issues: int = 0


class ScenarioRunner:
    """Executes the subcommands for one scenario.

    Usage:
        config = load_scenario("configs/small.toml")
        runner = ScenarioRunner(config)
        summary = runner.solve()
        runner.print_summary()
    """

    def __init__(self, config: ScenarioConfig, verbose: bool = False):
        self.config = config
        self.verbose = verbose
        self.stats = RunStats()
        self.issues = IssueCollector()
        self._hypotheses: Optional[HypothesisReport] = None

    @property
    def output_dir(self) -> Path:
        return self.config.output_dir

    def _check_truncation(self):
        loss = truncation_loss(self.config.grid)
        if loss > TRUNCATION_WARN:
            self.issues.add_issue(
                IssueType.TRUNCATION_LOSS,
                "lattice",
                f"{loss:.3e} of the exp(-p0) momentum mass lies outside p_max = {self.config.grid.p_max}",
                loss,
            )
        return loss

    def hypotheses_report(self) -> HypothesisReport:
        """K for the scenario's kernel and grid, measured once per runner."""
        if self._hypotheses is None:
            cfg = self.config
            print(f"\nEstimating K ({cfg.hypotheses.n_samples} probes + lattice nodes)")
            self._hypotheses = estimate_K(
                cfg.kernel,
                cfg.grid,
                cfg.operator_config.shift,
                n_samples=cfg.hypotheses.n_samples,
                seed=cfg.seed,
                threads=cfg.threads,
                sigma_n_omega=cfg.hypotheses.sigma_n_omega,
                verbose=self.verbose,
            )
            self.stats.sweeps += cfg.grid.n_t
            print(f"  K1={self._hypotheses.K1_estimate:.6e} K2={self._hypotheses.K2_estimate:.6e}")
        return self._hypotheses

    def solver_params(self) -> SolverParams:
        cfg = self.config
        op = cfg.operator_config
        K = cfg.solver.K if cfg.solver.K is not None else self.hypotheses_report().K
        if cfg.solver.L_of_R is not None:
            L = cfg.solver.L_of_R
        else:
            L = estimate_lipschitz(op, cfg.grid, cfg.hypotheses.lipschitz_pairs, cfg.seed)
        threshold = smallness_threshold(SolverParams.from_operator(op, R=1.0, K=K, L_of_R=L))
        R = cfg.solver.safety * threshold if cfg.solver.R == "auto" else cfg.solver.R
        self.stats.K, self.stats.L_of_R, self.stats.threshold, self.stats.R = K, L, threshold, R
        return SolverParams.from_operator(op, R=R, K=K, L_of_R=L, max_iter=cfg.solver.max_iter, tol=cfg.solver.tol)

    def initial_datum(self, R: float) -> FieldLattice:
        init = self.config.initial_data
        grid = self.config.grid
        if init.kind == InitialKind.ZERO:
            return FieldLattice.zeros(grid)
        if init.kind == InitialKind.FROM_FILE:
            f0 = load_lattice(init.path)
            if not f0.spec.same_lattice(grid):
                raise InputError(f"initial_data.path grid {f0.spec} does not match the scenario grid")
            return f0
        if init.amplitude is not None:
            return gaussian_initial(grid, init.amplitude, init.x_width, init.p_width)
        shape = gaussian_initial(grid, 1.0, init.x_width, init.p_width)
        return shape.scaled(init.norm_fraction * R / weighted_norm(shape, self.config.kernel))

    def solve(self) -> SolveSummary:
        """picard_solve and artifacts; NoConvergence is re-raised after writing them."""
        cfg = self.config
        op = cfg.operator_config
        loss = self._check_truncation()
        params = self.solver_params()
        f0 = self.initial_datum(params.R)
        initial_norm = weighted_norm(f0, cfg.kernel)
        print(f"\nSolving: mode={op.mode.value} a={op.a} R={params.R:.6e} threshold={self.stats.threshold:.6e}")

        failure: Optional[NoConvergence] = None
        try:
            trajectory, diagnostics = picard_solve(f0, params, op, cfg.threads, self.verbose, self.issues)
        except NoConvergence as e:
            failure = e
            trajectory, diagnostics = e.trajectory, e.diagnostics

        summary = self._write_solution(trajectory, diagnostics, params, initial_norm, loss)
        if failure is not None:
            raise failure
        return summary

    def _write_solution(
        self,
        trajectory: Trajectory,
        diagnostics: SolverDiagnostics,
        params: SolverParams,
        initial_norm: float,
        loss: float,
    ) -> SolveSummary:
        kernel = self.config.kernel
        min_value, ok = positivity_check(trajectory, kernel=kernel)
        if not ok:
            self.issues.add_issue(
                IssueType.POSITIVITY_VIOLATION, "solve", "converged trajectory has negative values", min_value
            )
        self.stats.iterations = diagnostics.iterations
        self.stats.sweeps += diagnostics.iterations * self.config.grid.n_t
        self.stats.converged = diagnostics.converged

        out = self.output_dir
        diagnostics.write_csv(out / "diagnostics.csv")
        save_trajectory(trajectory, out / "trajectory.bin", out / "header.json")
        ratio = diagnostics.max_ratio
        summary = SolveSummary(
            converged=diagnostics.converged,
            iterations=diagnostics.iterations,
            final_residual=diagnostics.final_residual,
            max_contraction_ratio=None if ratio != ratio else ratio,
            positivity_min=min_value,
            positivity_ok=ok,
            R=params.R,
            threshold=self.stats.threshold,
            K=params.K,
            L_of_R=params.L_of_R,
            initial_norm=initial_norm,
            truncation_loss=loss,
            seed=self.config.seed,
            issues=self.issues.get_summary(),
        )
        write_pydantic_json(summary, out / "summary.json")
        self._write_issues()
        return summary

    def check_hypotheses(self) -> HypothesesRunReport:
        cfg = self.config
        report = self.hypotheses_report()
        L = estimate_lipschitz(cfg.operator_config, cfg.grid, cfg.hypotheses.lipschitz_pairs, cfg.seed)
        threshold = smallness_threshold(SolverParams.from_operator(cfg.operator_config, R=1.0, K=report.K, L_of_R=L))
        self.stats.K, self.stats.L_of_R, self.stats.threshold = report.K, L, threshold

        growth = k_growth(cfg.kernel, cfg.grid, cfg.operator_config.shift, cfg.hypotheses.doublings, cfg.threads)
        params = GaleanoParams(**cfg.galeano.model_dump(exclude={"v0"}))
        galeano = GaleanoSummary(
            infimum=galeano_infimum(params),
            strict_empty=galeano_admissible_radii(params, strict=True).is_empty,
            non_strict_radii=galeano_admissible_radii(params, strict=False).to_dict(),
            repaired_v0=cfg.galeano.v0,
            repaired_radii=galeano_admissible_radii(params, v0=cfg.galeano.v0).to_dict() if cfg.galeano.v0 else None,
        )
        result = HypothesesRunReport(
            hypotheses=report,
            L_of_R=L,
            threshold=threshold,
            galeano=galeano,
            k_growth=growth.to_dict(orient="records"),
            seed=cfg.seed,
        )
        write_pydantic_json(result, self.output_dir / "report.json")
        self._write_issues()
        return result

    def boltzmann_limit(self):
        cfg = self.config
        K = cfg.solver.K if cfg.solver.K is not None else self.hypotheses_report().K
        limit = cfg.limit
        # shared R: every run has C = 2 lambda K
        R = limit.safety * smallness_threshold(
            SolverParams.from_operator(
                OperatorConfig(mode=OperatorMode.BOLTZMANN, lambda_=limit.lambda_, kernel=cfg.kernel), R=1.0, K=K
            )
        )
        f0 = self.initial_datum(R)
        table = boltzmann_limit_sweep(
            f0,
            cfg.kernel,
            limit.lambda_,
            K,
            diameters=limit.diameters,
            safety=limit.safety,
            max_iter=cfg.solver.max_iter,
            tol=cfg.solver.tol,
            threads=cfg.threads,
            verbose=self.verbose,
            collector=self.issues,
        )
        self.stats.K, self.stats.R = K, R
        path = self.output_dir / "boltzmann_limit.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(path, index=False, float_format="%.17g")
        self._write_issues()
        return table

    def _write_issues(self):
        self.stats.issues = len(self.issues.issues)
        if self.issues.issues:
            self.issues.write_report(self.output_dir / "issues.jsonl")

    def print_summary(self):
        """Print run statistics."""
        print("\n" + "=" * 50)
        print("Run Summary")
        print("=" * 50)
        print(f"Operator sweeps:   {self.stats.sweeps}")
        if self.stats.K is not None:
            print(f"K (empirical):     {self.stats.K:.6e}")
        if self.stats.L_of_R is not None:
            print(f"L(R):              {self.stats.L_of_R:.6e}")
        if self.stats.threshold is not None:
            print(f"Threshold:         {self.stats.threshold:.6e}")
        if self.stats.R is not None:
            print(f"R:                 {self.stats.R:.6e}")
        if self.stats.converged is not None:
            print(f"Iterations:        {self.stats.iterations}")
            print(f"Converged:         {self.stats.converged}")
        self.issues.print_summary()
