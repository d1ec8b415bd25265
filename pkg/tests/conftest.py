"""Shared fixtures: tiny lattices keep every operator sweep under a second."""

import shutil
import tempfile
from pathlib import Path

import numpy as np
import pytest

from enskog_mild_lib.mild.kernel import KernelSpec, YFactorSpec, YKind
from enskog_mild_lib.mild.lattice import FieldLattice, GridSpec
from enskog_mild_lib.mild.operator import OperatorConfig, OperatorMode


@pytest.fixture
def temp_dir():
    """Create a temporary output directory."""
    path = Path(tempfile.mkdtemp())
    yield path
    shutil.rmtree(path, ignore_errors=True)


@pytest.fixture
def tiny_grid():
    """3^3 x 3^3 nodes, 6 sphere nodes, 3 time nodes."""
    return GridSpec(x_max=2.0, p_max=2.0, n_x=3, n_p=3, n_omega=6, t_max=0.5, n_t=3)


@pytest.fixture
def kernel():
    return KernelSpec()


@pytest.fixture
def boltzmann_cfg(kernel):
    return OperatorConfig(mode=OperatorMode.BOLTZMANN, lambda_=1.0, kernel=kernel)


@pytest.fixture
def enskog_cfg(kernel):
    """Enskog mode with the density-dependent factor Y = 1 + 0.3 rho."""
    return OperatorConfig(a=0.1, mode=OperatorMode.ENSKOG, kernel=kernel, y=YFactorSpec(kind=YKind.LINEAR, b=0.3))


def gaussian_field(grid: GridSpec, amplitude: float = 1.0, x_width: float = 1.0, p_width: float = 1.0):
    """amplitude * exp(-|x|^2 / x_width^2 - |p|^2 / p_width^2) on the lattice."""
    return FieldLattice.from_function(
        grid,
        lambda x, p: amplitude * np.exp(-np.sum(x * x, axis=1) / x_width ** 2 - np.sum(p * p, axis=1) / p_width ** 2),
    )


@pytest.fixture
def gaussian(tiny_grid):
    return gaussian_field(tiny_grid, amplitude=0.05)
