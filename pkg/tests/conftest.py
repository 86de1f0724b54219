import functools

import numpy as np
import pytest

from hise_bem import bem
from hise_bem.geometry import icosphere
from hise_bem.materials import ContrastConfig, Material


@pytest.fixture(scope="session")
def unit():
    return Material(1.0, 1.0, 1.0)


@pytest.fixture(scope="session")
def contrast():
    return ContrastConfig(1e-6, 1e-4)


@functools.lru_cache(maxsize=None)
def sphere(subdiv, R=1.0):
    return icosphere(R, subdiv)


@functools.lru_cache(maxsize=None)
def static_operators(subdiv):
    """``(mesh, S0, K0*)`` on the unit icosphere, unit material."""
    m = Material(1.0, 1.0, 1.0)
    s = sphere(subdiv)
    return s, bem.assemble_single_layer(s, m, 0.0), bem.assemble_np_adjoint(s, m, 0.0)


@functools.lru_cache(maxsize=None)
def basis(subdiv):
    s, _, K = static_operators(subdiv)
    return bem.biorthogonal_basis(s, None, K)


def weighted(mesh, a, b):
    """Area-weighted pairing of two stacked density arrays ``(3F, k)``."""
    w = np.repeat(mesh.areas, 3)
    return a.conj().T @ (w[:, None] * b)
