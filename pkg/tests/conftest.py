"""
Shared fixtures: built-in problems, their meshes and transcriptions, seeded
generators and a random expression generator
"""
import numpy as np
import pytest

from sparsead import Transcription, build_mesh, builtin_problem

EXPRESSION_VARIABLES = ("x1", "x2", "u1", "t")


def random_expression(rng: np.random.Generator, depth: int = 4, names=EXPRESSION_VARIABLES) -> str:
    """
    Expression text over every operator and function of the grammar

    Quotients, logarithms, roots, tangents and variable powers are wrapped so
    their arguments stay inside the domain, keeping the result finite everywhere.
    """
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.7:
            return names[int(rng.integers(len(names)))]
        return f"{int(rng.integers(1, 7)) / 4:g}"
    a = random_expression(rng, depth - 1, names)
    choice = int(rng.integers(13))
    if choice == 0:
        return f"({a} + {random_expression(rng, depth - 1, names)})"
    if choice == 1:
        return f"({a} - {random_expression(rng, depth - 1, names)})"
    if choice == 2:
        return f"({a} * {random_expression(rng, depth - 1, names)})"
    if choice == 3:
        return f"sin({a})"
    if choice == 4:
        return f"cos({a})"
    if choice == 5:
        return f"(-{a})"
    if choice == 6:
        return f"({a})^2"
    if choice == 7:
        return f"({a} / (2 + sin({random_expression(rng, depth - 1, names)})))"
    if choice == 8:
        return f"log(2 + cos({a}))"
    if choice == 9:
        return f"sqrt(2 + sin({a}))"
    if choice == 10:
        return f"exp(sin({a}))"
    if choice == 11:
        return f"tan(sin({a}))/2"
    return f"(2 + sin({a}))^(cos({random_expression(rng, depth - 1, names)}))"


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


@pytest.fixture
def expression_generator():
    return random_expression


@pytest.fixture
def energy():
    spec, mesh_spec = builtin_problem("energy")
    return spec, build_mesh(mesh_spec)


@pytest.fixture
def nonlinear():
    spec, mesh_spec = builtin_problem("nonlinear")
    return spec, build_mesh(mesh_spec)


@pytest.fixture
def energy_transcription(energy):
    return Transcription(*energy)


@pytest.fixture
def nonlinear_transcription(nonlinear):
    return Transcription(*nonlinear)


@pytest.fixture
def energy_solution(energy):
    """Analytic solution x(t) = t, u = 1 on the degree-2 mesh: z = [0, 2/3, 1, 1, 1, 0, 1]."""
    _, mesh = energy
    return np.concatenate([mesh.support, np.ones(mesh.n), [0.0, 1.0]])
