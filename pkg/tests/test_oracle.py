import math

import numpy as np
import pytest

from sparsead import MeshSpec, ProblemSpec, build_mesh
from sparsead.coo import CooMatrix
from sparsead.errors import DimensionMismatchError, DomainError, NonFiniteStencilError, ShapeMismatchError
from sparsead.oracle import (
    Jet,
    JetMath,
    compare,
    dense_eval,
    dense_lagrangian_hessian,
    fd_gradient,
    fd_hessian,
    fd_jacobian,
)


# Dense jets

def test_jet_product():
    x, y = Jet.variable(3.0, 0, 2), Jet.variable(2.0, 1, 2)
    p = x * y
    assert p.value == 6.0
    np.testing.assert_array_equal(p.grad, [2.0, 3.0])
    np.testing.assert_array_equal(p.hess, [[0.0, 1.0], [1.0, 0.0]])


def test_jet_square_and_constant_powers():
    x = Jet.variable(3.0, 0, 1)
    s = x ** 2
    assert (s.value, s.grad[0], s.hess[0, 0]) == (9.0, 6.0, 2.0)
    r = x ** 0.5
    assert r.grad[0] == pytest.approx(0.5 / math.sqrt(3.0))
    assert r.hess[0, 0] == pytest.approx(-0.25 * 3.0 ** -1.5)
    assert (x ** 0).value == 1.0 and (x ** 0).grad[0] == 0.0


def test_jet_quotient():
    x, y = Jet.variable(3.0, 0, 2), Jet.variable(2.0, 1, 2)
    q = x / y
    assert q.value == 1.5
    np.testing.assert_allclose(q.grad, [0.5, -0.75])
    np.testing.assert_allclose(q.hess, [[0.0, -0.25], [-0.25, 0.75]])


def test_jet_variable_exponents():
    x, y = Jet.variable(3.0, 0, 2), Jet.variable(2.0, 1, 2)
    p = x ** y
    assert p.value == pytest.approx(9.0)
    np.testing.assert_allclose(p.grad, [6.0, 9.0 * math.log(3.0)])
    e = 2 ** x
    assert e.value == pytest.approx(8.0)
    assert e.grad[0] == pytest.approx(8.0 * math.log(2.0))


def test_jet_elementary_functions():
    x = Jet.variable(0.4, 0, 1)
    for fn, d1, d2 in [
        (JetMath.sin, math.cos(0.4), -math.sin(0.4)),
        (JetMath.cos, -math.sin(0.4), -math.cos(0.4)),
        (JetMath.tan, 1.0 / math.cos(0.4) ** 2, 2.0 * math.tan(0.4) / math.cos(0.4) ** 2),
        (JetMath.exp, math.exp(0.4), math.exp(0.4)),
        (JetMath.log, 2.5, -6.25),
        (JetMath.sqrt, 0.5 / math.sqrt(0.4), -0.25 * 0.4 ** -1.5),
    ]:
        jet = fn(x)
        assert jet.grad[0] == pytest.approx(d1, rel=1e-14)
        assert jet.hess[0, 0] == pytest.approx(d2, rel=1e-14)
    assert JetMath.sin(0.4) == math.sin(0.4)


def test_jet_domain_violations_become_nan():
    assert not JetMath.log(Jet.variable(-1.0, 0, 1)).is_finite()
    assert not JetMath.sqrt(Jet.variable(0.0, 0, 1)).is_finite()
    assert not Jet.constant(0.0, 1).reciprocal().is_finite()
    assert math.isnan((Jet.variable(1.0, 0, 1) / 0.0).value)
    assert math.isnan((Jet.variable(-2.0, 0, 1) ** 0.5).value)


# Dense per-mesh-point evaluation

def test_dense_energy_solution(energy, energy_solution):
    spec, mesh = energy
    dense = dense_eval(spec, mesh, energy_solution)
    assert dense.objective.value == pytest.approx(0.5, abs=1e-14)
    assert np.max(np.abs(dense.residual)) <= 1e-12
    assert dense.jacobian.shape == (6, 7)
    np.testing.assert_allclose(dense.objective.hess, dense.objective.hess.T)


def test_dense_eval_checks_length(energy):
    spec, mesh = energy
    with pytest.raises(DimensionMismatchError):
        dense_eval(spec, mesh, np.ones(5))


def test_dense_eval_reports_domain_errors():
    spec = ProblemSpec.from_strings(n_x=1, n_u=1, objective="u1", dynamics=["sqrt(x1)"])
    mesh = build_mesh(MeshSpec.uniform(1, 2))
    z = np.ones(7)
    z[0] = -1.0
    with pytest.raises(DomainError) as info:
        dense_eval(spec, mesh, z)
    assert (info.value.row, info.value.label) == (0, "dynamics[0]")


def test_dense_lagrangian_checks_multiplier_length(energy, energy_solution):
    spec, mesh = energy
    dense = dense_eval(spec, mesh, energy_solution)
    np.testing.assert_array_equal(dense_lagrangian_hessian(dense, 2.0, np.zeros(6)), 2.0 * dense.objective.hess)
    with pytest.raises(DimensionMismatchError):
        dense_lagrangian_hessian(dense, 1.0, np.zeros(5))


# Finite differences

def test_fd_gradient_of_quadratic():
    gradient = fd_gradient(lambda z: z[0] ** 2 + 3.0 * z[1], [2.0, 1.0])
    np.testing.assert_allclose(gradient, [4.0, 3.0], rtol=1e-8)


def test_fd_jacobian_shape_and_values():
    jacobian = fd_jacobian(lambda z: np.array([z[0] * z[1], z[0]]), [2.0, 3.0], 1e-6)
    np.testing.assert_allclose(jacobian, [[3.0, 2.0], [1.0, 0.0]], rtol=1e-8, atol=1e-10)


def test_fd_hessian_is_symmetric():
    hessian = fd_hessian(lambda z: np.array([2.0 * z[0] * z[1], z[0] ** 2]), [2.0, 3.0])
    np.testing.assert_array_equal(hessian, hessian.T)
    np.testing.assert_allclose(hessian, [[6.0, 4.0], [4.0, 0.0]], rtol=1e-8, atol=1e-8)


def test_fd_stencil_must_stay_finite():
    with pytest.raises(NonFiniteStencilError):
        fd_gradient(lambda z: float("nan") if z[0] < 0 else z[0], [0.0])


# Comparison

def test_compare_relative_error():
    report = compare(np.array([1.0, 200.0]), np.array([1.0, 200.0 + 2e-5]), 1e-6, "values")
    assert report.passed
    assert report.max_abs == pytest.approx(2e-5)
    assert report.max_rel == pytest.approx(1e-7)
    assert report.worst == (1,)
    assert "values" in report.render() and "PASS" in report.render()


def test_compare_failure_points_at_worst_entry():
    report = compare(np.array([[1.0, 0.0], [0.0, 1.0]]), np.eye(2) + [[0.0, 0.0], [0.5, 0.0]], 1e-6)
    assert not report.passed
    assert report.worst == (1, 0)
    assert "FAIL" in report.render()


def test_compare_lower_triangle_against_symmetric_reference():
    lower = CooMatrix.from_triplets([0, 1, 1], [0, 0, 1], [2.0, 3.0, 4.0], (2, 2))
    full = np.array([[2.0, 3.0], [3.0, 4.0]])
    assert compare(lower, full, 1e-12, lower=True).passed
    assert not compare(lower, full, 1e-12).passed


def test_compare_shapes_must_agree():
    with pytest.raises(ShapeMismatchError):
        compare(np.zeros(3), np.zeros(4), 1e-6, "gradient")


def test_compare_empty_passes():
    report = compare(np.zeros(0), np.zeros(0), 1e-6)
    assert report.passed and report.worst == ()
