"""
Oracle - independent checks for the sparse derivatives

Two reference paths: central finite differences, and a dense second-order
forward evaluator that walks the mesh one point at a time with full
(value, gradient, Hessian) jets over the point's local variables. The dense
path shares only the Ast evaluator with the sparse pipeline.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

import config
from .coo import CooMatrix, SparseVector
from .errors import DimensionMismatchError, DomainError, NonFiniteStencilError, ShapeMismatchError
from .expr import evaluate
from .lgr import Mesh
from .transcribe import DecisionLayout, ProblemSpec


# ---------------------------------------------------------------------------
# Dense jets
# ---------------------------------------------------------------------------

class Jet:
    """Value, dense gradient and dense Hessian of a quantity over L local variables"""

    __slots__ = ("value", "grad", "hess")

    def __init__(self, value: float, grad: np.ndarray, hess: np.ndarray):
        self.value = float(value)
        self.grad = grad
        self.hess = hess

    @classmethod
    def variable(cls, value: float, position: int, size: int) -> "Jet":
        grad = np.zeros(size)
        grad[position] = 1.0
        return cls(value, grad, np.zeros((size, size)))

    @classmethod
    def constant(cls, value: float, size: int) -> "Jet":
        return cls(value, np.zeros(size), np.zeros((size, size)))

    def _lift(self, other) -> "Jet":
        return other if isinstance(other, Jet) else Jet.constant(other, self.grad.size)

    def chain(self, f: float, df: float, d2f: float) -> "Jet":
        """Compose a univariate function with value f, slope df and curvature d2f at self.value."""
        return Jet(f, df * self.grad, df * self.hess + d2f * np.outer(self.grad, self.grad))

    def __add__(self, other):
        other = self._lift(other)
        return Jet(self.value + other.value, self.grad + other.grad, self.hess + other.hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.value, -self.grad, -self.hess)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        other = self._lift(other)
        cross = np.outer(self.grad, other.grad)
        return Jet(
            self.value * other.value,
            self.value * other.grad + other.value * self.grad,
            self.value * other.hess + other.value * self.hess + cross + cross.T,
        )

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        v = self.value
        if v == 0.0:
            return self.chain(math.nan, math.nan, math.nan)
        return self.chain(1.0 / v, -1.0 / v ** 2, 2.0 / v ** 3)

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / other if other else math.nan)

    def __rtruediv__(self, other):
        return self._lift(other) * self.reciprocal()

    def __pow__(self, other):
        if isinstance(other, Jet):
            return JetMath.exp(other * JetMath.log(self))
        c = float(other)
        if c == 0.0:
            return Jet.constant(1.0, self.grad.size)
        if c == 1.0:
            return self
        v = self.value
        d2f = c * (c - 1.0) * _power(v, c - 2.0) if c != 2.0 else 2.0
        return self.chain(_power(v, c), c * _power(v, c - 1.0), d2f)

    def __rpow__(self, other):
        return JetMath.exp(self * _nan_on_error(math.log, float(other)))

    def is_finite(self) -> bool:
        return math.isfinite(self.value) and np.all(np.isfinite(self.grad)) and np.all(np.isfinite(self.hess))


def _nan_on_error(fn: Callable[[float], float], v: float) -> float:
    try:
        return fn(v)
    except (ValueError, OverflowError, ZeroDivisionError):
        return math.nan


def _power(v: float, c: float) -> float:
    if v < 0.0 and not c.is_integer():
        return math.nan
    try:
        return v ** c
    except (OverflowError, ZeroDivisionError):
        return math.nan


class JetMath:
    """Function namespace for expr.evaluate over Jet numbers"""

    @staticmethod
    def sin(a):
        if not isinstance(a, Jet):
            return math.sin(a)
        s, c = math.sin(a.value), math.cos(a.value)
        return a.chain(s, c, -s)

    @staticmethod
    def cos(a):
        if not isinstance(a, Jet):
            return math.cos(a)
        s, c = math.sin(a.value), math.cos(a.value)
        return a.chain(c, -s, -c)

    @staticmethod
    def tan(a):
        if not isinstance(a, Jet):
            return math.tan(a)
        t = math.tan(a.value)
        sec2 = 1.0 + t * t
        return a.chain(t, sec2, 2.0 * t * sec2)

    @staticmethod
    def exp(a):
        if not isinstance(a, Jet):
            return _nan_on_error(math.exp, a)
        e = _nan_on_error(math.exp, a.value)
        return a.chain(e, e, e)

    @staticmethod
    def log(a):
        if not isinstance(a, Jet):
            return _nan_on_error(math.log, a)
        v = a.value
        return a.chain(_nan_on_error(math.log, v), 1.0 / v if v else math.nan, -1.0 / v ** 2 if v else math.nan)

    @staticmethod
    def sqrt(a):
        if not isinstance(a, Jet):
            return _nan_on_error(math.sqrt, a)
        r = _nan_on_error(math.sqrt, a.value)
        if not r > 0.0:
            return a.chain(r, math.nan, math.nan)
        return a.chain(r, 0.5 / r, -0.25 / (r * a.value))


# ---------------------------------------------------------------------------
# Dense per-mesh-point evaluation
# ---------------------------------------------------------------------------

@dataclass
class DenseDerivs:
    """Value, dense gradient over n_z and dense symmetric Hessian"""

    value: float
    grad: np.ndarray
    hess: np.ndarray

    @classmethod
    def zeros(cls, n_z: int) -> "DenseDerivs":
        return cls(0.0, np.zeros(n_z), np.zeros((n_z, n_z)))


@dataclass
class DenseEvaluation:
    objective: DenseDerivs
    constraints: List[DenseDerivs]

    @property
    def residual(self) -> np.ndarray:
        return np.array([c.value for c in self.constraints])

    @property
    def jacobian(self) -> np.ndarray:
        return np.array([c.grad for c in self.constraints]).reshape(len(self.constraints), -1)


def _scatter(target: DenseDerivs, jet: Jet, index: np.ndarray, scale: float = 1.0) -> None:
    target.value += scale * jet.value
    np.add.at(target.grad, index, scale * jet.grad)
    target.hess[np.ix_(index, index)] += scale * jet.hess


def dense_eval(spec: ProblemSpec, mesh: Mesh, z) -> DenseEvaluation:
    """
    Objective and every constraint row with dense derivatives

    Args:
        spec: Problem description
        mesh: Collocation mesh
        z: Decision vector of length n_z

    Returns:
        DenseEvaluation with rows ordered like Transcription.eval_constraints
    """
    layout = DecisionLayout(spec.n_x, spec.n_u, mesh.n)
    n, n_z = mesh.n, layout.n_z
    z = np.asarray(z, dtype=float).ravel()
    if z.size != n_z:
        raise DimensionMismatchError(f"decision vector has length {z.size}, expected n_z = {n_z}")
    split = layout.split(z)
    D = mesh.D.toarray()
    size = spec.n_x + spec.n_u + 2

    objective = DenseDerivs.zeros(n_z)
    dynamics = [DenseDerivs.zeros(n_z) for _ in range(spec.n_x * n)]
    for k in range(n):
        index = np.array(
            [layout.state_offset(j) + k for j in range(spec.n_x)]
            + [layout.control_offset(i) + k for i in range(spec.n_u)]
            + [layout.t0_index, layout.tf_index]
        )
        env = {f"x{j + 1}": Jet.variable(split.X[j, k], j, size) for j in range(spec.n_x)}
        env.update({f"u{i + 1}": Jet.variable(split.U[i, k], spec.n_x + i, size) for i in range(spec.n_u)})
        t0 = Jet.variable(split.t0, size - 2, size)
        tf = Jet.variable(split.tf, size - 1, size)
        dt = tf - t0
        m = float(mesh.M[k])
        env["t"] = (1.0 - m) * t0 + m * tf

        rows = [("objective", spec.objective, objective, float(mesh.W[k]))]
        rows += [
            (f"dynamics[{j}]", g, dynamics[j * n + k], -1.0) for j, g in enumerate(spec.dynamics)
        ]
        for label, ast, target, scale in rows:
            product = evaluate(ast, env, JetMath) * dt
            if not isinstance(product, Jet) or not product.is_finite():
                raise DomainError(k, label)
            _scatter(target, product, index, scale)

    for j in range(spec.n_x):
        for k in range(n):
            row = dynamics[j * n + k]
            row.value += float(D[k] @ split.X[j])
            row.grad[layout.state_offset(j):layout.state_offset(j) + n + 1] += D[k]

    boundary = []
    fixed = [(layout.state_offset(j), b) for j, b in enumerate(spec.x_initial)]
    fixed += [(layout.state_offset(j) + n, b) for j, b in enumerate(spec.x_final)]
    fixed += [(layout.t0_index, spec.t0), (layout.tf_index, spec.tf)]
    for index, bound in fixed:
        if bound.is_fixed:
            row = DenseDerivs.zeros(n_z)
            row.value = z[index] - bound.fixed
            row.grad[index] = 1.0
            boundary.append(row)
    return DenseEvaluation(objective=objective, constraints=dynamics + boundary)


def dense_lagrangian_hessian(dense: DenseEvaluation, sigma: float, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float).ravel()
    if lam.size != len(dense.constraints):
        raise DimensionMismatchError(
            f"multiplier vector has length {lam.size}, expected {len(dense.constraints)}"
        )
    hessian = sigma * dense.objective.hess
    for weight, row in zip(lam, dense.constraints):
        if weight:
            hessian = hessian + weight * row.hess
    return hessian


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

def _stencil(fun: Callable, z: np.ndarray, i: int, h: float):
    step = h * max(1.0, abs(z[i]))
    plus, minus = z.copy(), z.copy()
    plus[i] += step
    minus[i] -= step
    f_plus = np.asarray(fun(plus), dtype=float)
    f_minus = np.asarray(fun(minus), dtype=float)
    if not (np.all(np.isfinite(f_plus)) and np.all(np.isfinite(f_minus))):
        raise NonFiniteStencilError(f"non-finite function value in the stencil of coordinate {i}")
    return (f_plus - f_minus) / (plus[i] - minus[i])


def fd_gradient(fun: Callable[[np.ndarray], float], z, h: Optional[float] = None) -> np.ndarray:
    """
    Central-difference gradient with per-coordinate step h * max(1, |z_i|)

    Raises:
        NonFiniteStencilError: fun is not finite somewhere in the 2 n_z stencil
    """
    h = config.FD_STEP if h is None else h
    z = np.asarray(z, dtype=float).ravel()
    return np.array([float(_stencil(fun, z, i, h)) for i in range(z.size)])


def fd_jacobian(fun: Callable[[np.ndarray], np.ndarray], z, h: Optional[float] = None) -> np.ndarray:
    h = config.FD_STEP if h is None else h
    z = np.asarray(z, dtype=float).ravel()
    columns = [np.atleast_1d(_stencil(fun, z, i, h)) for i in range(z.size)]
    return np.column_stack(columns) if columns else np.zeros((0, 0))


def fd_hessian(grad_fun: Callable[[np.ndarray], np.ndarray], z, h: Optional[float] = None) -> np.ndarray:
    """Differences of exact gradients, symmetrized."""
    jacobian = fd_jacobian(grad_fun, z, h)
    return 0.5 * (jacobian + jacobian.T)


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------

@dataclass
class CompareReport:
    label: str
    max_abs: float
    max_rel: float
    worst: Tuple[int, ...]
    tol: float
    passed: bool

    def render(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        where = ",".join(str(i) for i in self.worst) if self.worst else "-"
        return (
            f"{self.label:<32} max_abs={self.max_abs:.3e}  max_rel={self.max_rel:.3e}  "
            f"worst=({where})  tol={self.tol:.1e}  {status}"
        )


Comparable = Union[CooMatrix, SparseVector, np.ndarray]


def _dense(value: Comparable) -> np.ndarray:
    if isinstance(value, (CooMatrix, SparseVector)):
        return value.toarray()
    return np.asarray(value, dtype=float)


def compare(actual: Comparable, reference, tol: float, label: str = "", lower: bool = False) -> CompareReport:
    """
    Entry-wise comparison with relative error |a - r| / max(1, |r|)

    Args:
        actual: Sparse result (or dense array)
        reference: Dense reference of the same shape
        tol: Largest relative error that still passes
        label: Name shown in the rendered report
        lower: Fold the reference to its lower triangle first

    Returns:
        CompareReport; passed iff max relative error <= tol
    """
    actual = _dense(actual)
    reference = _dense(reference)
    if actual.shape != reference.shape:
        raise ShapeMismatchError(f"{label or 'comparison'}: shapes {actual.shape} and {reference.shape} differ")
    if lower:
        reference = np.tril(reference)
        actual = np.tril(actual)
    error = np.abs(actual - reference)
    relative = error / np.maximum(1.0, np.abs(reference))
    if error.size == 0:
        return CompareReport(label, 0.0, 0.0, (), tol, True)
    worst = tuple(int(i) for i in np.unravel_index(int(np.argmax(relative)), relative.shape))
    max_rel = float(relative.max())
    return CompareReport(label, float(error.max()), max_rel, worst, tol, bool(max_rel <= tol))
