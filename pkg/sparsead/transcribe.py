"""
Transcription - turn an optimal control problem and an LGR mesh into NLP callbacks

The discretized problem is

    J = W^T (F dt)                  objective
    D Xbar - G dt = 0               dynamics, one row per state and mesh point
    boundary rows                   fixed initial/final states and times

where F and every column of G are evaluated row-wise over the mesh. One
vectorized graph holds the FΔt node and one GΔt node per state; the linear D
part and the boundary rows are constant triplets added at export.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Tuple, Union

import numpy as np

import config
from .base_component import BaseComponent
from .coo import CooMatrix, SparseVector
from .errors import DimensionMismatchError, IndexOutOfRangeError, NonFiniteInputError, ProblemFileError
from .expr import Ast, ColumnPartials, parse, partial_spec
from .graph import NodeId, PartialDerivs, ScalarGraph, half_to_lower
from .lgr import Mesh, MeshSpec, time_map
from .vecgraph import SCALAR, VECTOR, VecGraph


# ---------------------------------------------------------------------------
# Problem description
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Bound:
    """A boundary value that is either fixed to a number or left free"""

    fixed: Optional[float] = None

    @property
    def is_fixed(self) -> bool:
        return self.fixed is not None

    @classmethod
    def parse(cls, raw: Any, key: str) -> "Bound":
        if raw == "free":
            return cls()
        if isinstance(raw, dict) and set(raw) == {"fixed"} and _is_number(raw["fixed"]):
            return cls(float(raw["fixed"]))
        raise ProblemFileError(f"{key}: expected {{\"fixed\": number}} or \"free\", got {raw!r}")

    def to_json(self) -> Union[str, Dict[str, float]]:
        return {"fixed": self.fixed} if self.is_fixed else "free"


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


@dataclass(frozen=True)
class ProblemSpec:
    """Continuous problem: integrand f, dynamics g and boundary conditions"""

    n_x: int
    n_u: int
    objective: Ast
    dynamics: Tuple[Ast, ...]
    t0: Bound = Bound()
    tf: Bound = Bound()
    x_initial: Tuple[Bound, ...] = ()
    x_final: Tuple[Bound, ...] = ()
    name: str = "problem"

    def __post_init__(self):
        object.__setattr__(self, "dynamics", tuple(self.dynamics))
        object.__setattr__(self, "x_initial", tuple(self.x_initial) or (Bound(),) * self.n_x)
        object.__setattr__(self, "x_final", tuple(self.x_final) or (Bound(),) * self.n_x)
        if self.n_x < 1 or self.n_u < 0:
            raise DimensionMismatchError(f"need n_x >= 1 and n_u >= 0, got n_x={self.n_x}, n_u={self.n_u}")
        for what, items in (("dynamics", self.dynamics), ("x_initial", self.x_initial), ("x_final", self.x_final)):
            if len(items) != self.n_x:
                raise DimensionMismatchError(f"{what} has {len(items)} entries, expected n_x = {self.n_x}")

    @classmethod
    def from_strings(
        cls,
        n_x: int,
        n_u: int,
        objective: str,
        dynamics: List[str],
        **bounds,
    ) -> "ProblemSpec":
        """Parse the objective and dynamics text against the declared variable counts."""
        return cls(
            n_x=n_x,
            n_u=n_u,
            objective=parse(objective, n_x, n_u),
            dynamics=tuple(parse(text, n_x, n_u) for text in dynamics),
            **bounds,
        )

    @property
    def argument_names(self) -> Tuple[str, ...]:
        """Local variables of one mesh row, in the order of the F and G node arguments."""
        return (
            tuple(f"x{j + 1}" for j in range(self.n_x))
            + tuple(f"u{i + 1}" for i in range(self.n_u))
            + ("t",)
        )


def _require(raw: Mapping[str, Any], key: str, source: str) -> Any:
    if key not in raw:
        raise ProblemFileError(f"{source}: missing key {key!r}")
    return raw[key]


def problem_from_dict(raw: Mapping[str, Any], source: str = "problem") -> Tuple[ProblemSpec, MeshSpec]:
    """
    Build the problem and its mesh from the JSON problem-file layout

    Args:
        raw: Decoded problem file
        source: Name used in error messages

    Returns:
        (ProblemSpec, MeshSpec)
    """
    if not isinstance(raw, dict):
        raise ProblemFileError(f"{source}: top level must be an object")
    n_x = _require(raw, "n_x", source)
    n_u = _require(raw, "n_u", source)
    if not (isinstance(n_x, int) and not isinstance(n_x, bool) and n_x >= 1):
        raise ProblemFileError(f"{source}: n_x must be a positive integer, got {n_x!r}")
    if not (isinstance(n_u, int) and not isinstance(n_u, bool) and n_u >= 0):
        raise ProblemFileError(f"{source}: n_u must be a non-negative integer, got {n_u!r}")

    objective = _require(raw, "objective", source)
    dynamics = _require(raw, "dynamics", source)
    if not isinstance(objective, str):
        raise ProblemFileError(f"{source}: objective must be a string")
    if not isinstance(dynamics, list) or not all(isinstance(item, str) for item in dynamics):
        raise ProblemFileError(f"{source}: dynamics must be a list of strings")
    if len(dynamics) != n_x:
        raise ProblemFileError(f"{source}: dynamics has {len(dynamics)} entries, expected n_x = {n_x}")

    x_bounds = {}
    for key in ("x_initial", "x_final"):
        items = _require(raw, key, source)
        if not isinstance(items, list) or len(items) != n_x:
            raise ProblemFileError(f"{source}: {key} must be a list of {n_x} bounds")
        x_bounds[key] = tuple(Bound.parse(item, f"{source}: {key}[{j}]") for j, item in enumerate(items))

    mesh = _require(raw, "mesh", source)
    if not isinstance(mesh, dict):
        raise ProblemFileError(f"{source}: mesh must be an object")
    try:
        mesh_spec = MeshSpec(
            boundaries=tuple(_require(mesh, "boundaries", f"{source}: mesh")),
            degrees=tuple(_require(mesh, "degrees", f"{source}: mesh")),
        )
    except (TypeError, ValueError) as e:
        raise ProblemFileError(f"{source}: malformed mesh ({e})") from e

    spec = ProblemSpec.from_strings(
        n_x,
        n_u,
        objective,
        dynamics,
        t0=Bound.parse(_require(raw, "t0", source), f"{source}: t0"),
        tf=Bound.parse(_require(raw, "tf", source), f"{source}: tf"),
        name=str(raw.get("name", Path(source).stem)),
        **x_bounds,
    )
    return spec, mesh_spec


def load_problem(path: Union[str, Path]) -> Tuple[ProblemSpec, MeshSpec]:
    """Read a UTF-8 JSON problem file; OSError propagates unchanged."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ProblemFileError(f"{path}: invalid JSON ({e.msg} at line {e.lineno})") from e
    return problem_from_dict(raw, source=str(path))


BUILTIN_PROBLEMS: Dict[str, Dict[str, Any]] = {
    "energy": {
        "name": "energy",
        "n_x": 1,
        "n_u": 1,
        "objective": "u1^2/2",
        "dynamics": ["u1"],
        "t0": {"fixed": 0.0},
        "tf": {"fixed": 1.0},
        "x_initial": [{"fixed": 0.0}],
        "x_final": [{"fixed": 1.0}],
        "mesh": {"boundaries": [0, 1], "degrees": [2]},
    },
    "nonlinear": {
        "name": "nonlinear",
        "n_x": 2,
        "n_u": 1,
        "objective": "u1^2 + x1*x2",
        "dynamics": ["x2", "u1 - x1^2"],
        "t0": {"fixed": 0.0},
        "tf": "free",
        "x_initial": [{"fixed": 1.0}, {"fixed": 0.0}],
        "x_final": ["free", "free"],
        "mesh": {"boundaries": [0, 0.5, 1], "degrees": [3, 3]},
    },
}


def builtin_problem(name: str) -> Tuple[ProblemSpec, MeshSpec]:
    if name not in BUILTIN_PROBLEMS:
        raise ProblemFileError(f"unknown built-in problem {name!r}; choose from {', '.join(BUILTIN_PROBLEMS)}")
    return problem_from_dict(BUILTIN_PROBLEMS[name], source=name)


# ---------------------------------------------------------------------------
# Decision vector
# ---------------------------------------------------------------------------

class DecisionSplit(NamedTuple):
    X: np.ndarray  # n_x x (N+1), support-node values per state
    U: np.ndarray  # n_u x N
    t0: float
    tf: float


@dataclass(frozen=True)
class DecisionLayout:
    """Positions of Xbar columns, U columns, t0 and tf inside z"""

    n_x: int
    n_u: int
    n: int

    @property
    def n_z(self) -> int:
        return self.n_x * (self.n + 1) + self.n_u * self.n + 2

    @property
    def t0_index(self) -> int:
        return self.n_z - 2

    @property
    def tf_index(self) -> int:
        return self.n_z - 1

    def state_offset(self, j: int) -> int:
        return j * (self.n + 1)

    def control_offset(self, i: int) -> int:
        return self.n_x * (self.n + 1) + i * self.n

    def split(self, z) -> DecisionSplit:
        z = np.asarray(z, dtype=float)
        states = self.n_x * (self.n + 1)
        X = z[:states].reshape(self.n_x, self.n + 1)
        U = z[states:states + self.n_u * self.n].reshape(self.n_u, self.n)
        return DecisionSplit(X=X, U=U, t0=float(z[self.t0_index]), tf=float(z[self.tf_index]))

    def ones_point(self) -> np.ndarray:
        """Every state and control entry 1 on the time interval [0, 1]."""
        z = np.ones(self.n_z)
        z[self.t0_index] = 0.0
        z[self.tf_index] = 1.0
        return z

    def random_point(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        return rng.uniform(config.RANDOM_POINT_LOW, config.RANDOM_POINT_HIGH, self.n_z)


# ---------------------------------------------------------------------------
# Transcription
# ---------------------------------------------------------------------------

@dataclass
class NlpFunctions:
    """Everything an NLP solver asks for at one point"""

    objective: float
    gradient: SparseVector
    constraints: np.ndarray
    jacobian: CooMatrix
    hessian: CooMatrix


@dataclass
class _Triplets:
    rows: List[np.ndarray] = field(default_factory=list)
    cols: List[np.ndarray] = field(default_factory=list)
    vals: List[np.ndarray] = field(default_factory=list)

    def add(self, rows, cols, vals):
        self.rows.append(np.asarray(rows, dtype=np.int64))
        self.cols.append(np.asarray(cols, dtype=np.int64))
        self.vals.append(np.asarray(vals, dtype=float))

    def joined(self):
        if not self.rows:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty, np.empty(0)
        return np.concatenate(self.rows), np.concatenate(self.cols), np.concatenate(self.vals)


class Transcription(BaseComponent):
    """Vectorized graph of the discretized problem plus its constant linear parts"""

    def __init__(self, spec: ProblemSpec, mesh: Mesh):
        super().__init__(
            name="Transcription",
            role="LGR collocation transcription of one problem",
        )
        self.spec = spec
        self.mesh = mesh
        self.layout = DecisionLayout(spec.n_x, spec.n_u, mesh.n)
        self.n_z = self.layout.n_z

        args = spec.argument_names
        self.objective_partials: ColumnPartials = partial_spec(spec.objective, args).compile()
        self.dynamics_partials: List[ColumnPartials] = [partial_spec(g, args).compile() for g in spec.dynamics]

        self.graph = VecGraph(self.n_z, mesh.n)
        self.nodes: Dict[str, NodeId] = {}
        self._build_graph()
        self._build_linear_parts()
        self._point: Optional[np.ndarray] = None
        self._row_graphs: Dict[Optional[int], Tuple[ScalarGraph, Dict[str, Any]]] = {}

        self.log(
            f"[+] Built {len(self.graph)} graph nodes for N={mesh.n}, n_z={self.n_z}, "
            f"{self.n_constraints} constraint rows"
        )

    def _build_graph(self):
        graph, layout, M = self.graph, self.layout, self.mesh.M
        nodes = self.nodes
        nodes["t0"] = graph.add_scalar_input(layout.t0_index)
        nodes["tf"] = graph.add_scalar_input(layout.tf_index)
        for j in range(self.spec.n_x):
            nodes[f"X{j + 1}"] = graph.add_vector_input(layout.state_offset(j), self.mesh.n)
        for i in range(self.spec.n_u):
            nodes[f"U{i + 1}"] = graph.add_vector_input(layout.control_offset(i), self.mesh.n)
        nodes["dt"] = graph.add_vec_node(
            SCALAR, (nodes["t0"], nodes["tf"]), g_i=(0, 1), g=[-1.0, 1.0], value=1.0
        )
        nodes["T"] = graph.add_vec_node(
            VECTOR, (nodes["t0"], nodes["tf"]), g_i=(0, 1), g=np.column_stack([1.0 - M, M]), value=M
        )
        local = (
            [nodes[f"X{j + 1}"] for j in range(self.spec.n_x)]
            + [nodes[f"U{i + 1}"] for i in range(self.spec.n_u)]
            + [nodes["T"]]
        )
        outputs = [("F", self.objective_partials)] + [
            (f"G{j + 1}", partials) for j, partials in enumerate(self.dynamics_partials)
        ]
        for name, partials in outputs:
            nodes[name] = graph.add_vec_node(
                VECTOR, local, g_i=partials.g_i, h_r=partials.h_r, h_c=partials.h_c
            )
            # product with dt: d2/(dF ddt) = 1, stored once off the diagonal
            nodes[f"{name}_dt"] = graph.add_vec_node(
                VECTOR, (nodes[name], nodes["dt"]), g_i=(0, 1), h_r=(0,), h_c=(1,), h=[[1.0]]
            )
        self.output_nodes = [nodes["F_dt"]] + [nodes[f"G{j + 1}_dt"] for j in range(self.spec.n_x)]

    def _build_linear_parts(self):
        n, layout, D = self.mesh.n, self.layout, self.mesh.D
        self.n_dynamics = self.spec.n_x * n

        rows, cols, vals = [], [], []
        for j in range(self.spec.n_x):
            rows.append(j * n + D.rows)
            cols.append(layout.state_offset(j) + D.cols)
            vals.append(D.vals)
        self._d_rows = np.concatenate(rows)
        self._d_cols = np.concatenate(cols)
        self._d_vals = np.concatenate(vals)

        boundary = []
        for j, bound in enumerate(self.spec.x_initial):
            if bound.is_fixed:
                boundary.append((layout.state_offset(j), bound.fixed))
        for j, bound in enumerate(self.spec.x_final):
            if bound.is_fixed:
                boundary.append((layout.state_offset(j) + n, bound.fixed))
        if self.spec.t0.is_fixed:
            boundary.append((layout.t0_index, self.spec.t0.fixed))
        if self.spec.tf.is_fixed:
            boundary.append((layout.tf_index, self.spec.tf.fixed))
        self._boundary_index = np.array([index for index, _ in boundary], dtype=np.int64)
        self._boundary_value = np.array([value for _, value in boundary], dtype=float)
        self.n_constraints = self.n_dynamics + len(boundary)
        self.W = self.mesh.W

    # Evaluation

    def _check_point(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float).ravel()
        if z.size != self.n_z:
            raise DimensionMismatchError(f"decision vector has length {z.size}, expected n_z = {self.n_z}")
        if not np.all(np.isfinite(z)):
            raise NonFiniteInputError(f"decision vector has a non-finite entry at {int(np.argmax(~np.isfinite(z)))}")
        return z

    def _bindings(self, split: DecisionSplit, T: np.ndarray) -> Dict[str, np.ndarray]:
        n = self.mesh.n
        bindings = {f"x{j + 1}": split.X[j, :n] for j in range(self.spec.n_x)}
        bindings.update({f"u{i + 1}": split.U[i] for i in range(self.spec.n_u)})
        bindings["t"] = T
        return bindings

    def _sweep(self, z) -> np.ndarray:
        """Evaluate partials at z and run the vectorized sweep; reuses the last sweep at the same z."""
        z = self._check_point(z)
        if self._point is not None and np.array_equal(z, self._point):
            return z
        graph, nodes, n = self.graph, self.nodes, self.mesh.n
        split = self.layout.split(z)
        dt = split.tf - split.t0
        T = time_map(split.t0, split.tf, self.mesh.M)
        bindings = self._bindings(split, T)

        outputs = [("F", "objective", self.objective_partials)] + [
            (f"G{j + 1}", f"dynamics[{j}]", partials) for j, partials in enumerate(self.dynamics_partials)
        ]
        # a DomainError here leaves the workspace untouched
        evaluated = [(name, partials.evaluate(bindings, n, label=label)) for name, label, partials in outputs]

        self._point = None
        graph.set_partials(nodes["t0"], value=split.t0)
        graph.set_partials(nodes["tf"], value=split.tf)
        for j in range(self.spec.n_x):
            graph.set_partials(nodes[f"X{j + 1}"], value=split.X[j, :n])
        for i in range(self.spec.n_u):
            graph.set_partials(nodes[f"U{i + 1}"], value=split.U[i])
        graph.set_partials(nodes["dt"], value=dt)
        graph.set_partials(nodes["T"], value=T)
        for name, (value, g, h) in evaluated:
            graph.set_partials(nodes[name], value=value, g=g, h=h)
            graph.set_partials(
                nodes[f"{name}_dt"],
                value=value * dt,
                g=np.column_stack([np.full(n, dt), value]),
            )
        graph.vec_forward_sweep()
        self._point = z.copy()
        return z

    def eval_objective(self, z) -> Tuple[float, SparseVector, CooMatrix]:
        """
        Objective J = W^T (F dt) with its gradient and lower-triangle Hessian

        Args:
            z: Decision vector of length n_z

        Returns:
            (J, deduplicated gradient, Hessian lower triangle)
        """
        self._sweep(z)
        node = self.nodes["F_dt"]
        J = float(self.W @ self.graph.value(node))
        index, row, value = self.graph.flatten_gradient(node)
        gradient = SparseVector.from_pairs(index, self.W[row] * value, self.n_z)
        r, c, row, value = self.graph.flatten_hessian(node)
        hessian = half_to_lower(r, c, self.W[row] * value, self.n_z)
        return J, gradient, hessian

    def _constraint_triplets(self, values: bool) -> _Triplets:
        triplets = _Triplets()
        triplets.add(self._d_rows, self._d_cols, self._d_vals)
        for j in range(self.spec.n_x):
            node = self.nodes[f"G{j + 1}_dt"]
            if values:
                index, row, value = self.graph.flatten_gradient(node)
            else:
                index, row = self.graph.gradient_pattern(node)
                value = np.zeros(index.size)
            triplets.add(j * self.mesh.n + row, index, -value)
        boundary_rows = self.n_dynamics + np.arange(self._boundary_index.size)
        triplets.add(boundary_rows, self._boundary_index, np.ones(self._boundary_index.size))
        return triplets

    def eval_constraints(self, z) -> Tuple[np.ndarray, CooMatrix]:
        """
        Residuals D Xbar - G dt (state-major) followed by the boundary rows

        Returns:
            (residual vector, constraint Jacobian)
        """
        z = self._sweep(z)
        n = self.mesh.n
        split = self.layout.split(z)
        residual = np.empty(self.n_constraints)
        for j in range(self.spec.n_x):
            gdt = self.graph.value(self.nodes[f"G{j + 1}_dt"])
            residual[j * n:(j + 1) * n] = self.mesh.csr @ split.X[j] - gdt
        residual[self.n_dynamics:] = z[self._boundary_index] - self._boundary_value
        rows, cols, vals = self._constraint_triplets(values=True).joined()
        jacobian = CooMatrix.from_triplets(rows, cols, vals, (self.n_constraints, self.n_z))
        return residual, jacobian

    def _hessian_triplets(self, sigma: float, lam: Optional[np.ndarray]) -> _Triplets:
        triplets = _Triplets()
        node = self.nodes["F_dt"]
        if lam is None:
            r, c, row = self.graph.hessian_pattern(node)
            triplets.add(r, c, np.zeros(r.size))
        else:
            r, c, row, value = self.graph.flatten_hessian(node)
            triplets.add(r, c, sigma * self.W[row] * value)
        n = self.mesh.n
        for j in range(self.spec.n_x):
            node = self.nodes[f"G{j + 1}_dt"]
            if lam is None:
                r, c, row = self.graph.hessian_pattern(node)
                triplets.add(r, c, np.zeros(r.size))
            else:
                r, c, row, value = self.graph.flatten_hessian(node)
                triplets.add(r, c, -lam[j * n + row] * value)
        return triplets

    def eval_lagrangian_hessian(self, z, sigma: float = 1.0, lam=None) -> CooMatrix:
        """
        Lower triangle of sigma * Hess(J) + sum_i lam_i * Hess(c_i)

        Boundary rows are linear and contribute nothing.
        """
        lam = np.zeros(self.n_constraints) if lam is None else np.asarray(lam, dtype=float).ravel()
        if lam.size != self.n_constraints:
            raise DimensionMismatchError(
                f"multiplier vector has length {lam.size}, expected {self.n_constraints}"
            )
        self._sweep(z)
        rows, cols, vals = self._hessian_triplets(float(sigma), lam).joined()
        return half_to_lower(rows, cols, vals, self.n_z)

    def structures(self) -> Tuple[Tuple[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]:
        """
        Sparsity patterns from topology alone

        Returns:
            ((Jacobian rows, cols), (Lagrangian Hessian lower rows, cols)),
            identical to the patterns of every numeric evaluation
        """
        rows, cols, vals = self._constraint_triplets(values=False).joined()
        jacobian = CooMatrix.from_triplets(rows, cols, vals, (self.n_constraints, self.n_z))
        rows, cols, vals = self._hessian_triplets(0.0, None).joined()
        hessian = half_to_lower(rows, cols, vals, self.n_z)
        return jacobian.pattern(), hessian.pattern()

    def nlp_functions(self, z, sigma: float = 1.0, lam=None) -> NlpFunctions:
        J, gradient, _ = self.eval_objective(z)
        residual, jacobian = self.eval_constraints(z)
        return NlpFunctions(
            objective=J,
            gradient=gradient,
            constraints=residual,
            jacobian=jacobian,
            hessian=self.eval_lagrangian_hessian(z, sigma, lam),
        )

    # Row consistency

    def _row_graph(self, state: Optional[int]) -> Tuple[ScalarGraph, Dict[str, Any]]:
        """
        Scalar template of one output row over the local variables of a mesh row

        Local variable order is states, controls, t0, tf. Built once per output
        and re-evaluated per row through set_partials.
        """
        if state in self._row_graphs:
            return self._row_graphs[state]
        n_x, n_u = self.spec.n_x, self.spec.n_u
        size = n_x + n_u + 2
        partials = self.objective_partials if state is None else self.dynamics_partials[state]

        graph = ScalarGraph(size)
        t0 = graph.add_input(size - 2)
        tf = graph.add_input(size - 1)
        states = [graph.add_input(j) for j in range(n_x)]
        controls = [graph.add_input(n_x + i) for i in range(n_u)]
        dt = graph.add_node((t0, tf), PartialDerivs(g_i=[0, 1], g=[-1.0, 1.0]))
        T = graph.add_node((t0, tf), PartialDerivs(g_i=[0, 1], g=np.zeros(2)))
        inner = graph.add_node(
            states + controls + [T],
            PartialDerivs(
                g_i=partials.g_i,
                g=np.zeros(partials.g_i.size),
                h_r=partials.h_r,
                h_c=partials.h_c,
                h=np.zeros(partials.h_r.size),
            ),
        )
        output = graph.add_node(
            (inner, dt), PartialDerivs(g_i=[0, 1], g=np.zeros(2), h_r=[0], h_c=[1], h=[1.0])
        )
        nodes = dict(t0=t0, tf=tf, states=states, controls=controls, dt=dt, T=T, inner=inner, output=output)
        self._row_graphs[state] = (graph, nodes)
        return graph, nodes

    def scalar_row_graph(self, z, k: int, state: Optional[int] = None) -> Tuple[ScalarGraph, NodeId, np.ndarray]:
        """
        Scalar graph of one mesh row of F dt (state=None) or G_state dt

        Args:
            z: Decision vector
            k: Mesh row
            state: 0-based state column, or None for the objective integrand

        Returns:
            (swept ScalarGraph, id of the output node, local to global variable index map)
        """
        z = self._check_point(z)
        if not 0 <= k < self.mesh.n:
            raise IndexOutOfRangeError(f"mesh row {k} outside 0..{self.mesh.n - 1}")
        layout, M = self.layout, self.mesh.M
        split = layout.split(z)
        dt = split.tf - split.t0
        T_k = float(time_map(split.t0, split.tf, M[k:k + 1])[0])
        partials = self.objective_partials if state is None else self.dynamics_partials[state]
        row = {f"x{j + 1}": split.X[j, k:k + 1] for j in range(self.spec.n_x)}
        row.update({f"u{i + 1}": split.U[i, k:k + 1] for i in range(self.spec.n_u)})
        row["t"] = np.array([T_k])
        value, g, h = partials.evaluate(row, 1)

        graph, nodes = self._row_graph(state)
        graph.set_partials(nodes["t0"], value=split.t0)
        graph.set_partials(nodes["tf"], value=split.tf)
        for j, node in enumerate(nodes["states"]):
            graph.set_partials(node, value=split.X[j, k])
        for i, node in enumerate(nodes["controls"]):
            graph.set_partials(node, value=split.U[i, k])
        graph.set_partials(nodes["dt"], value=dt)
        graph.set_partials(nodes["T"], value=T_k, g=[1.0 - M[k], M[k]])
        graph.set_partials(nodes["inner"], value=value[0], g=g[0], h=h[0])
        graph.set_partials(nodes["output"], value=value[0] * dt, g=[dt, value[0]])
        graph.forward_sweep()

        index_map = np.array(
            [layout.state_offset(j) + k for j in range(self.spec.n_x)]
            + [layout.control_offset(i) + k for i in range(self.spec.n_u)]
            + [layout.t0_index, layout.tf_index],
            dtype=np.int64,
        )
        return graph, nodes["output"], index_map

    def row_consistency(self, z) -> Tuple[bool, float]:
        """
        Compare every vector output row against its scalar-graph counterpart

        Returns:
            (index vectors identical in order, largest absolute value deviation)
        """
        self._sweep(z)
        structure_ok = True
        worst = 0.0
        for position, node in enumerate(self.output_nodes):
            state = None if position == 0 else position - 1
            index, row, value = self.graph.flatten_gradient(node)
            r, c, hrow, hvalue = self.graph.flatten_hessian(node)
            for k in range(self.mesh.n):
                scalar, output, index_map = self.scalar_row_graph(z, k, state)
                full = scalar.full(output)
                in_row = row == k
                in_hrow = hrow == k
                structure_ok &= np.array_equal(index[in_row], index_map[full.G_i])
                structure_ok &= np.array_equal(r[in_hrow], index_map[full.H_r])
                structure_ok &= np.array_equal(c[in_hrow], index_map[full.H_c])
                if structure_ok:
                    worst = max(
                        worst,
                        float(np.max(np.abs(value[in_row] - full.G), initial=0.0)),
                        float(np.max(np.abs(hvalue[in_hrow] - full.H), initial=0.0)),
                    )
        if not structure_ok:
            self.log("[-] Vector and scalar graphs disagree on derivative structure")
        return bool(structure_ok), worst


def build(spec: ProblemSpec, mesh: Mesh) -> Transcription:
    return Transcription(spec, mesh)


class NlpProblem:
    """Interior-point style callback object over a Transcription; values follow the structure order"""

    def __init__(self, transcription: Transcription):
        self.transcription = transcription
        self._jacobian_structure, self._hessian_structure = transcription.structures()

    def objective(self, x) -> float:
        return self.transcription.eval_objective(x)[0]

    def gradient(self, x) -> np.ndarray:
        return self.transcription.eval_objective(x)[1].toarray()

    def constraints(self, x) -> np.ndarray:
        return self.transcription.eval_constraints(x)[0]

    def jacobianstructure(self) -> Tuple[np.ndarray, np.ndarray]:
        return self._jacobian_structure

    def jacobian(self, x) -> np.ndarray:
        return self.transcription.eval_constraints(x)[1].vals

    def hessianstructure(self) -> Tuple[np.ndarray, np.ndarray]:
        return self._hessian_structure

    def hessian(self, x, lagrange, obj_factor) -> np.ndarray:
        return self.transcription.eval_lagrangian_hessian(x, obj_factor, lagrange).vals
