"""
Scalar sparse expression graph with forward gradient and forward Hessian sweeps

Every node carries its partial derivatives with respect to its own arguments
(sparse gradient pairs and a half-Hessian in COO form). The forward sweep
turns them into full derivatives with respect to the input variables by
concatenation only; duplicate indices mean implicit summation and are merged
when the result is exported.

Index vectors of every full derivative depend on topology alone and are
computed once by structure(). Numeric state (values, partials, full
derivative buffers sized from the structure) lives in a ScalarWorkspace, so
a graph is built once and re-evaluated at new points through set_partials.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .coo import CooMatrix, SparseVector
from .errors import (
    DimensionMismatchError,
    IndexOutOfRangeError,
    PartialIndexOutOfRangeError,
    SweepOrderViolationError,
    UnknownArgumentError,
)

NodeId = int

_EMPTY_INDEX = np.empty(0, dtype=np.int64)
_EMPTY_VALUE = np.empty(0, dtype=float)


def _concat(parts: List[np.ndarray], empty: np.ndarray) -> np.ndarray:
    return np.concatenate(parts) if parts else empty.copy()


@dataclass
class PartialDerivs:
    """Partial gradient pairs (g_i, g) and half-Hessian triplets (h_r, h_c, h) over argument positions"""

    g_i: np.ndarray = field(default_factory=lambda: _EMPTY_INDEX.copy())
    g: np.ndarray = field(default_factory=lambda: _EMPTY_VALUE.copy())
    h_r: np.ndarray = field(default_factory=lambda: _EMPTY_INDEX.copy())
    h_c: np.ndarray = field(default_factory=lambda: _EMPTY_INDEX.copy())
    h: np.ndarray = field(default_factory=lambda: _EMPTY_VALUE.copy())

    def __post_init__(self):
        self.g_i = np.asarray(self.g_i, dtype=np.int64).ravel()
        self.g = np.asarray(self.g, dtype=float).ravel()
        self.h_r = np.asarray(self.h_r, dtype=np.int64).ravel()
        self.h_c = np.asarray(self.h_c, dtype=np.int64).ravel()
        self.h = np.asarray(self.h, dtype=float).ravel()


@dataclass
class FullDerivs:
    """Full gradient (G_i, G) and half-Hessian (H_r, H_c, H) over input variables; duplicates allowed"""

    G_i: np.ndarray
    G: np.ndarray
    H_r: np.ndarray
    H_c: np.ndarray
    H: np.ndarray

    @classmethod
    def unit(cls, var_index: int) -> "FullDerivs":
        return cls(
            G_i=np.array([var_index], dtype=np.int64),
            G=np.ones(1),
            H_r=_EMPTY_INDEX.copy(),
            H_c=_EMPTY_INDEX.copy(),
            H=_EMPTY_VALUE.copy(),
        )


@dataclass(frozen=True)
class ScalarStructure:
    """Index vectors of one node's full gradient and full half-Hessian"""

    G_i: np.ndarray
    H_r: np.ndarray
    H_c: np.ndarray


@dataclass
class _Node:
    args: tuple
    partial: PartialDerivs
    value: float
    input_index: Optional[int] = None

    @property
    def is_input(self) -> bool:
        return self.input_index is not None


class ScalarWorkspace:
    """Values, partials and pre-sized full derivative buffers of one evaluation"""

    def __init__(self, graph: "ScalarGraph"):
        self.size = len(graph)
        self.values = np.array([node.value for node in graph._nodes], dtype=float)
        self.g = [node.partial.g.copy() for node in graph._nodes]
        self.h = [node.partial.h.copy() for node in graph._nodes]
        self.G: List[np.ndarray] = []
        self.H: List[np.ndarray] = []
        for node, structure in zip(graph._nodes, graph.structure()):
            self.G.append(np.ones(1) if node.is_input else np.zeros(structure.G_i.size))
            self.H.append(np.zeros(structure.H_r.size))
        inputs = np.array([node.is_input for node in graph._nodes], dtype=bool)
        self.gradient_swept = inputs.copy()
        self.hessian_swept = inputs.copy()


class ScalarGraph:
    """Expression graph over n_z input variables; node ids are topological by construction"""

    def __init__(self, n_z: int):
        self.n_z = n_z
        self._nodes: List[_Node] = []
        self._structure: List[ScalarStructure] = []
        self._workspace: Optional[ScalarWorkspace] = None

    def __len__(self):
        return len(self._nodes)

    # Construction

    def _append(self, node: _Node) -> NodeId:
        self._nodes.append(node)
        self._workspace = None
        return len(self._nodes) - 1

    def add_input(self, var_index: int, value: float = 0.0) -> NodeId:
        """
        Add an input node with a unit gradient and an empty Hessian

        Args:
            var_index: Position of the variable in the decision vector
            value: Numeric value of the variable

        Returns:
            Id of the new node
        """
        if not 0 <= var_index < self.n_z:
            raise IndexOutOfRangeError(f"input index {var_index} outside decision vector of length {self.n_z}")
        return self._append(_Node(args=(), partial=PartialDerivs(), value=float(value), input_index=var_index))

    def add_node(self, args: Sequence[NodeId], partial: PartialDerivs, value: float = 0.0) -> NodeId:
        """
        Add an intermediate or output node

        Args:
            args: Argument node ids, all already in the graph
            partial: Partial derivatives over argument positions (0-based);
                the values seed the default workspace
            value: Numeric value of the node

        Returns:
            Id of the new node
        """
        args = tuple(int(a) for a in args)
        for a in args:
            if not 0 <= a < len(self._nodes):
                raise UnknownArgumentError(f"argument {a} is not a node of this graph")
        if partial.g_i.size != partial.g.size:
            raise DimensionMismatchError("partial gradient index and value lengths differ")
        if not (partial.h_r.size == partial.h_c.size == partial.h.size):
            raise DimensionMismatchError("partial Hessian index and value lengths differ")
        for name, positions in (("g_i", partial.g_i), ("h_r", partial.h_r), ("h_c", partial.h_c)):
            if positions.size and (positions.min() < 0 or positions.max() >= len(args)):
                raise PartialIndexOutOfRangeError(
                    f"{name} references an argument position outside 0..{len(args) - 1}"
                )
        pairs = {(min(r, c), max(r, c)) for r, c in zip(partial.h_r.tolist(), partial.h_c.tolist())}
        if len(pairs) != partial.h_r.size:
            raise DimensionMismatchError("partial Hessian repeats an argument pair")
        return self._append(_Node(args=args, partial=partial, value=float(value)))

    # Structure

    def structure(self) -> List[ScalarStructure]:
        """Index vectors of every node from topology alone; cached and extended as nodes are added."""
        for node in self._nodes[len(self._structure):]:
            self._structure.append(self._node_structure(node))
        return self._structure

    def _node_structure(self, node: _Node) -> ScalarStructure:
        if node.is_input:
            return ScalarStructure(
                G_i=np.array([node.input_index], dtype=np.int64), H_r=_EMPTY_INDEX, H_c=_EMPTY_INDEX
            )
        p = node.partial
        arg_structure = [self._structure[a] for a in node.args]
        G_i = [arg_structure[position].G_i for position in p.g_i]
        H_r = [arg_structure[position].H_r for position in p.g_i]
        H_c = [arg_structure[position].H_c for position in p.g_i]
        for r, c in zip(p.h_r, p.h_c):
            R = arg_structure[r].G_i
            C = arg_structure[c].G_i
            H_r.append(np.repeat(R, C.size))
            H_c.append(np.tile(C, R.size))
        return ScalarStructure(
            G_i=_concat(G_i, _EMPTY_INDEX),
            H_r=_concat(H_r, _EMPTY_INDEX),
            H_c=_concat(H_c, _EMPTY_INDEX),
        )

    # Numeric state

    def new_workspace(self) -> ScalarWorkspace:
        return ScalarWorkspace(self)

    @property
    def workspace(self) -> ScalarWorkspace:
        if self._workspace is None:
            self._workspace = ScalarWorkspace(self)
        return self._workspace

    def _resolve(self, workspace: Optional[ScalarWorkspace]) -> ScalarWorkspace:
        workspace = self.workspace if workspace is None else workspace
        if workspace.size != len(self._nodes):
            raise DimensionMismatchError(
                f"workspace holds {workspace.size} nodes, graph has {len(self._nodes)}"
            )
        return workspace

    def set_partials(
        self,
        node: NodeId,
        value: Optional[float] = None,
        g=None,
        h=None,
        workspace: Optional[ScalarWorkspace] = None,
    ) -> None:
        """Write new numeric partials of one node into a workspace; topology is untouched."""
        workspace = self._resolve(workspace)
        entry = self._nodes[node]
        if value is not None:
            workspace.values[node] = float(value)
        if g is not None:
            g = np.asarray(g, dtype=float).ravel()
            if entry.is_input or g.size != entry.partial.g_i.size:
                raise DimensionMismatchError(
                    f"node {node} takes {entry.partial.g_i.size} partial gradient values, got {g.size}"
                )
            workspace.g[node] = g
        if h is not None:
            h = np.asarray(h, dtype=float).ravel()
            if entry.is_input or h.size != entry.partial.h_r.size:
                raise DimensionMismatchError(
                    f"node {node} takes {entry.partial.h_r.size} partial Hessian values, got {h.size}"
                )
            workspace.h[node] = h
        workspace.gradient_swept[node] = entry.is_input
        workspace.hessian_swept[node] = entry.is_input

    def value(self, node: NodeId, workspace: Optional[ScalarWorkspace] = None) -> float:
        return float(self._resolve(workspace).values[node])

    # Sweeps

    def forward_gradient(self, node: NodeId, workspace: Optional[ScalarWorkspace] = None) -> None:
        """Concatenate argument gradients scaled by the partial gradient."""
        workspace = self._resolve(workspace)
        entry = self._nodes[node]
        if entry.is_input:
            return
        G = workspace.G[node]
        column = 0
        for k, position in enumerate(entry.partial.g_i):
            arg = entry.args[position]
            if not workspace.gradient_swept[arg]:
                raise SweepOrderViolationError(f"node {node} swept before the gradient of argument {arg}")
            arg_G = workspace.G[arg]
            np.multiply(workspace.g[node][k], arg_G, out=G[column:column + arg_G.size])
            column += arg_G.size
        workspace.gradient_swept[node] = True

    def forward_hessian(self, node: NodeId, workspace: Optional[ScalarWorkspace] = None) -> None:
        """Argument Hessians scaled by partial gradients, then partial Hessian times gradient products."""
        workspace = self._resolve(workspace)
        entry = self._nodes[node]
        if entry.is_input:
            return
        p = entry.partial
        for arg in {entry.args[position] for position in p.h_r.tolist() + p.h_c.tolist()}:
            if not workspace.gradient_swept[arg]:
                raise SweepOrderViolationError(f"node {node} swept before the gradient of argument {arg}")
        H = workspace.H[node]
        column = 0
        for k, position in enumerate(p.g_i):
            arg = entry.args[position]
            if not workspace.hessian_swept[arg]:
                raise SweepOrderViolationError(f"node {node} swept before the Hessian of argument {arg}")
            arg_H = workspace.H[arg]
            np.multiply(workspace.g[node][k], arg_H, out=H[column:column + arg_H.size])
            column += arg_H.size
        for m, (r, c) in enumerate(zip(p.h_r, p.h_c)):
            block = np.kron(workspace.G[entry.args[r]], workspace.G[entry.args[c]])
            np.multiply(workspace.h[node][m], block, out=H[column:column + block.size])
            column += block.size
        workspace.hessian_swept[node] = True

    def forward_sweep(self, workspace: Optional[ScalarWorkspace] = None) -> ScalarWorkspace:
        """Populate full derivatives of every node in id order."""
        workspace = self._resolve(workspace)
        self.reset(workspace)
        for node in range(len(self._nodes)):
            self.forward_gradient(node, workspace)
            self.forward_hessian(node, workspace)
        return workspace

    def reset(self, workspace: Optional[ScalarWorkspace] = None) -> None:
        """Forget full derivatives of non-input nodes."""
        workspace = self._resolve(workspace)
        inputs = [node.is_input for node in self._nodes]
        workspace.gradient_swept[:] = inputs
        workspace.hessian_swept[:] = inputs

    def full(self, node: NodeId, workspace: Optional[ScalarWorkspace] = None) -> FullDerivs:
        """Copy of the full derivatives of a swept node."""
        workspace = self._resolve(workspace)
        if not (workspace.gradient_swept[node] and workspace.hessian_swept[node]):
            raise SweepOrderViolationError(f"node {node} has not been swept")
        structure = self.structure()[node]
        return FullDerivs(
            G_i=structure.G_i.copy(),
            G=workspace.G[node].copy(),
            H_r=structure.H_r.copy(),
            H_c=structure.H_c.copy(),
            H=workspace.H[node].copy(),
        )


def half_to_lower(rows, cols, vals, n: int) -> CooMatrix:
    """
    Turn half-Hessian triplets into the deduplicated lower triangle

    Off-diagonal entries move to (max, min); diagonal entries double; exact
    zeros stay so the structure does not depend on values.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=float)
    lower_rows = np.maximum(rows, cols)
    lower_cols = np.minimum(rows, cols)
    doubled = np.where(rows == cols, 2.0 * vals, vals)
    return CooMatrix.from_triplets(lower_rows, lower_cols, doubled, (n, n))


def symmetrize_lower(full: FullDerivs, n: Optional[int] = None) -> CooMatrix:
    """
    Lower triangle of S = T + T^T for the stored half-Hessian T

    Args:
        full: Full derivatives of a node
        n: Matrix order; defaults to one past the largest index

    Returns:
        CooMatrix sorted row-major with duplicates summed
    """
    if n is None:
        n = int(max(full.H_r.max(initial=-1), full.H_c.max(initial=-1))) + 1
    return half_to_lower(full.H_r, full.H_c, full.H, n)


def gradient_vector(full: FullDerivs, n: int) -> SparseVector:
    return SparseVector.from_pairs(full.G_i, full.G, n)
