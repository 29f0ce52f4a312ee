"""
Vectorized expression graph: scalar and vector nodes over N mesh rows

Vector nodes keep one IndexEntry per derivative column instead of N
indices: the leading decision-vector index plus a stride (1 for a vector
input block, 0 for a scalar input that is broadcast to every row). Numeric
derivative values live in N-row matrices, column-major, so the forward sweep
is the scalar sweep applied to matrix columns.

Topology is fixed once construction finishes. Numeric state lives in a
VecWorkspace, so one graph can be evaluated in several workspaces.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    IndexOutOfRangeError,
    PartialIndexOutOfRangeError,
    ScalarDependsOnVectorError,
    SweepOrderViolationError,
    UnknownArgumentError,
)

SCALAR = "scalar"
VECTOR = "vector"

INDEX_DTYPE = np.dtype([("leading", np.int64), ("stride", np.int8)])

NodeId = int


def index_entries(leading: Sequence[int], stride: Sequence[int]) -> np.ndarray:
    entries = np.empty(len(leading), dtype=INDEX_DTYPE)
    entries["leading"] = leading
    entries["stride"] = stride
    return entries


def _no_entries() -> np.ndarray:
    return np.empty(0, dtype=INDEX_DTYPE)


def _join(parts: List[np.ndarray]) -> np.ndarray:
    return np.concatenate(parts) if parts else _no_entries()


def broadcast_rows(row, n: int) -> np.ndarray:
    """Read-only N-row view of a 1-row matrix; no memory is copied."""
    row = np.asarray(row, dtype=float)
    if row.ndim == 1:
        row = row.reshape(1, -1)
    return np.broadcast_to(row, (n, row.shape[1]))


def rowwise_kron(A, B) -> np.ndarray:
    """
    Row-wise Kronecker (Khatri-Rao) product

    Args:
        A: N x p matrix, or 1 x p broadcast across rows
        B: N x q matrix, or 1 x q broadcast across rows

    Returns:
        N x (p*q) matrix whose row k is kron(A[k], B[k])
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    rows_a, p = A.shape
    rows_b, q = B.shape
    if rows_a != rows_b and 1 not in (rows_a, rows_b):
        raise DimensionMismatchError(f"row counts {rows_a} and {rows_b} do not broadcast")
    product = A[:, :, None] * B[:, None, :]
    return product.reshape(product.shape[0], p * q)


@dataclass(frozen=True)
class NodeStructure:
    """IndexEntry vectors of one node's full gradient and full half-Hessian"""

    G_i: np.ndarray
    H_r: np.ndarray
    H_c: np.ndarray


class GradientTriplets(NamedTuple):
    index: np.ndarray
    row: np.ndarray
    value: np.ndarray


class HessianTriplets(NamedTuple):
    r: np.ndarray
    c: np.ndarray
    row: np.ndarray
    value: np.ndarray


@dataclass
class _VecNode:
    kind: str
    args: tuple
    g_i: np.ndarray
    h_r: np.ndarray
    h_c: np.ndarray
    value: np.ndarray
    g: np.ndarray
    h: np.ndarray
    entry: Optional[np.ndarray] = None

    @property
    def is_input(self) -> bool:
        return self.entry is not None


class VecWorkspace:
    """Numeric state of one evaluation: node values, partials and full derivative buffers"""

    def __init__(self, graph: "VecGraph"):
        self.size = len(graph)
        self.values = [node.value.copy() for node in graph._nodes]
        self.g = [node.g.copy(order="F") for node in graph._nodes]
        self.h = [node.h.copy(order="F") for node in graph._nodes]
        self.G: List[np.ndarray] = []
        self.H: List[np.ndarray] = []
        for node, structure in zip(graph._nodes, graph.structure()):
            rows = graph.rows(node.kind)
            if node.is_input:
                self.G.append(np.ones((rows, 1), order="F"))
            else:
                self.G.append(np.zeros((rows, structure.G_i.size), order="F"))
            self.H.append(np.zeros((rows, structure.H_r.size), order="F"))
        self.swept = np.array([node.is_input for node in graph._nodes], dtype=bool)


class VecGraph:
    """Graph of scalar nodes and N-row vector nodes over an n_z decision vector"""

    def __init__(self, n_z: int, n: int):
        self.n_z = n_z
        self.n = n
        self._nodes: List[_VecNode] = []
        self._structure: List[NodeStructure] = []
        self._workspace: Optional[VecWorkspace] = None

    def __len__(self):
        return len(self._nodes)

    def rows(self, kind: str) -> int:
        return self.n if kind == VECTOR else 1

    # Construction

    def _append(self, node: _VecNode) -> NodeId:
        self._nodes.append(node)
        self._workspace = None
        return len(self._nodes) - 1

    def add_scalar_input(self, var_index: int) -> NodeId:
        if not 0 <= var_index < self.n_z:
            raise IndexOutOfRangeError(f"scalar input {var_index} outside decision vector of length {self.n_z}")
        return self._append(self._input_node(SCALAR, var_index, 0))

    def add_vector_input(self, leading: int, length: Optional[int] = None) -> NodeId:
        """
        Add a contiguous vector input block

        Args:
            leading: Decision-vector index of mesh row 0
            length: Block length; must equal N when given

        Returns:
            Id of the new node
        """
        if length is not None and length != self.n:
            raise DimensionMismatchError(f"vector input of length {length} in a graph with N={self.n}")
        if leading < 0 or leading + self.n > self.n_z:
            raise IndexOutOfRangeError(
                f"vector input {leading}..{leading + self.n - 1} outside decision vector of length {self.n_z}"
            )
        return self._append(self._input_node(VECTOR, leading, 1))

    def _input_node(self, kind: str, leading: int, stride: int) -> _VecNode:
        empty = np.empty(0, dtype=np.int64)
        return _VecNode(
            kind=kind,
            args=(),
            g_i=empty,
            h_r=empty,
            h_c=empty,
            value=np.zeros(self.rows(kind)),
            g=np.zeros((1, 0), order="F"),
            h=np.zeros((1, 0), order="F"),
            entry=index_entries([leading], [stride]),
        )

    def add_vec_node(
        self,
        kind: str,
        args: Sequence[NodeId],
        g_i: Sequence[int] = (),
        h_r: Sequence[int] = (),
        h_c: Sequence[int] = (),
        g=None,
        h=None,
        value=None,
    ) -> NodeId:
        """
        Add a scalar or vector node

        Args:
            kind: SCALAR or VECTOR
            args: Argument node ids, all already in the graph
            g_i: Argument positions of the partial gradient columns
            h_r, h_c: Argument position pairs of the partial half-Hessian columns
            g: Partial gradient values, rows x len(g_i); one row broadcasts
            h: Partial half-Hessian values, rows x len(h_r); one row broadcasts
            value: Node value, scalar or column of length N

        Returns:
            Id of the new node
        """
        if kind not in (SCALAR, VECTOR):
            raise ValueError(f"unknown node kind {kind!r}")
        args = tuple(int(a) for a in args)
        for a in args:
            if not 0 <= a < len(self._nodes):
                raise UnknownArgumentError(f"argument {a} is not a node of this graph")
            if kind == SCALAR and self._nodes[a].kind == VECTOR:
                raise ScalarDependsOnVectorError(f"scalar node cannot take vector node {a} as argument")
        g_i = np.asarray(g_i, dtype=np.int64).ravel()
        h_r = np.asarray(h_r, dtype=np.int64).ravel()
        h_c = np.asarray(h_c, dtype=np.int64).ravel()
        if h_r.size != h_c.size:
            raise DimensionMismatchError("partial Hessian row and column positions differ in length")
        for name, positions in (("g_i", g_i), ("h_r", h_r), ("h_c", h_c)):
            if positions.size and (positions.min() < 0 or positions.max() >= len(args)):
                raise PartialIndexOutOfRangeError(
                    f"{name} references an argument position outside 0..{len(args) - 1}"
                )
        pairs = {(min(r, c), max(r, c)) for r, c in zip(h_r.tolist(), h_c.tolist())}
        if len(pairs) != h_r.size:
            raise DimensionMismatchError("partial Hessian repeats an argument pair")
        node = _VecNode(
            kind=kind,
            args=args,
            g_i=g_i,
            h_r=h_r,
            h_c=h_c,
            value=self._coerce_value(kind, value),
            g=self._coerce_partial(kind, g, g_i.size, "partial gradient"),
            h=self._coerce_partial(kind, h, h_r.size, "partial Hessian"),
        )
        return self._append(node)

    def _coerce_value(self, kind: str, value) -> np.ndarray:
        rows = self.rows(kind)
        if value is None:
            return np.zeros(rows)
        value = np.asarray(value, dtype=float).ravel()
        if value.size != rows:
            raise DimensionMismatchError(f"{kind} node value has length {value.size}, expected {rows}")
        return value

    def _coerce_partial(self, kind: str, matrix, columns: int, what: str) -> np.ndarray:
        if matrix is None:
            return np.zeros((1, columns), order="F")
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim == 1:
            matrix = matrix.reshape(1, -1)
        allowed = (1, self.n) if kind == VECTOR else (1,)
        if matrix.ndim != 2 or matrix.shape[1] != columns or matrix.shape[0] not in allowed:
            raise DimensionMismatchError(
                f"{what} of shape {matrix.shape} does not fit a {kind} node with {columns} columns"
            )
        return np.asfortranarray(matrix)

    # Structure

    def structure(self) -> List[NodeStructure]:
        """IndexEntry vectors of every node, from topology alone; cached."""
        for node in self._nodes[len(self._structure):]:
            self._structure.append(self._node_structure(node))
        return self._structure

    def _node_structure(self, node: _VecNode) -> NodeStructure:
        if node.is_input:
            return NodeStructure(G_i=node.entry.copy(), H_r=_no_entries(), H_c=_no_entries())
        arg_structure = [self._structure[a] for a in node.args]
        G_i = [arg_structure[p].G_i for p in node.g_i]
        H_r = [arg_structure[p].H_r for p in node.g_i]
        H_c = [arg_structure[p].H_c for p in node.g_i]
        for r, c in zip(node.h_r, node.h_c):
            R = arg_structure[r].G_i
            C = arg_structure[c].G_i
            H_r.append(np.repeat(R, C.size))
            H_c.append(np.tile(C, R.size))
        return NodeStructure(G_i=_join(G_i), H_r=_join(H_r), H_c=_join(H_c))

    # Numeric state

    def new_workspace(self) -> VecWorkspace:
        return VecWorkspace(self)

    @property
    def workspace(self) -> VecWorkspace:
        if self._workspace is None:
            self._workspace = VecWorkspace(self)
        return self._workspace

    def _resolve(self, workspace: Optional[VecWorkspace]) -> VecWorkspace:
        workspace = self.workspace if workspace is None else workspace
        if workspace.size != len(self._nodes):
            raise DimensionMismatchError(
                f"workspace holds {workspace.size} nodes, graph has {len(self._nodes)}"
            )
        return workspace

    def set_partials(self, node: NodeId, value=None, g=None, h=None, workspace: Optional[VecWorkspace] = None):
        """Write new numeric partials of one node into a workspace; topology is untouched."""
        workspace = self._resolve(workspace)
        entry = self._nodes[node]
        if value is not None:
            workspace.values[node] = self._coerce_value(entry.kind, value)
        if g is not None:
            if entry.is_input:
                raise DimensionMismatchError("input nodes have fixed unit gradients")
            workspace.g[node] = self._coerce_partial(entry.kind, g, entry.g_i.size, "partial gradient")
        if h is not None:
            if entry.is_input:
                raise DimensionMismatchError("input nodes have empty Hessians")
            workspace.h[node] = self._coerce_partial(entry.kind, h, entry.h_r.size, "partial Hessian")
        workspace.swept[node] = entry.is_input

    def value(self, node: NodeId, workspace: Optional[VecWorkspace] = None) -> np.ndarray:
        return self._resolve(workspace).values[node]

    # Sweeps

    def reset(self, workspace: Optional[VecWorkspace] = None) -> None:
        workspace = self._resolve(workspace)
        workspace.swept[:] = [node.is_input for node in self._nodes]

    def forward_node(self, node: NodeId, workspace: Optional[VecWorkspace] = None) -> None:
        """Full gradient and half-Hessian of one node from its swept arguments."""
        workspace = self._resolve(workspace)
        entry = self._nodes[node]
        if entry.is_input:
            return
        for a in entry.args:
            if not workspace.swept[a]:
                raise SweepOrderViolationError(f"node {node} swept before argument {a}")
        g = workspace.g[node]
        h = workspace.h[node]
        G = workspace.G[node]
        H = workspace.H[node]

        column = 0
        for k, position in enumerate(entry.g_i):
            arg_G = workspace.G[entry.args[position]]
            width = arg_G.shape[1]
            G[:, column:column + width] = g[:, k:k + 1] * arg_G
            column += width

        column = 0
        for k, position in enumerate(entry.g_i):
            arg_H = workspace.H[entry.args[position]]
            width = arg_H.shape[1]
            H[:, column:column + width] = g[:, k:k + 1] * arg_H
            column += width
        for m, (r, c) in enumerate(zip(entry.h_r, entry.h_c)):
            block = rowwise_kron(workspace.G[entry.args[r]], workspace.G[entry.args[c]])
            width = block.shape[1]
            H[:, column:column + width] = h[:, m:m + 1] * block
            column += width

        workspace.swept[node] = True

    def vec_forward_sweep(self, workspace: Optional[VecWorkspace] = None) -> VecWorkspace:
        """Populate full derivatives of every node in id order."""
        workspace = self._resolve(workspace)
        self.reset(workspace)
        for node in range(len(self._nodes)):
            self.forward_node(node, workspace)
        return workspace

    # Flattening

    def _expand(self, entries: np.ndarray, rows: int) -> np.ndarray:
        k = np.arange(rows)[:, None]
        index = entries["leading"][None, :] + k * entries["stride"][None, :].astype(np.int64)
        return index.ravel(order="F")

    def _mesh_rows(self, rows: int, columns: int) -> np.ndarray:
        return np.broadcast_to(np.arange(rows)[:, None], (rows, columns)).ravel(order="F")

    def gradient_pattern(self, node: NodeId):
        """(flat index, mesh row) of every gradient entry; no values needed."""
        entries = self.structure()[node].G_i
        rows = self.rows(self._nodes[node].kind)
        return self._expand(entries, rows), self._mesh_rows(rows, entries.size)

    def hessian_pattern(self, node: NodeId):
        structure = self.structure()[node]
        rows = self.rows(self._nodes[node].kind)
        return (
            self._expand(structure.H_r, rows),
            self._expand(structure.H_c, rows),
            self._mesh_rows(rows, structure.H_r.size),
        )

    def _swept(self, node: NodeId, workspace: Optional[VecWorkspace]) -> VecWorkspace:
        workspace = self._resolve(workspace)
        if not workspace.swept[node]:
            raise SweepOrderViolationError(f"node {node} has not been swept")
        return workspace

    def flatten_gradient(self, node: NodeId, workspace: Optional[VecWorkspace] = None) -> GradientTriplets:
        """
        Expand leading indices into (flat index, mesh row, value) triplets

        Entry e at row k maps to e.leading + k * e.stride. Duplicates are kept.
        """
        workspace = self._swept(node, workspace)
        index, row = self.gradient_pattern(node)
        return GradientTriplets(index, row, workspace.G[node].flatten(order="F"))

    def flatten_hessian(self, node: NodeId, workspace: Optional[VecWorkspace] = None) -> HessianTriplets:
        workspace = self._swept(node, workspace)
        r, c, row = self.hessian_pattern(node)
        return HessianTriplets(r, c, row, workspace.H[node].flatten(order="F"))
