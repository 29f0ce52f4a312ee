"""
Sparse second-order forward AD for LGR collocation
"""
from .base_component import BaseComponent
from .coo import CooMatrix, SparseVector
from .errors import SparseADError
from .expr import (
    compile_columns,
    differentiate,
    eval_columns,
    evaluate,
    parse,
    partial_spec,
    simplify,
    to_text,
    variables,
)
from .graph import FullDerivs, PartialDerivs, ScalarGraph, ScalarWorkspace, gradient_vector, symmetrize_lower
from .lgr import Mesh, MeshSpec, build_mesh, differentiation_block, lgr_points, lgr_weights, time_map
from .oracle import CompareReport, compare, dense_eval, dense_lagrangian_hessian, fd_gradient, fd_hessian, fd_jacobian
from .transcribe import (
    Bound,
    DecisionLayout,
    NlpFunctions,
    NlpProblem,
    ProblemSpec,
    Transcription,
    build,
    builtin_problem,
    load_problem,
)
from .vecgraph import VecGraph, VecWorkspace, broadcast_rows, rowwise_kron

__all__ = [
    'BaseComponent',
    'CooMatrix',
    'SparseVector',
    'SparseADError',
    'compile_columns',
    'differentiate',
    'eval_columns',
    'evaluate',
    'parse',
    'partial_spec',
    'simplify',
    'to_text',
    'variables',
    'FullDerivs',
    'PartialDerivs',
    'ScalarGraph',
    'ScalarWorkspace',
    'gradient_vector',
    'symmetrize_lower',
    'Mesh',
    'MeshSpec',
    'build_mesh',
    'differentiation_block',
    'lgr_points',
    'lgr_weights',
    'time_map',
    'CompareReport',
    'compare',
    'dense_eval',
    'dense_lagrangian_hessian',
    'fd_gradient',
    'fd_hessian',
    'fd_jacobian',
    'Bound',
    'DecisionLayout',
    'NlpFunctions',
    'NlpProblem',
    'ProblemSpec',
    'Transcription',
    'build',
    'builtin_problem',
    'load_problem',
    'VecGraph',
    'VecWorkspace',
    'broadcast_rows',
    'rowwise_kron',
]
