import json
import time
from pathlib import Path

import numpy as np
import pytest

from sparsead import (
    MeshSpec,
    NlpProblem,
    ProblemSpec,
    Transcription,
    build,
    build_mesh,
    builtin_problem,
    compare,
    dense_eval,
    dense_lagrangian_hessian,
    fd_gradient,
    fd_hessian,
    fd_jacobian,
    load_problem,
)
from sparsead.errors import (
    DimensionMismatchError,
    DomainError,
    IndexOutOfRangeError,
    MeshSpecError,
    NonFiniteInputError,
    ProblemFileError,
    UnknownVariableError,
)
from sparsead.transcribe import BUILTIN_PROBLEMS, Bound, DecisionLayout, problem_from_dict

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"
MESHES = [MeshSpec.uniform(1, 2), MeshSpec.uniform(5, 4), MeshSpec.uniform(10, 5)]


# Problem description

def test_bound_parsing():
    assert Bound.parse("free", "t0") == Bound()
    assert Bound.parse({"fixed": 2}, "t0").fixed == 2.0
    assert Bound.parse({"fixed": 2}, "t0").to_json() == {"fixed": 2.0}
    assert Bound().to_json() == "free"
    for raw in ({"fixed": True}, {"fixed": "1"}, {"value": 1.0}, 3.0, None):
        with pytest.raises(ProblemFileError):
            Bound.parse(raw, "t0")


def test_problem_files_match_builtin_problems():
    for name in BUILTIN_PROBLEMS:
        from_file = load_problem(PROBLEMS / f"{name}.json")
        assert from_file == builtin_problem(name)


def test_builtin_problem_contents():
    spec, mesh_spec = builtin_problem("nonlinear")
    assert (spec.n_x, spec.n_u, spec.name) == (2, 1, "nonlinear")
    assert spec.tf == Bound()
    assert spec.x_final == (Bound(), Bound())
    assert mesh_spec.boundaries == (0.0, 0.5, 1.0) and mesh_spec.degrees == (3, 3)
    assert spec.argument_names == ("x1", "x2", "u1", "t")


def test_unknown_builtin_problem():
    with pytest.raises(ProblemFileError):
        builtin_problem("rocket")


@pytest.mark.parametrize(
    "change",
    [
        {"n_x": 0},
        {"n_u": -1},
        {"n_x": True},
        {"objective": 3},
        {"dynamics": "u1"},
        {"dynamics": ["u1", "u1"]},
        {"x_initial": []},
        {"t0": {"fixed": "zero"}},
        {"mesh": [0, 1]},
        {"mesh": {"boundaries": ["a", 1], "degrees": [2]}},
    ],
)
def test_malformed_problem_dictionaries(change):
    raw = dict(BUILTIN_PROBLEMS["energy"], **change)
    with pytest.raises(ProblemFileError):
        problem_from_dict(raw)


def test_missing_keys_are_named():
    raw = dict(BUILTIN_PROBLEMS["energy"])
    del raw["tf"]
    with pytest.raises(ProblemFileError, match="'tf'"):
        problem_from_dict(raw, "energy.json")


def test_mesh_errors_keep_their_type():
    raw = dict(BUILTIN_PROBLEMS["energy"], mesh={"boundaries": [0, 1], "degrees": [2, 2]})
    with pytest.raises(MeshSpecError):
        problem_from_dict(raw)


def test_expression_errors_surface_from_problem_files():
    raw = dict(BUILTIN_PROBLEMS["energy"], objective="x2^2")
    with pytest.raises(UnknownVariableError):
        problem_from_dict(raw)


def test_load_problem_reports_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{\"n_x\": 1,", encoding="utf-8")
    with pytest.raises(ProblemFileError):
        load_problem(path)
    with pytest.raises(OSError):
        load_problem(tmp_path / "missing.json")


def test_load_problem_defaults_name_to_file_stem(tmp_path):
    raw = dict(BUILTIN_PROBLEMS["energy"])
    del raw["name"]
    path = tmp_path / "bryson.json"
    path.write_text(json.dumps(raw), encoding="utf-8")
    spec, _ = load_problem(path)
    assert spec.name == "bryson"


def test_problem_spec_checks_counts():
    with pytest.raises(DimensionMismatchError):
        ProblemSpec.from_strings(n_x=2, n_u=1, objective="u1", dynamics=["u1"])


# Decision layout

def test_layout_positions():
    layout = DecisionLayout(n_x=2, n_u=1, n=3)
    assert layout.n_z == 2 * 4 + 3 + 2
    assert (layout.t0_index, layout.tf_index) == (11, 12)
    assert layout.state_offset(1) == 4
    assert layout.control_offset(0) == 8
    z = np.arange(13.0)
    split = layout.split(z)
    np.testing.assert_array_equal(split.X, [[0, 1, 2, 3], [4, 5, 6, 7]])
    np.testing.assert_array_equal(split.U, [[8, 9, 10]])
    assert (split.t0, split.tf) == (11.0, 12.0)


def test_layout_points():
    layout = DecisionLayout(n_x=1, n_u=1, n=2)
    np.testing.assert_array_equal(layout.ones_point(), [1, 1, 1, 1, 1, 0, 1])
    z = layout.random_point(3)
    np.testing.assert_array_equal(z, layout.random_point(3))
    assert np.all((z >= 0.5) & (z <= 1.5))


# Known solution of the energy problem

def test_energy_objective_at_solution(energy_transcription, energy_solution):
    J, gradient, hessian = energy_transcription.eval_objective(energy_solution)
    assert J == pytest.approx(0.5, abs=1e-14)
    np.testing.assert_array_equal(gradient.indices, [3, 4, 5, 6])
    np.testing.assert_allclose(gradient.vals, [0.25, 0.75, -0.5, 0.5], rtol=0, atol=1e-14)
    np.testing.assert_array_equal(hessian.rows, [3, 4, 5, 5, 6, 6])
    np.testing.assert_array_equal(hessian.cols, [3, 4, 3, 4, 3, 4])
    np.testing.assert_allclose(hessian.vals, [0.25, 0.75, -0.25, -0.75, 0.25, 0.75], rtol=0, atol=1e-14)


def test_energy_constraints_at_solution(energy_transcription, energy_solution):
    residual, jacobian = energy_transcription.eval_constraints(energy_solution)
    assert energy_transcription.n_constraints == 6
    assert np.max(np.abs(residual)) <= 1e-12
    assert jacobian.nnz == 16
    expected = np.zeros((6, 7))
    expected[:2, :3] = energy_transcription.mesh.D.toarray()
    expected[0, [3, 5, 6]] = [-1.0, 1.0, -1.0]
    expected[1, [4, 5, 6]] = [-1.0, 1.0, -1.0]
    expected[[2, 3, 4, 5], [0, 2, 5, 6]] = 1.0
    np.testing.assert_allclose(jacobian.toarray(), expected, rtol=0, atol=1e-14)


def test_energy_lagrangian_without_objective(energy_transcription, energy_solution):
    lam = np.array([0.3, -0.7, 5.0, 5.0, 5.0, 5.0])
    hessian = energy_transcription.eval_lagrangian_hessian(energy_solution, sigma=0.0, lam=lam)
    assert hessian.nnz == 6
    dense = hessian.toarray()
    np.testing.assert_allclose(dense[5, 3:5], [0.3, -0.7], rtol=1e-15)
    np.testing.assert_allclose(dense[6, 3:5], [-0.3, 0.7], rtol=1e-15)
    assert dense[3, 3] == dense[4, 4] == 0.0


def test_nonlinear_state_square_enters_diagonal(nonlinear_transcription):
    transcription = nonlinear_transcription
    n = transcription.mesh.n
    lam = np.zeros(transcription.n_constraints)
    lam[n:2 * n] = 1.0
    z = transcription.layout.ones_point()
    dense = transcription.eval_lagrangian_hessian(z, sigma=0.0, lam=lam).toarray()
    np.testing.assert_allclose(np.diag(dense)[:n], 2.0, rtol=1e-15)


def test_boundary_rows_follow_fixed_bounds(nonlinear_transcription):
    transcription = nonlinear_transcription
    n = transcription.mesh.n
    assert transcription.n_constraints == 2 * n + 3
    z = transcription.layout.random_point(1)
    residual, jacobian = transcription.eval_constraints(z)
    layout = transcription.layout
    np.testing.assert_array_equal(
        residual[2 * n:], [z[0] - 1.0, z[layout.state_offset(1)], z[layout.t0_index]]
    )
    dense = jacobian.toarray()
    assert dense[2 * n, 0] == dense[2 * n + 1, layout.state_offset(1)] == dense[2 * n + 2, layout.t0_index] == 1.0


# Oracle equivalence and finite differences

@pytest.mark.parametrize("name", ["energy", "nonlinear"])
@pytest.mark.parametrize("mesh_spec", MESHES, ids=["1x2", "5x4", "10x5"])
def test_sparse_derivatives_match_dense_oracle(name, mesh_spec):
    spec, _ = builtin_problem(name)
    mesh = build_mesh(mesh_spec)
    transcription = Transcription(spec, mesh)
    rng = np.random.default_rng(11)
    for seed in range(3):
        z = transcription.layout.random_point(seed)
        lam = rng.uniform(-1.0, 1.0, transcription.n_constraints)
        J, gradient, hessian = transcription.eval_objective(z)
        residual, jacobian = transcription.eval_constraints(z)
        lagrangian = transcription.eval_lagrangian_hessian(z, 0.7, lam)
        dense = dense_eval(spec, mesh, z)
        reports = [
            compare(np.array([J]), np.array([dense.objective.value]), 1e-12, "objective"),
            compare(gradient, dense.objective.grad, 1e-12, "gradient"),
            compare(hessian, dense.objective.hess, 1e-12, "hessian", lower=True),
            compare(residual, dense.residual, 1e-12, "residual"),
            compare(jacobian, dense.jacobian, 1e-12, "jacobian"),
            compare(lagrangian, dense_lagrangian_hessian(dense, 0.7, lam), 1e-12, "lagrangian", lower=True),
        ]
        for report in reports:
            assert report.passed, report.render()


@pytest.mark.parametrize("name", ["energy", "nonlinear"])
@pytest.mark.parametrize("mesh_spec", MESHES, ids=["1x2", "5x4", "10x5"])
def test_sparse_derivatives_match_finite_differences(name, mesh_spec):
    spec, _ = builtin_problem(name)
    transcription = Transcription(spec, build_mesh(mesh_spec))
    objective = lambda x: transcription.eval_objective(x)[0]
    constraints = lambda x: transcription.eval_constraints(x)[0]
    objective_gradient = lambda x: transcription.eval_objective(x)[1].toarray()
    for seed in range(10):
        z = transcription.layout.random_point(100 + seed)
        _, gradient, hessian = transcription.eval_objective(z)
        _, jacobian = transcription.eval_constraints(z)
        reports = [
            compare(gradient, fd_gradient(objective, z, 1e-5), 1e-6, "gradient"),
            compare(jacobian, fd_jacobian(constraints, z, 1e-5), 1e-6, "jacobian"),
            compare(hessian, fd_hessian(objective_gradient, z, 1e-5), 1e-6, "hessian", lower=True),
        ]
        for report in reports:
            assert report.passed, report.render()


@pytest.mark.parametrize("name", ["energy", "nonlinear"])
def test_vector_rows_match_scalar_graphs(name):
    spec, mesh_spec = builtin_problem(name)
    transcription = Transcription(spec, build_mesh(mesh_spec))
    for seed in range(3):
        structure_ok, worst = transcription.row_consistency(transcription.layout.random_point(seed))
        assert structure_ok
        assert worst <= 1e-14


def test_scalar_row_graph_value(nonlinear_transcription):
    transcription = nonlinear_transcription
    z = transcription.layout.random_point(4)
    split = transcription.layout.split(z)
    graph, output, index_map = transcription.scalar_row_graph(z, 2, state=1)
    expected = (split.U[0, 2] - split.X[0, 2] ** 2) * (split.tf - split.t0)
    assert graph.value(output) == pytest.approx(expected, rel=1e-14)
    layout = transcription.layout
    assert index_map[-2:].tolist() == [layout.t0_index, layout.tf_index]
    assert index_map[0] == layout.state_offset(0) + 2


def test_scalar_row_graphs_are_built_once_per_output(nonlinear_transcription):
    transcription = nonlinear_transcription
    z = transcription.layout.random_point(6)
    first, output, _ = transcription.scalar_row_graph(z, 0, state=0)
    size = len(first)
    second, _, _ = transcription.scalar_row_graph(z, transcription.mesh.n - 1, state=0)
    assert second is first and len(second) == size
    objective, _, _ = transcription.scalar_row_graph(z, 0)
    assert objective is not first
    with pytest.raises(IndexOutOfRangeError):
        transcription.scalar_row_graph(z, transcription.mesh.n)


# Structure

def test_structure_is_constant_across_points(nonlinear_transcription):
    transcription = nonlinear_transcription
    (jac_rows, jac_cols), (hess_rows, hess_cols) = transcription.structures()
    rng = np.random.default_rng(5)
    for seed in range(100):
        z = transcription.layout.random_point(seed)
        lam = rng.uniform(-1.0, 1.0, transcription.n_constraints)
        _, jacobian = transcription.eval_constraints(z)
        hessian = transcription.eval_lagrangian_hessian(z, 1.0, lam)
        np.testing.assert_array_equal(jacobian.rows, jac_rows)
        np.testing.assert_array_equal(jacobian.cols, jac_cols)
        np.testing.assert_array_equal(hessian.rows, hess_rows)
        np.testing.assert_array_equal(hessian.cols, hess_cols)


def test_nonzero_counts_are_affine_in_segment_count():
    spec, _ = builtin_problem("nonlinear")
    segments = np.array([10, 20, 40, 80])
    counts = []
    for S in segments:
        (jac_rows, _), (hess_rows, _) = Transcription(spec, build_mesh(MeshSpec.uniform(int(S), 4))).structures()
        counts.append((jac_rows.size, hess_rows.size))
    slopes = np.diff(np.array(counts), axis=0) / np.diff(segments)[:, None]
    np.testing.assert_array_equal(slopes, np.broadcast_to(slopes[0], slopes.shape))


def _median_evaluation_seconds(transcription, repeats=7):
    times = []
    for seed in range(repeats):
        z = transcription.layout.random_point(seed)
        start = time.perf_counter()
        transcription.nlp_functions(z)
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def test_evaluation_time_grows_linearly_in_segment_count():
    spec, _ = builtin_problem("nonlinear")
    timings = {}
    for S in (40, 80):
        transcription = Transcription(spec, build_mesh(MeshSpec.uniform(S, 4)))
        transcription.nlp_functions(transcription.layout.ones_point())
        timings[S] = _median_evaluation_seconds(transcription)
    assert timings[80] <= 3.0 * timings[40]


# Input checking and caching

def test_decision_vector_is_checked(energy_transcription):
    with pytest.raises(DimensionMismatchError):
        energy_transcription.eval_objective(np.ones(6))
    z = energy_transcription.layout.ones_point()
    z[2] = np.nan
    with pytest.raises(NonFiniteInputError):
        energy_transcription.eval_constraints(z)
    with pytest.raises(DimensionMismatchError):
        energy_transcription.eval_lagrangian_hessian(energy_transcription.layout.ones_point(), 1.0, np.ones(3))


def test_domain_error_names_mesh_row():
    spec = ProblemSpec.from_strings(n_x=1, n_u=1, objective="log(x1)", dynamics=["u1"])
    transcription = Transcription(spec, build_mesh(MeshSpec.uniform(1, 2)))
    z = transcription.layout.ones_point()
    z[1] = -1.0
    with pytest.raises(DomainError) as info:
        transcription.eval_objective(z)
    assert info.value.row == 1
    assert info.value.label == "objective"


def test_domain_error_leaves_previous_evaluation_usable():
    spec = ProblemSpec.from_strings(n_x=1, n_u=1, objective="u1^2", dynamics=["log(x1)"])
    transcription = Transcription(spec, build_mesh(MeshSpec.uniform(1, 2)))
    good = transcription.layout.ones_point()
    J, gradient, hessian = transcription.eval_objective(good)
    bad = good.copy()
    bad[0] = -1.0
    with pytest.raises(DomainError):
        transcription.eval_constraints(bad)
    again = transcription.eval_objective(good)
    assert again[0] == J
    np.testing.assert_array_equal(again[1].vals, gradient.vals)
    np.testing.assert_array_equal(again[2].vals, hessian.vals)
    with pytest.raises(DomainError):
        transcription.eval_objective(bad)
    residual, _ = transcription.eval_constraints(good)
    assert np.all(np.isfinite(residual))


def test_in_place_changes_to_the_point_are_seen(energy_transcription, energy_solution):
    z = energy_solution.copy()
    first = energy_transcription.eval_objective(z)[0]
    z[3:5] = 2.0
    second = energy_transcription.eval_objective(z)[0]
    assert first == pytest.approx(0.5)
    assert second == pytest.approx(2.0)


# Solver callbacks

def test_nlp_problem_callbacks_follow_structure(nonlinear):
    spec, mesh = nonlinear
    transcription = build(spec, mesh)
    problem = NlpProblem(transcription)
    z = transcription.layout.random_point(2)
    lam = np.linspace(-1.0, 1.0, transcription.n_constraints)

    rows, cols = problem.jacobianstructure()
    assert problem.jacobian(z).size == rows.size
    rows, cols = problem.hessianstructure()
    values = problem.hessian(z, lam, 0.5)
    assert values.size == rows.size
    assert np.all(rows >= cols)
    np.testing.assert_array_equal(
        values, transcription.eval_lagrangian_hessian(z, 0.5, lam).vals
    )
    assert problem.gradient(z).shape == (transcription.n_z,)
    assert problem.constraints(z).shape == (transcription.n_constraints,)
    assert problem.objective(z) == transcription.eval_objective(z)[0]


def test_nlp_functions_bundle(energy_transcription, energy_solution):
    nlp = energy_transcription.nlp_functions(energy_solution)
    assert nlp.objective == pytest.approx(0.5)
    assert nlp.gradient.nnz == 4
    assert nlp.jacobian.nnz == 16
    np.testing.assert_allclose(nlp.hessian.toarray(), energy_transcription.eval_objective(energy_solution)[2].toarray())


def test_progress_log_goes_to_stderr_only_when_verbose(energy, monkeypatch, capsys):
    import config

    monkeypatch.setattr(config, "VERBOSE", False)
    Transcription(*energy)
    assert capsys.readouterr().err == ""
    monkeypatch.setattr(config, "VERBOSE", True)
    transcription = Transcription(*energy)
    captured = capsys.readouterr()
    assert captured.out == ""
    assert captured.err.startswith("[Transcription] [+] Built ")
    assert str(transcription) == "Transcription (LGR collocation transcription of one problem)"
