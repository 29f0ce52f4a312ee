"""
Orchestrator - Coordinates mesh, transcription, oracle and output for every subcommand
"""
import json
import statistics
import time
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import io as spio

import config
from sparsead import (
    CompareReport,
    MeshSpec,
    ProblemSpec,
    Transcription,
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
from sparsead.errors import DimensionMismatchError, ProblemFileError
from sparsead.transcribe import BUILTIN_PROBLEMS


def fmt(value: float) -> str:
    """Decimal text that round-trips a double."""
    return f"{float(value):.{config.SIGNIFICANT_DIGITS}g}"


def _vector_text(values) -> str:
    return "[" + ", ".join(fmt(v) for v in values) + "]"


def resolve_problem(problem: str) -> Tuple[ProblemSpec, MeshSpec]:
    """A problem file path, or the name of a built-in problem when no such file exists."""
    if not Path(problem).exists() and problem in BUILTIN_PROBLEMS:
        return builtin_problem(problem)
    return load_problem(problem)


class CollocationOrchestrator:
    """Main orchestrator behind the basis, check, export and bench subcommands"""

    def basis(self, spec: MeshSpec, as_json: bool = False) -> None:
        """
        Print mesh points M, weights W and the D triplets

        Args:
            spec: Mesh description
            as_json: Print one JSON object instead of the text layout
        """
        mesh = build_mesh(spec)
        D = mesh.D
        if as_json:
            triplets = ", ".join(
                f"[{int(r)}, {int(c)}, {fmt(v)}]" for r, c, v in zip(D.rows, D.cols, D.vals)
            )
            print(f'{{"M": {_vector_text(mesh.M)}, "W": {_vector_text(mesh.W)}, "D": [{triplets}]}}')
            return
        print(f"M = {_vector_text(mesh.M)}")
        print(f"W = {_vector_text(mesh.W)}")
        print(f"D ({D.shape[0]} x {D.shape[1]}, {D.nnz} triplets)")
        for r, c, v in zip(D.rows, D.cols, D.vals):
            print(f"{int(r)} {int(c)} {fmt(v)}")

    def _point(self, transcription: Transcription, point: str, seed: int) -> np.ndarray:
        layout = transcription.layout
        if point == "ones":
            return layout.ones_point()
        if point == "random":
            return layout.random_point(seed)
        if point.startswith("@"):
            path = Path(point[1:])
            try:
                z = np.array([float(token) for token in path.read_text(encoding="utf-8").split()])
            except ValueError as e:
                raise ProblemFileError(f"{path}: point file must hold whitespace-separated decimals") from e
            if z.size != layout.n_z:
                raise DimensionMismatchError(
                    f"{path}: point has {z.size} values, expected n_z = {layout.n_z}"
                )
            return z
        raise ProblemFileError(f"unknown point {point!r}; use ones, random or @FILE")

    def check(
        self,
        spec: ProblemSpec,
        mesh_spec: MeshSpec,
        at: str = "ones",
        seed: Optional[int] = None,
        fd_step: Optional[float] = None,
        tol: Optional[float] = None,
    ) -> bool:
        """
        Verify sparse derivatives against the dense oracle and finite differences

        Args:
            spec: Problem description
            mesh_spec: Mesh description
            at: "ones" or "random"
            seed: Seed of the random point and of the multipliers
            fd_step: Finite-difference step
            tol: Relative tolerance of the finite-difference checks

        Returns:
            True when every report passes
        """
        seed = config.DEFAULT_SEED if seed is None else seed
        fd_step = config.FD_STEP if fd_step is None else fd_step
        tol = config.CHECK_TOLERANCE if tol is None else tol

        mesh = build_mesh(mesh_spec)
        transcription = Transcription(spec, mesh)
        z = self._point(transcription, at, seed)
        rng = np.random.default_rng(seed)
        lam = rng.uniform(-1.0, 1.0, transcription.n_constraints)

        print("=" * 70)
        print(
            f"CHECK {spec.name}  N={mesh.n}  n_z={transcription.n_z}  "
            f"constraints={transcription.n_constraints}  point={at}  seed={seed}"
        )
        print("=" * 70)

        J, gradient, hessian = transcription.eval_objective(z)
        residual, jacobian = transcription.eval_constraints(z)
        lagrangian = transcription.eval_lagrangian_hessian(z, 1.0, lam)
        dense = dense_eval(spec, mesh, z)

        oracle_tol = config.ORACLE_TOLERANCE
        reports: List[CompareReport] = [
            compare(np.array([J]), np.array([dense.objective.value]), oracle_tol, "oracle objective"),
            compare(gradient, dense.objective.grad, oracle_tol, "oracle objective gradient"),
            compare(hessian, dense.objective.hess, oracle_tol, "oracle objective Hessian", lower=True),
            compare(residual, dense.residual, oracle_tol, "oracle constraint residual"),
            compare(jacobian, dense.jacobian, oracle_tol, "oracle constraint Jacobian"),
            compare(
                lagrangian,
                dense_lagrangian_hessian(dense, 1.0, lam),
                oracle_tol,
                "oracle Lagrangian Hessian",
                lower=True,
            ),
        ]

        objective = lambda x: transcription.eval_objective(x)[0]
        constraints = lambda x: transcription.eval_constraints(x)[0]
        objective_gradient = lambda x: transcription.eval_objective(x)[1].toarray()
        reports += [
            compare(gradient, fd_gradient(objective, z, fd_step), tol, "fd objective gradient"),
            compare(jacobian, fd_jacobian(constraints, z, fd_step), tol, "fd constraint Jacobian"),
            compare(hessian, fd_hessian(objective_gradient, z, fd_step), tol, "fd objective Hessian", lower=True),
        ]

        structure_ok, worst = transcription.row_consistency(z)
        reports.append(
            CompareReport(
                label="row consistency",
                max_abs=worst,
                max_rel=worst,
                worst=(),
                tol=config.ROW_TOLERANCE,
                passed=structure_ok and worst <= config.ROW_TOLERANCE,
            )
        )

        for report in reports:
            print(report.render())
        failed = [report for report in reports if not report.passed]
        print("-" * 70)
        if failed:
            print(f"[-] {len(failed)} of {len(reports)} checks failed")
        else:
            print(f"[+] All {len(reports)} checks passed")
        return not failed

    def export(
        self,
        spec: ProblemSpec,
        mesh_spec: MeshSpec,
        point: str = "ones",
        out_dir: Union[str, Path, None] = None,
        seed: Optional[int] = None,
    ) -> Path:
        """
        Write the NLP data at one point as Matrix Market and text files

        Files: jacobian.mtx, hessian.mtx (Lagrangian Hessian at sigma=1,
        lambda=0, lower triangle), gradient.txt and residual.txt.

        Returns:
            Output directory
        """
        out_dir = Path(config.OUTPUT_DIRECTORY if out_dir is None else out_dir)
        seed = config.DEFAULT_SEED if seed is None else seed
        mesh = build_mesh(mesh_spec)
        transcription = Transcription(spec, mesh)
        z = self._point(transcription, point, seed)
        nlp = transcription.nlp_functions(z, sigma=1.0)

        out_dir.mkdir(parents=True, exist_ok=True)
        digits = config.SIGNIFICANT_DIGITS
        spio.mmwrite(
            str(out_dir / "jacobian.mtx"),
            nlp.jacobian.to_scipy(),
            comment=f" constraint Jacobian of {spec.name}",
            field="real",
            precision=digits,
            symmetry="general",
        )
        spio.mmwrite(
            str(out_dir / "hessian.mtx"),
            nlp.hessian.to_scipy(),
            comment=" lower triangle of symmetric matrix",
            field="real",
            precision=digits,
            symmetry="general",
        )
        gradient = nlp.gradient
        (out_dir / "gradient.txt").write_text(
            "".join(f"{int(i)} {fmt(v)}\n" for i, v in zip(gradient.indices, gradient.vals)),
            encoding="utf-8",
        )
        (out_dir / "residual.txt").write_text(
            "".join(f"{fmt(v)}\n" for v in nlp.constraints), encoding="utf-8"
        )
        print(f"[+] Objective: {fmt(nlp.objective)}")
        print(f"[+] Jacobian: {nlp.jacobian.shape[0]} x {nlp.jacobian.shape[1]}, {nlp.jacobian.nnz} nonzeros")
        print(f"[+] Hessian (lower): {nlp.hessian.shape[0]} x {nlp.hessian.shape[1]}, {nlp.hessian.nnz} nonzeros")
        print(f"[+] NLP data saved to: {out_dir}")
        return out_dir

    def bench(
        self,
        spec: ProblemSpec,
        segments: List[int],
        degree: int,
        repeat: Optional[int] = None,
        output: str = "table",
        timed: bool = True,
    ) -> List[Dict[str, float]]:
        """
        Sparsity and evaluation time against mesh size

        Args:
            spec: Problem description
            segments: Segment counts to sweep
            degree: Degree of every segment
            repeat: Timed evaluations per mesh; the median is reported
            output: "table", "csv" or "json"
            timed: Include the timing column

        Returns:
            One row per segment count
        """
        repeat = config.BENCH_REPEAT if repeat is None else repeat
        rows = []
        for count in segments:
            mesh = build_mesh(MeshSpec.uniform(count, degree))
            transcription = Transcription(spec, mesh)
            (jac_rows, _), (hess_rows, _) = transcription.structures()
            points = [transcription.layout.random_point(config.DEFAULT_SEED + r) for r in range(repeat)]
            lam = np.ones(transcription.n_constraints)
            elapsed = []
            for z in points:
                start = time.perf_counter()
                transcription.nlp_functions(z, 1.0, lam)
                elapsed.append(time.perf_counter() - start)
            row = {
                "segments": count,
                "N": mesh.n,
                "n_z": transcription.n_z,
                "nnz_jac": int(jac_rows.size),
                "nnz_hess": int(hess_rows.size),
            }
            if timed:
                row["median_ms"] = 1000.0 * statistics.median(elapsed)
            rows.append(row)

        columns = list(rows[0]) if rows else []
        if output == "json":
            print(json.dumps(rows, indent=2))
        elif output == "csv":
            print(",".join(columns))
            for row in rows:
                print(",".join(f"{row[c]:.6f}" if c == "median_ms" else str(row[c]) for c in columns))
        else:
            print("  ".join(f"{c:>10}" for c in columns))
            for row in rows:
                print("  ".join(f"{row[c]:>10.3f}" if c == "median_ms" else f"{row[c]:>10}" for c in columns))
        return rows
