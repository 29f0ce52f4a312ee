"""
Example usage of the LGR sparse-AD toolkit
"""
from orchestrator import CollocationOrchestrator


def example_basic():
    """Example: Verify the built-in energy problem"""
    print("Example 1: Energy Problem Check\n" + "="*50)

    from sparsead import builtin_problem

    orchestrator = CollocationOrchestrator()
    spec, mesh_spec = builtin_problem("energy")
    passed = orchestrator.check(spec, mesh_spec, at="ones")

    print(f"\nAll checks passed: {passed}")


def example_custom():
    """Example: Custom problem text on a finer mesh"""
    print("\n\nExample 2: Custom Problem\n" + "="*50)

    from sparsead import MeshSpec, ProblemSpec
    from sparsead.transcribe import Bound

    spec = ProblemSpec.from_strings(
        n_x=2,
        n_u=1,
        objective="u1^2 + 0.1*x1^2",
        dynamics=["x2", "u1 - sin(x1)"],
        t0=Bound(0.0),
        tf=Bound(2.0),
        x_initial=(Bound(0.5), Bound(0.0)),
        name="pendulum",
    )
    orchestrator = CollocationOrchestrator()
    orchestrator.check(spec, MeshSpec.uniform(4, 5), at="random", seed=3)


def example_programmatic():
    """Example: Programmatic use of the NLP callbacks"""
    print("\n\nExample 3: NLP Callbacks\n" + "="*50)

    from sparsead import NlpProblem, Transcription, build_mesh, builtin_problem

    spec, mesh_spec = builtin_problem("nonlinear")
    transcription = Transcription(spec, build_mesh(mesh_spec))
    problem = NlpProblem(transcription)
    z = transcription.layout.ones_point()

    print("\n1. Objective...")
    print(f"   J = {problem.objective(z)}")

    print("\n2. Constraint Jacobian structure...")
    rows, cols = problem.jacobianstructure()
    print(f"   {rows.size} nonzeros over {transcription.n_constraints} rows")

    print("\n3. Lagrangian Hessian at unit multipliers...")
    values = problem.hessian(z, [1.0] * transcription.n_constraints, 1.0)
    print(f"   {values.size} lower-triangle entries")


EXAMPLES = {
    "basic": example_basic,
    "custom": example_custom,
    "programmatic": example_programmatic,
}


if __name__ == "__main__":
    import sys

    selected = sys.argv[1:] or list(EXAMPLES)
    unknown = [name for name in selected if name not in EXAMPLES]
    if unknown:
        print(f"Usage: python example_usage.py [{'|'.join(EXAMPLES)}] ...")
        sys.exit(2)
    for name in selected:
        EXAMPLES[name]()
