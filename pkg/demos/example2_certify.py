"""Check the published two-input design of the second example, then simulate it.

The stored outer-set matrix, inner-set levels and gains were printed with
five decimals. That rounding is enough to break the certificate at a tight
tolerance, while a loose one still goes through. This script shows both
verdicts, cross-checks the loose one without multipliers and finally drives
the closed loop with worst-case disturbances.

Run with ``python demos/example2_certify.py``.
"""

from rpisynth import io
from rpisynth.certification import certify, one_step_worst_case
from rpisynth.closed_loop import build_grids
from rpisynth.plant import augment
from rpisynth.report import design_table, residual_table, set_metrics
from rpisynth.simulation import ScenarioConfig, rollout


def main():
    problem, _ = io.load_fixture("example2.json")
    sol = io.load_fixture("example2_solution.json")
    print(f"{problem.name}: {problem.n_v} vertices, augmented state of size {problem.n_xi}")

    for tol in (1e-9, 1e-2):
        cert = certify(problem, sol["gains"], sol["L"], sol["rho"], tol=tol, eps1=sol["eps1"],
                       gammas=sol["gammas"], psis=sol["psis"])
        print(f"\n--- tolerance {tol:g} ---")
        print(residual_table(cert.residual, tol))
        print("verdict:", "certified" if cert.certified else "NOT certified",
              f"(lambda* = {cert.lam_star:.6f}, k~ = {cert.k_tilde})")

    # The same question answered row by row with plain support-function LPs.
    aug = augment(problem)
    rep = one_step_worst_case(build_grids(aug, sol["gains"]), sol["L"], sol["rho"],
                              cert.lam_star, aug.Dbig, eps1=sol["eps1"])
    print(f"\nmultiplier-free check: worst outer level {rep.worst_outer:.6f}, "
          f"inner excess {rep.inner_excess:.3e}")

    print()
    print(design_table(set_metrics(sol["L"], sol["rho"]), sol["gains"]))

    scen = ScenarioConfig(horizon=200, rollouts=50, alpha="vertex-hop", disturbance="extreme")
    summary = rollout(problem, sol["gains"], sol["L"], sol["rho"], scen, k_tilde=cert.k_tilde)
    print("\nsimulation:", summary.as_dict())


if __name__ == "__main__":
    main()
