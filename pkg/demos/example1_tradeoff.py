"""Trade a large outer set against a small inner set on the first example.

The weight ``theta`` moves the objective between two goals. At 0 it only
rewards pushing the outer set towards the constraint box. At 1 it only
rewards shrinking the inner set that trajectories end up in. Sweeping it
exposes the compromise, and each design is certified before it is reported.

Run with ``python demos/example1_tradeoff.py [starts]``. The default of
four starts per weight keeps the run to about a minute; sixteen matches
the acceptance run.
"""

import sys

from rpisynth import io
from rpisynth.certification import certify
from rpisynth.report import design_table, set_metrics
from rpisynth.synthesis import synthesize


def main(starts=4):
    problem, options = io.load_fixture("example1_lti.json")
    for theta in (0.0, 0.5, 1.0):
        cfg = io.synthesis_config(options, theta=theta, starts=starts)
        result = synthesize(problem, cfg)
        sol = result.solution
        cert = certify(problem, sol.gains, sol.L, sol.rho, tol=1e-6, eps1=sol.eps1,
                       gammas=sol.gammas, psis=sol.psis)
        print(f"\ntheta = {theta}: objective {result.objective:.4f}, lambda {sol.lam:.5f}, "
              f"{'certified' if cert.certified else 'NOT certified'}")
        print(design_table(set_metrics(sol.L, sol.rho), sol.gains))


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 4)
