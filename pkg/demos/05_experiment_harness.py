"""The seeded experiment harness at desk scale.

Reproduces the three study types in miniature: an average-coherence table
over seeded Gaussian frames, phase diagrams comparing decoding pipelines,
and the coherence-versus-condition-number sweep.  Every number is a pure
function of the configuration and the root seed.
"""

import numpy as np

from framecond import conic, experiments, frames

settings = conic.SolverSettings(gap_tol=1e-6, feas_tol=1e-6)

print("=== average coherence before/after preconditioning (M = 32, 5 trials) ===")
rows = experiments.coherence_table([4, 8, 12, 16], 32, trials=5, seed=0, settings=settings)
print(f"{'m':>3} {'mean mu(Phi)':>13} {'mean mu(GPhi)':>14} {'welch':>8}")
for row in rows:
    print(f"{row.m:>3} {row.mean_mu_phi:>13.4f} {row.mean_mu_precond:>14.4f} {row.welch_bound:>8.4f}")

print()
print("=== phase diagrams, basis-pursuit decoder (M = 16, 20 trials) ===")
grid = list(range(2, 16, 2))
plain = experiments.phase_diagram(16, grid, trials=20, seed=1, pipeline="phi",
                                  decoder="bp", settings=settings)
mapped = experiments.phase_diagram(16, grid, trials=20, seed=1, pipeline="gphi",
                                   decoder="bp", settings=settings)
print(f"{'m':>3} {'plain 50% curve':>16} {'preconditioned':>15}")
for i, m in enumerate(grid):
    print(f"{m:>3} {plain.curve[i]:>16} {mapped.curve[i]:>15}")
print("(basis pursuit is invariant under nonsingular G, so the curves agree;")
print(" rerun with decoder='omp' to see the pipelines genuinely part ways)")

print()
print("=== coherence against the condition-number budget (16 x 32 frame) ===")
fr = frames.random_gaussian_frame(16, 32, seed=7)
print(f"mu(Phi) = {frames.coherence(fr):.4f}, unconstrained optimum would allow any kappa")
for t2 in (1.0, 0.25):
    record = experiments.condition_sweep(fr, t2, [1.0, 2.0, 3.0, 4.0, 5.0], settings)
    line = ", ".join(f"{q:.4f}@k={k:.1f}" for q, k in zip(record.coherence, record.condition_number))
    print(f"floor t2 = {t2}: {line}")
print("with the eigenvalue floor at 1 the matrix is pinned to the identity, so the")
print("coherence cannot move; relaxing the floor buys real improvement as t1 grows")
