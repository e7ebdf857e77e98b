"""The coupling construction step by step: splitting two laws into overlap
and residual parts, running coupled chains, and checking the simulated
marginals against exact propagation."""

from nmcbounds import (
    Distribution,
    StochasticMatrix,
    lemma_check,
    simulate_coupled_chain,
    split_densities,
)
from nmcbounds.coupling import overlap_curve, pairchain_meet_curve
from nmcbounds.experiments import EXAMPLE1_P

mu = Distribution([0.5, 0.5])
nu = Distribution([0.75, 0.25])
laws = split_densities(mu, nu)
print("Splitting (0.5, 0.5) against (0.75, 0.25):")
print(f"  overlap q   = {laws.q}")
print(f"  overlap law = {laws.xi.probs}")
print(f"  residuals   = {laws.eta1.probs} / {laws.eta2.probs}")

P = StochasticMatrix(EXAMPLE1_P)
mu0 = Distribution.point(4, 0)
nu0 = Distribution.uniform(4)

print("\nOne coupled run (chains merge at the meet step and stay merged):")
out = simulate_coupled_chain(P, mu0, nu0, 8, rng=7)
print(f"  chain 1: {out.traj1}")
print(f"  chain 2: {out.traj2}")
print(f"  met at step {out.meet_step}")

print("\nOverlap of the exact laws vs the stepwise pair-chain meet probability:")
q = overlap_curve(P, mu0, nu0, 5)
meet = pairchain_meet_curve(P, mu0, nu0, 5)
for t in range(6):
    print(f"  t={t}: overlap {q[t]:.4f}   pair-chain met {meet[t]:.4f}   "
          f"gap {q[t] - meet[t]:+.4f}")
print("The stepwise pair chain always lags the overlap; the per-step law")
print("splitting achieves it exactly, which is what lemma_check samples:")

report = lemma_check(P, mu0, nu0, n=5, samples=50_000, rng=3)
print(f"\n  {'t':>2} {'tv1':>8} {'tv2':>8} {'q_exact':>9} {'q_emp':>9}")
for t, tv1, tv2, qe, qm in report.rows():
    print(f"  {t:>2} {tv1:>8.4f} {tv2:>8.4f} {qe:>9.4f} {qm:>9.4f}")
print(f"  passed: {report.passed}")
