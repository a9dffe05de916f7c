#!/usr/bin/env python3
"""Trace the two-phase ranking weights and the decaying compensators.

While alpha > 1 a quadratic through (0, alpha), (m, 1), (2m, alpha) favors
high-divergence clients; once alpha decays past 1 a linear ramp favors
low-divergence clients. Late joiners carry a beta multiplier that decays to
1, and below-average updaters get a straggler boost.
"""

from fedsim.ranking import (
    CompensatorState,
    RankEntry,
    build_rank_entries,
    decay_compensators,
    select_top_k,
    solve_quadratic,
    weight_early,
    weight_late,
)

m_t = 10

print("divergence position -> weight, early (alpha=2) vs late (alpha<=1) phase")
b = solve_quadratic(2.0, m_t)
print("pos:   " + "  ".join(f"{p:>5}" for p in range(1, m_t + 1)))
print("early: " + "  ".join(f"{weight_early(p, *b):>5.2f}" for p in range(1, m_t + 1)))
print("late:  " + "  ".join(f"{weight_late(p, m_t):>5.2f}" for p in range(1, m_t + 1)))

# a round of ranking: divergences and participations become positions,
# positions become weights, stragglers get boosted, top-K upload
comp = CompensatorState(alpha=2.0, delta_alpha=0.1, delta_beta=0.05, gamma=1.2, beta0=1.5)
entries = [
    RankEntry(client_id=0, divergence=0.90, participation=0.8, n_updates=8),
    RankEntry(client_id=1, divergence=0.40, participation=0.2, n_updates=2),
    RankEntry(client_id=2, divergence=0.10, participation=0.5, n_updates=5),
    RankEntry(client_id=3, divergence=0.70, participation=0.1, n_updates=1),
]
build_rank_entries(entries, comp, m_t=len(entries))
print("\nclient  L      A    P_L  P_A  boosted  weight")
for e in entries:
    print(
        f"{e.client_id:>6}  {e.divergence:.2f}  {e.participation:.2f}  "
        f"{e.pos_divergence:>3}  {e.pos_participation:>3}  {str(e.boosted):>7}  {e.weight:.4f}"
    )
print("selected for upload (K=2):", select_top_k(entries, 2))

decay_compensators(comp, [e.client_id for e in entries])
print(f"\nafter decay: alpha {comp.alpha:.2f}, beta of client 0 {comp.beta_for(0):.2f}")
for _ in range(12):
    decay_compensators(comp, [0])
print(f"after 13 ranked rounds: alpha {comp.alpha:.2f}, beta floor reached: {comp.beta_for(0)}")
