"""Hop counts of cache-miss searches as peers keep more adjacent links.

Every trial draws a fresh set of active links for every peer, then searches
a random chunk from a random proxy. More active intra-level links let a
cluster head answer for its members, so searches end higher up the tiers.
"""
from hybridvod import report
from hybridvod.engine import SimConfig, histogram_stats, sweep_adjacency

hists = sweep_adjacency(SimConfig(seed=3), sizes=range(1, 7), trials=2000)
for size, hist in hists.items():
    mean, var = histogram_stats(hist)
    print(f"adjacency {size}: mean {mean:5.2f}  variance {var:5.2f}")

print("\nhistogram at adjacency 1 (unimodal: %s)" % report.is_unimodal(hists[1]))
peak = max(hists[1].values())
for hop, n in sorted(hists[1].items()):
    print(f"  {hop:2d} {'#' * round(40 * n / peak)} {n}")
