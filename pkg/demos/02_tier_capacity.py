"""How much streaming capacity survives as content climbs the tiers.

Each level shares a fraction lambda of what the level below shares, so the
capacity left after l levels follows a geometric series. With tiered chunk
placement the peers at level l hold about lambda**l of the catalog, which
is what the simulator's placement profile shows.
"""
from hybridvod import analytic
from hybridvod.engine import SimConfig, build_world, placement_profile

print("P(l) with P0=100, C1=10, lambda=0.5")
for l in (0, 1, 2, 3, 10, 30):
    p = analytic.TierCapacityParams(100, 10, 0.5, l)
    print(f"  l={l:2d}: closed {analytic.tier_capacity_closed(p):9.4f}"
          f"  iterative {analytic.tier_capacity_iterative(p):9.4f}")

config = SimConfig(seed=2)
topo, catalog, placement, _ = build_world(config)
measured = placement_profile(topo, catalog, placement)
expected = analytic.tier_profile(config.share_fraction, topo.top - 1)
print(f"\nfraction of catalog held per peer (lambda={config.share_fraction})")
for lvl, frac in measured.items():
    print(f"  level {lvl:2d}: measured {frac:.4f}  expected {expected[lvl]:.4f}")
