"""Proxy port blocking: closed form against the event simulator.

A proxy with C ports and Poisson arrivals holding ports for exponential
times is an Erlang loss system. We compute the blocking probability
directly, then let the simulator measure it.
"""
from hybridvod import analytic, report
from hybridvod.engine import SimConfig, run

print("Erlang-B blocking for 10 ports")
for load in (2.0, 5.0, 8.0, 12.0):
    print(f"  {load:5.1f} Erlangs -> {analytic.erlang_b(load, 10):.5f}")

# Splitting ports into partitions scanned from a random start: the first
# free port is found at partition j with a geometric probability.
print("\nfirst-success probability by partition (k=4, half-full partitions)")
for j in range(1, 6):
    print(f"  j={j}: {analytic.free_port_discovery_prob(j, 4, 10, 5):.4f}")

# One proxy, one viewer, one 10-port partition, load 5 Erlangs.
scenario = report.erlang_scenario(SimConfig(seed=4), load=5.0, ports=10, arrivals=100_000)
rep = run(scenario)
print(f"\nsimulated {rep.total_arrivals} arrivals: blocking {rep.blocking_probability():.5f} "
      f"vs analytic {analytic.erlang_b(5.0, 10):.5f}")
