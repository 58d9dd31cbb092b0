"""Delivered throughput per viewer as proxies serve larger audiences.

Port count and disk bandwidth stay fixed while the viewer population behind
each proxy grows, so each viewer's share of delivered kbps shrinks.
"""
from hybridvod.engine import SimConfig, run

for viewers in (20, 30, 40):
    rep = run(SimConfig(seed=1, viewers_min=viewers, viewers_max=viewers))
    print(f"{viewers} viewers/proxy: {rep.throughput_per_viewer():7.1f} kbps per viewer, "
          f"blocking {rep.blocking_probability():.3f}, "
          f"cache hits {rep.cache_hits}, searches {rep.searches()}")
