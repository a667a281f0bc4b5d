"""
Timing
======

Cost per sweep grows roughly with the cube of the node count, and linearly
with the number of coupled graphs.
"""

from stggm.benchmark import benchmark

res = benchmark(p_values=(25, 50, 100), graph_counts=(1, 2, 4), iters=200, graph_iters=50)
for kind, size, threads, secs in res.rows:
    print("%-13s %4d  %.2fs" % (kind, size, secs))
print("graphs sweep: %.2fs per graph, R^2 %.3f" % (res.linearity["slope"], res.linearity["r2"]))
