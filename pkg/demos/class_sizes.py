"""
Size classes from a sliding comparison window
=============================================

Every arrival is compared with the previous m sizes; the number of them that
are strictly larger is its class.  Class 0 collects the jobs that beat the
whole window, class m the ones beaten by all of it.
"""

import numpy as np

from compsched import Pareto, RngStream, classify_stream
from compsched.inputs import sample_sizes, tail
from compsched.oracle import class_tail_quadrature, order_stat_prob_exact

alpha, m, n = 1.44, 3, 2_000_000
x = sample_sizes(Pareto(alpha), RngStream(2024).substream(1), n)
cls = classify_stream(x, m)

# each class holds a quarter of the jobs
print("class fractions:", np.round(np.bincount(cls, minlength=m + 1) / n, 4))

# joint survival P[B > x, class k] on a few points, next to the exact law
grid = np.array([2.0, 5.0, 10.0, 30.0, 100.0])
print(f"\n{'x':>6}" + "".join(f"{'k=' + str(k):>22}" for k in range(m + 1)))
for g in grid:
    cells = []
    for k in range(m + 1):
        emp = np.mean((x > g) & (cls == k))
        cells.append(f"{emp:10.3e} ({class_tail_quadrature(Pareto(alpha), m, k, g):8.2e})")
    print(f"{g:6.0f}" + "".join(f"{c:>22}" for c in cells))

# far out, class k decays like tail(x)^(k+1), so larger classes fall off faster
p = tail(Pareto(alpha), 100.0)
print("\nleading-order law at x=100:", [f"{order_stat_prob_exact(m, k, p):.2e}" for k in range(m + 1)])
