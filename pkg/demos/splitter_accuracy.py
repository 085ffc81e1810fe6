"""
Wider windows sort better
=========================

With a window of m*l past sizes and class min(g // l, m), the classes get
closer to a true sort of the input as l grows.  The error rate counts the
positions where "concatenate the classes" disagrees with "sort descending".
"""

import numpy as np

from compsched import DiscreteFinite, RngStream, classify_stream
from compsched.inputs import sample_sizes
from compsched.splitter import error_rate

dist = DiscreteFinite((4.0, 3.0, 2.0, 1.0), (0.25,) * 4)
m, n = 5, 100_000

for l in (1, 4, 16, 64):
    etas = []
    for rep in range(5):
        s = RngStream(7, rep)
        x = sample_sizes(dist, s.substream(1), n)
        etas.append(error_rate(x, classify_stream(x, m, l, "prefill", dist, s.substream(2)), m, l))
    print(f"l={l:3d}  median error rate {np.median(etas):.4f}")
