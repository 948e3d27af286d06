"""Saturation of new triphones and the variance changepoint test.

Run: python demos/04_saturation.py
"""

import numpy as np

from phonorich import estimate_duration, variance_changepoint

# variance shifts from 1 to 9 at index 500
rng = np.random.default_rng(42)
x = np.concatenate([rng.normal(0, 1, 500), rng.normal(0, 3, 500)])
res = variance_changepoint(x)
print(f"shift series: statistic {res.statistic:.3f} > {res.critical_value}? {res.significant}, at {res.changepoint_index}")

flat = variance_changepoint(rng.normal(0, 1, 1000))
print(f"constant variance: statistic {flat.statistic:.3f}, changepoint {flat.changepoint_index}")

# a selection trace typically starts high and volatile, then settles
decay = np.maximum(0, 40 * np.exp(-np.arange(2000) / 300) + rng.normal(0, 3, 2000)).round()
sat = variance_changepoint(decay)
print(f"decaying new-triphone series: stabilizes near sentence {sat.changepoint_index}")

for tokens in (2_680_000_000, 33_000_000):
    print(f"{tokens:>13,} tokens ~ {estimate_duration(tokens).hours:,.0f} h of speech")
