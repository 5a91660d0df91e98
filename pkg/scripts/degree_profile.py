"""Degree tail of the preferential-attachment network and the censored versions of it.

Prints Pr(degree > K) for K = 1..7 and the maximum degree, averaged over seeds,
for both attachment weightings (degree, and degree + 1).

    python3 scripts/degree_profile.py seeds=10
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from _common import load_config

from netmis.graph import gen_preferential_attachment
from netmis.perturb import censor_degree


@dataclass
class ProfileConfig:
    """Degree profile settings."""

    n: int = 3000
    seeds: int = 5
    max_k: int = 7


def run(cfg: ProfileConfig):
    ks = np.arange(1, cfg.max_k + 1)
    print("weighting    " + " ".join(f"K>{k:<5d}" for k in ks) + " max_degree")
    for appeal in (0.0, 1.0):
        nets = [gen_preferential_attachment(cfg.n, s, zero_appeal=appeal) for s in range(cfg.seeds)]
        tail = np.mean([[(a.degree > k).mean() for k in ks] for a in nets], axis=0)
        top = np.median([a.degree.max() for a in nets])
        label = "degree" if appeal == 0 else "degree+1"
        print(f"{label:<12} " + " ".join(f"{t:<7.3f}" for t in tail) + f" {top:.0f}")
    a = gen_preferential_attachment(cfg.n, 0)
    kept = [censor_degree(a, int(k), 1).num_edges / a.num_edges for k in ks]
    print("edges kept after censoring at K: " + " ".join(f"{x:.3f}" for x in kept))


if __name__ == "__main__":
    run(load_config(ProfileConfig))
