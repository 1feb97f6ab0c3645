"""Seeded random chains for sweeps and property checks."""

from __future__ import annotations

import numpy as np

from .model import ChainSpec, FunctionSpec, derive_profiles


def random_chain(rng: np.random.Generator, n_min: int = 2, n_max: int = 4,
                 speed=(1.0, 20.0), rate=(1.0, 50.0), deadline=(0.005, 0.1),
                 require_residual: bool = True) -> ChainSpec:
    """Draw a chain; with ``require_residual`` every function has ``rho > 0``."""
    while True:
        n = int(rng.integers(n_min, n_max + 1))
        fns = [FunctionSpec(nominal_speed=float(rng.uniform(*speed)),
                            compute_cost_rate=float(rng.uniform(0.5, 10.0)),
                            queue_cost_rate=float(rng.uniform(0.1, 2.0)),
                            switch_delay=float(rng.uniform(0.001, 0.05)))
               for _ in range(n)]
        spec = ChainSpec(float(rng.uniform(*rate)), float(rng.uniform(*deadline)), fns)
        if not require_residual or all(p.residual_rate > 0 for p in derive_profiles(spec)):
            return spec
