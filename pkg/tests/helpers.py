import numpy as np

from dmnls.dispersion_map import DispersionMap

REFERENCE = DispersionMap([(0.5, 2.0), (0.5, -1.0)])


def random_map(rng: np.random.Generator, max_segments: int = 5, min_average: float = 0.05) -> DispersionMap:
    """Random admissible step map with values in +-[0.2, 5]."""
    while True:
        k = int(rng.integers(1, max_segments + 1))
        durations = rng.dirichlet(np.ones(k))
        durations[-1] = 1.0 - durations[:-1].sum()
        if np.any(durations <= 1e-6):
            continue
        values = rng.uniform(0.2, 5.0, size=k) * rng.choice([-1.0, 1.0], size=k)
        gmap = DispersionMap(zip(durations, values))
        if abs(gmap.average) >= min_average:
            return gmap
