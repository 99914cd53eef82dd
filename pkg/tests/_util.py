import numpy as np

from discrimdes import make_design


def random_design(rng, kmin=3, kmax=8):
    k = int(rng.integers(kmin, kmax + 1))
    return make_design(rng.uniform(-1, 1, k), rng.dirichlet(np.ones(k)))
