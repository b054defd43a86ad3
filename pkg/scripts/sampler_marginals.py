"""Total variation between sampler marginals and closed-form laws.

Poisson sites are Poisson(rho), Polya sum sites negative binomial(rho0, z)
and Polya difference sites binomial(rho0, z/(1+z)).

    python scripts/sampler_marginals.py --n 100000 --seed 7
"""

import argparse
import math
from fractions import Fraction as F

import numpy as np

from papangelou import (Measure, Space, Truncation, poisson_kernel, polya_difference_kernel,
                        polya_sum_kernel, sample)


def pmfs(name, rho0, z=None):
    if name == "poisson":
        return lambda k: math.exp(k * math.log(rho0) - rho0 - math.lgamma(k + 1))
    if name == "polya_sum":
        return lambda k: math.exp(math.lgamma(k + rho0) - math.lgamma(rho0) - math.lgamma(k + 1)
                                  + rho0 * math.log(1 - z) + k * math.log(z))
    p = z / (1 + z)
    return lambda k: math.comb(rho0, k) * p ** k * (1 - p) ** (rho0 - k) if k <= rho0 else 0.0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--replicas", type=int, default=4)
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args()
    X = Space(("a", "b", "c"))
    cases = [("poisson", poisson_kernel(Measure(X, (F(1),) * 3)), 1.0, None),
             ("polya_sum", polya_sum_kernel(F(3, 10), Measure(X, (F(1),) * 3)), 1.0, 0.3),
             ("polya_difference", polya_difference_kernel(F(1, 2), Measure(X, (3, 3, 3))), 3, 0.5)]
    trunc = Truncation(max_mass=12, mass_limit=200)
    print("kernel,method,site,tv")
    for name, pi, rho0, z in cases:
        pmf = pmfs(name, rho0, z)
        for method in ("exact", "product_form", "birth_death"):
            batch = sample(pi, method, args.n, args.seed, args.replicas, args.workers, trunc)
            for i, s in enumerate(X.sites):
                col = batch.counts[:, i]
                top = int(col.max()) + 30
                emp = np.bincount(col, minlength=top) / len(col)
                tv = 0.5 * sum(abs(emp[k] - pmf(k)) for k in range(top))
                print(f"{name},{method},{s},{tv:.4f}")


if __name__ == "__main__":
    main()
