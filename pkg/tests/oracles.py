"""Independent reference values used by the tests.

Closed-form pmfs are written out with the math module only, and the
enumeration oracle evaluates the law of a local kernel as a product of
one-site factors, bypassing the library's partition machinery.
"""

import math
import random
from fractions import Fraction as F
from itertools import product


def poisson_pmf(k, lam):
    return math.exp(-lam + k * math.log(lam) - math.lgamma(k + 1)) if lam > 0 else float(k == 0)


def nb_pmf(k, r, z):
    """Counts with generating function ((1 - z) / (1 - z t))^r."""
    return math.exp(math.lgamma(r + k) - math.lgamma(r) - math.lgamma(k + 1)
                    + k * math.log(z) + r * math.log1p(-z))


def binom_pmf(k, n, p):
    return math.comb(n, k) * p ** k * (1 - p) ** (n - k) if 0 <= k <= n else 0.0


def tv_pmf(empirical: dict, pmf, support=120) -> float:
    mass = 0.0
    total = 0.0
    for k in range(support):
        p = pmf(k)
        total += abs(empirical.get(k, 0.0) - p)
        mass += p
    total += abs(1 - mass)  # truncated analytic mass
    total += sum(v for k, v in empirical.items() if k >= support)
    return total / 2


def tv_dict(a: dict, b: dict) -> float:
    keys = set(a) | set(b)
    return sum(abs(a.get(k, 0) - b.get(k, 0)) for k in keys) / 2


def local_law(rho, inc, max_per_site):
    """Normalized law of a local kernel rho_x + sum_{j<=n} c_x(j) by direct products.

    ``inc(i, n)`` gives the increment; the law factorizes over sites with
    one-site weight prod_{j<n} pi(j d_x, {x}) / n!.
    """
    site_weights = []
    for i, r in enumerate(rho):
        w = [F(1)]
        level = F(r)
        for n in range(1, max_per_site + 1):
            w.append(w[-1] * level / n)
            level = level + inc(i, n)
            if level < 0:
                level = F(0)
        site_weights.append(w)
    law = {}
    for counts in product(*(range(len(w)) for w in site_weights)):
        p = F(1)
        for i, n in enumerate(counts):
            p *= site_weights[i][n]
        if p:
            law[counts] = p
    z = sum(law.values())
    return {k: v / z for k, v in law.items()}


def random_local_spec(rng: random.Random, n_sites=3, depth=6):
    """Random rational local reinforcement in one of four shapes.

    Returns (kind, rho, increments) with increments as {site_index: [c(1), ...]}.
    """
    kind = rng.choice(["common_linear", "site_linear", "generic", "difference"])
    den = rng.choice([1, 2, 3, 4, 5, 10])
    if kind == "common_linear":
        c = F(rng.randint(0, 9), den)
        rho = [F(rng.randint(0, 6), den) for _ in range(n_sites)]
        incs = {i: [c] * depth for i in range(n_sites)}
    elif kind == "site_linear":
        cs = [F(rng.randint(0, 9), den) for _ in range(n_sites)]
        while len(set(cs)) == 1:
            cs[0] += F(1, den)
        # rho_x = 0 would make site x unreachable and its c irrelevant
        rho = [F(rng.randint(1, 6), den) for _ in range(n_sites)]
        incs = {i: [cs[i]] * depth for i in range(n_sites)}
    elif kind == "generic":
        rho = [F(rng.randint(1, 6), den) for _ in range(n_sites)]
        incs = {i: [F(rng.randint(0, 9), den) for _ in range(depth)] for i in range(n_sites)}
    else:
        c = F(rng.randint(1, 9), den)
        rho = [c * rng.randint(0, 4) for _ in range(n_sites)]
        incs = {i: [-c] * depth for i in range(n_sites)}
    return kind, rho, incs
