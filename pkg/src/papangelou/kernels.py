"""Kernel catalog: Poisson, Polya sum/difference, local reinforcement, pair interaction.

Reinforcement tables hold *increments* ``c_x(n)`` with ``c_x(0) = 0``; a
kernel applies the cumulative sum ``C_x(n) = c_x(1) + ... + c_x(n)``. Where a
negative reinforcement drives the intensity at a site to zero, further points
there are unreachable; the first such multiplicity becomes the kernel's
support bound and configurations beyond it evaluate to the zero measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Real
from typing import Callable, Sequence

from .core import (Kernel, Measure, ParameterError, SiteMap, Space,
                   close, is_exact)

__all__ = [
    "DynkinViolation", "LocalReinforcement", "PairDensity", "poisson_kernel",
    "polya_sum_kernel", "polya_difference_kernel", "local_reinforcement_kernel",
    "linear_kernel", "remark_kernel", "interaction_kernel", "pushforward_kernel",
    "CATALOG", "describe",
]

DEFAULT_MASS_BOUND = 64


class DynkinViolation(ValueError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


def _increment_fn(space: Space, c) -> Callable[[int, int], Real]:
    """Normalize a reinforcement spec to ``(site_index, n) -> c_x(n)``.

    Accepted forms: ``None`` (zero), a callable ``(site, n)``, or a mapping
    keyed by ``(site, n)`` tuples or by site with a scalar (constant in n) or
    a sequence ``[c(1), c(2), ...]`` (zero past its end) as value.
    """
    if c is None:
        return lambda i, n: 0
    if callable(c):
        return lambda i, n: c(space.sites[i], n)
    by_pair, by_site = {}, {}
    for key, val in c.items():
        if isinstance(key, tuple) and len(key) == 2 and key not in space:
            site, n = key
            if n < 1:
                raise ParameterError(f"reinforcement index must be >= 1, got {n}")
            by_pair[(space.index(site), int(n))] = val
        else:
            by_site[space.index(key)] = val

    def inc(i, n):
        if (i, n) in by_pair:
            return by_pair[(i, n)]
        v = by_site.get(i, 0)
        if isinstance(v, Sequence) and not isinstance(v, str):
            return v[n - 1] if n <= len(v) else 0
        return v

    return inc


def _cumulative(inc):
    @lru_cache(maxsize=None)
    def cum(i, n):
        if n == 0:
            return 0
        return cum(i, n - 1) + inc(i, n)
    return cum


def _reach_bounds(space, base, cum, mass_bound, label):
    """Per-site first multiplicity with zero intensity; error on negativity."""
    bounds = []
    for i in range(space.size):
        bound = None
        for n in range(mass_bound + 1):
            v = base[i] + cum(i, n)
            eps = 0 if is_exact(v) else 1e-12 * max(1.0, abs(base[i]))
            if v < -eps:
                raise ParameterError(
                    f"{label}: intensity at site {space.sites[i]!r} is negative "
                    f"({v}) at multiplicity {n}")
            if abs(v) <= eps:
                bound = n
                break
        bounds.append(bound)
    return tuple(bounds)


def _clip(v):
    # float round-off at a support bound can leave -1e-17
    return v if v > 0 else 0 * v


@dataclass(frozen=True)
class LocalReinforcement:
    """Base measure plus per-site signed increments ``c_x(n)``."""

    rho: Measure
    c: object = None
    mass_bound: int = DEFAULT_MASS_BOUND

    def increment(self, site, n):
        return _increment_fn(self.rho.space, self.c)(self.rho.space.index(site), n)


@dataclass(frozen=True)
class PairDensity:
    """Nonnegative pair density ``f(x, y)`` as a dense matrix over a space."""

    space: Space
    matrix: tuple

    def __post_init__(self):
        m = tuple(tuple(row) for row in self.matrix)
        object.__setattr__(self, "matrix", m)
        n = self.space.size
        if len(m) != n or any(len(r) != n for r in m):
            raise ValueError(f"pair density must be {n}x{n}")
        if any(v < 0 for r in m for v in r):
            raise ValueError("pair density must be nonnegative")

    @classmethod
    def from_potential(cls, space: Space, phi) -> "PairDensity":
        """``f = exp(-phi)``; ``phi = inf`` gives a hard core."""
        return cls(space, tuple(
            tuple(0.0 if v == math.inf else math.exp(-v) for v in row) for row in phi))

    @classmethod
    def constant(cls, space: Space, value=1) -> "PairDensity":
        return cls(space, tuple((value,) * space.size for _ in range(space.size)))

    def __call__(self, x, y):
        return self.matrix[self.space.index(x)][self.space.index(y)]

    def is_symmetric(self, tol=0.0) -> bool:
        n = self.space.size
        return all(close(self.matrix[i][j], self.matrix[j][i], tol) if tol
                   else self.matrix[i][j] == self.matrix[j][i]
                   for i in range(n) for j in range(i + 1, n))

    @property
    def diagonal(self) -> tuple:
        return tuple(self.matrix[i][i] for i in range(self.space.size))


def poisson_kernel(rho: Measure) -> Kernel:
    w = rho.weights
    return Kernel(rho.space, lambda counts: w, name="poisson",
                  params={"family": "poisson", "rho": w})


def polya_sum_kernel(z, rho: Measure) -> Kernel:
    if not 0 < z < 1:
        raise ParameterError(f"Polya sum needs 0 < z < 1, got z={z}")
    w = rho.weights

    def fn(counts):
        return tuple(z * (r + n) for r, n in zip(w, counts))

    return Kernel(rho.space, fn, name="polya_sum",
                  params={"family": "polya_sum", "z": z, "rho": w})


def _as_integer(v):
    if isinstance(v, int):
        return v
    if isinstance(v, Fraction) and v.denominator == 1:
        return int(v)
    if isinstance(v, float) and v.is_integer():
        return int(v)
    return None


def polya_difference_kernel(z, rho: Measure) -> Kernel:
    if not z > 0:
        raise ParameterError(f"Polya difference needs z > 0, got z={z}")
    ints = tuple(_as_integer(v) for v in rho.weights)
    if any(v is None for v in ints):
        raise ParameterError("Polya difference needs an integer-valued rho")
    w = rho.weights
    zero = (0 * z,) * rho.space.size

    def fn(counts):
        if any(n > r for n, r in zip(counts, ints)):
            return zero
        return tuple(z * (r - n) for r, n in zip(w, counts))

    return Kernel(rho.space, fn, name="polya_difference", support_bound=ints,
                  params={"family": "polya_difference", "z": z, "rho": w})


def local_reinforcement_kernel(spec: LocalReinforcement, name="local_reinforcement") -> Kernel:
    space = spec.rho.space
    base = spec.rho.weights
    inc = _increment_fn(space, spec.c)
    cum = _cumulative(inc)
    bounds = _reach_bounds(space, base, cum, spec.mass_bound, name)
    bounded = None if all(b is None for b in bounds) else bounds
    zero = tuple(0 * v for v in base)

    def fn(counts):
        if bounded is not None and any(b is not None and n > b for n, b in zip(counts, bounded)):
            return zero
        return tuple(_clip(r + cum(i, n)) for i, (r, n) in enumerate(zip(base, counts)))

    return Kernel(space, fn, name=name, support_bound=bounded,
                  params={"family": "local_reinforcement", "rho": base, "increment": inc})


def linear_kernel(rho: Measure, c) -> Kernel:
    """``rho + c * mu`` with a site-independent constant ``c``."""
    space = rho.space
    k = local_reinforcement_kernel(
        LocalReinforcement(rho, {s: c for s in space.sites}), name="linear")
    k.params["c"] = c
    return k


def remark_kernel() -> Kernel:
    """The three-site kernel on {-1, 0, 1} that satisfies (J) but not (J').

    ``pi(mu) = 1/2 (1 - mu(-1)) d_{-1} + 1/2 d_0 + 1/2 (1 + mu(1)) d_1``.
    """
    half = Fraction(1, 2)
    space = Space((-1, 0, 1))
    rho = Measure(space, (half, half, half))
    return local_reinforcement_kernel(
        LocalReinforcement(rho, {-1: -half, 0: 0, 1: half}), name="remark")


def interaction_kernel(rho: Measure, f: PairDensity, c=None, *, strict: bool = True,
                       mass_bound: int = DEFAULT_MASS_BOUND) -> Kernel:
    """Pair-interaction kernel with a Boltzmann factor ``V(z, mu) = prod f(z, w)^mu(w)``.

    Positive diagonal: ``pi(mu, {z}) = V(z, mu) (rho_z + C_z(mu_z))`` with ``c``
    read as increments. Vanishing diagonal: ``pi(mu, {z}) = V(z, mu) rho_z +
    [mu_z > 0] V(z, mu restricted off z) c_z(mu_z)`` with ``c`` read as values.
    ``strict=False`` skips the symmetry requirement (for building counterexamples).
    """
    space = rho.space
    if f.space != space:
        raise ParameterError("pair density and rho live on different spaces")
    if strict and not f.is_symmetric():
        raise ParameterError("pair density must be symmetric")
    diag = f.diagonal
    if all(d > 0 for d in diag):
        regime = "positive_diagonal"
    elif all(d == 0 for d in diag):
        regime = "vanishing_diagonal"
    else:
        raise ParameterError("pair density diagonal must be all positive or all zero")
    F = f.matrix
    base = rho.weights
    n_sites = space.size
    inc = _increment_fn(space, c)

    def boltzmann(i, counts, skip=None):
        v = 1
        for j, n in enumerate(counts):
            if n and j != skip:
                v = v * F[i][j] ** n
        return v

    bounded = None
    if regime == "positive_diagonal":
        cum = _cumulative(inc)
        bounds = _reach_bounds(space, base, cum, mass_bound, "interaction")
        bounded = None if all(b is None for b in bounds) else bounds
        zero = tuple(0 * v for v in base)

        def fn(counts):
            if bounded is not None and any(
                    b is not None and n > b for n, b in zip(counts, bounded)):
                return zero
            return tuple(boltzmann(i, counts) * _clip(base[i] + cum(i, counts[i]))
                         for i in range(n_sites))
    else:
        for i in range(n_sites):
            for n in range(1, mass_bound + 1):
                if inc(i, n) < 0:
                    raise ParameterError("vanishing-diagonal reinforcement must be >= 0")

        def fn(counts):
            out = []
            for i in range(n_sites):
                v = boltzmann(i, counts) * base[i]
                if counts[i]:
                    v = v + boltzmann(i, counts, skip=i) * inc(i, counts[i])
                out.append(v)
            return tuple(out)

    return Kernel(space, fn, name="interaction", support_bound=bounded,
                  params={"family": "interaction", "regime": regime, "rho": base,
                          "f": F, "increment": inc})


def _preimage(counts, G: SiteMap, bound):
    """An admissible source configuration mapping onto ``counts``, or None."""
    out = [0] * G.source.size
    for y, fiber in enumerate(G.fibers()):
        left = counts[y]
        for i in fiber:
            cap = left if bound is None or bound[i] is None else min(left, bound[i])
            out[i] = cap
            left -= cap
        if left:
            return None
    return tuple(out)


def pushforward_kernel(pi: Kernel, G: SiteMap, probe_mass: int = 4, tol: float = 1e-9) -> Kernel:
    """Image kernel ``pi'(nu, {y}) = pi(mu, G^{-1}{y})`` for any preimage ``mu`` of ``nu``.

    Raises DynkinViolation (with witness) if two probed preimages disagree.
    """
    from .checks import check_dynkin

    report = check_dynkin(pi, G, probe_mass, tol)
    if report.verdict == "fail":
        raise DynkinViolation(f"{pi.name} violates Dynkin's condition for this map",
                              report.witness)
    fibers = G.fibers()
    bound = pi.support_bound
    target_bound = None
    if bound is not None:
        target_bound = tuple(
            None if any(bound[i] is None for i in f) else sum(bound[i] for i in f)
            for f in fibers)
    zero = (0 * pi.intensity((0,) * G.source.size)[0],) * G.target.size

    def fn(counts):
        mu = _preimage(counts, G, bound)
        if mu is None:
            return zero
        w = pi.intensity(mu)
        return tuple(sum(w[i] for i in f) for f in fibers)

    return Kernel(G.target, fn, name=f"push({pi.name})", support_bound=target_bound,
                  params={"family": "pushforward", "source": pi.name,
                          "map": G.as_dict()})


CATALOG = {
    "poisson": {
        "formula": "pi(mu, .) = rho  (constant kernel; Mecke characterization)",
        "parameters": "rho: nonnegative weight per site",
        "postulates": {"A1": True, "A2": True, "A2prime": True, "J": True,
                       "Jprime": True, "BC": True, "simple": False},
        "notes": "simple only if rho has no atoms, which never happens on a finite space with rho > 0",
    },
    "polya_sum": {
        "formula": "pi(mu, .) = z (rho + mu)",
        "parameters": "0 < z < 1; rho: nonnegative weight per site",
        "postulates": {"A1": True, "A2": True, "A2prime": True, "J": True,
                       "Jprime": True, "BC": True, "simple": False},
        "notes": "per-site counts are negative binomial NB(rho_x, z)",
    },
    "polya_difference": {
        "formula": "pi(mu, .) = z (rho - mu) if mu <= rho, and 0 otherwise",
        "parameters": "z > 0; rho: integer multiplicity per site",
        "postulates": {"A1": True, "A2": True, "A2prime": True, "J": True,
                       "Jprime": True, "BC": True, "simple": False},
        "notes": "per-site counts are Binomial(rho_x, z/(1+z)); simple iff rho <= 1",
    },
    "local_reinforcement": {
        "formula": "pi(mu, {x}) = rho_x + c_x(1) + ... + c_x(mu(x))",
        "parameters": "rho; increments c_x(n) keeping the intensity nonnegative",
        "postulates": {"A1": True, "A2": True, "A2prime": True, "J": True,
                       "Jprime": False, "BC": False, "simple": False},
        "notes": "(J') and (BC) hold exactly when c_x(n) is one constant",
    },
    "interaction": {
        "formula": "pi(mu, {z}) = V(z, mu) (rho_z + C_z(mu_z)),  V(z, mu) = prod_w f(z, w)^mu(w)",
        "parameters": "rho; symmetric pair density f (diagonal all positive or all zero); increments c",
        "postulates": {"A1": True, "A2": False, "A2prime": True, "J": False,
                       "Jprime": False, "BC": False, "simple": False},
        "notes": "with zero diagonal and c = 0 the kernel is the simple Gibbs (hard-core) kernel",
    },
    "remark": {
        "formula": "pi(mu) = 1/2 (1 - mu(-1)) d_{-1} + 1/2 d_0 + 1/2 (1 + mu(1)) d_1 on {-1, 0, 1}",
        "parameters": "none",
        "postulates": {"A1": True, "A2": True, "A2prime": True, "J": True,
                       "Jprime": False, "BC": False, "simple": False},
        "notes": "satisfies (J) but pi(., X) is not a function of mu(X)",
    },
}


def describe(name: str) -> str:
    try:
        entry = CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown kernel {name!r}; known: {', '.join(CATALOG)}") from None
    holds = [k for k, v in entry["postulates"].items() if v]
    fails = [k for k, v in entry["postulates"].items() if not v]
    return "\n".join([
        f"{name}",
        f"  formula:     {entry['formula']}",
        f"  parameters:  {entry['parameters']}",
        f"  satisfies:   {', '.join(holds) or '-'}",
        f"  violates:    {', '.join(fails) or '-'}  (generic parameters)",
        f"  note:        {entry['notes']}",
    ])
