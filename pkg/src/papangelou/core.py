"""Finite state spaces, measures, point configurations and kernels.

Everything here is an immutable value. Numbers are kept in whatever exact
or floating type the caller supplies (``int``, ``Fraction``, ``float``), so
the same code path serves exact rational checks and floating-point sampling.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb
from numbers import Real
from typing import Callable, Hashable, Iterable, Iterator, Mapping, Sequence

Site = Hashable
Counts = tuple  # tuple[int, ...], dense over a Space


class ParameterError(ValueError):
    """Invalid kernel or model parameter."""


def is_exact(value) -> bool:
    return isinstance(value, (int, Fraction)) and not isinstance(value, bool)


def div(a, b):
    """``a / b`` that stays rational when both operands are."""
    if is_exact(a) and is_exact(b):
        return Fraction(a) / b
    return a / b


def close(a, b, tol: float = 1e-9) -> bool:
    """Equality used by every check: exact for rationals, relative otherwise."""
    if is_exact(a) and is_exact(b):
        return a == b
    a, b = float(a), float(b)
    return abs(a - b) <= tol * max(abs(a), abs(b)) or abs(a - b) <= 1e-300


@dataclass(frozen=True)
class Space:
    sites: tuple

    def __post_init__(self):
        sites = tuple(self.sites)
        object.__setattr__(self, "sites", sites)
        if not sites:
            raise ValueError("a space needs at least one site")
        if len(set(sites)) != len(sites):
            raise ValueError(f"duplicate site identifiers in {sites!r}")
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(sites)})

    @classmethod
    def of_size(cls, n: int) -> "Space":
        return cls(tuple(range(n)))

    @property
    def size(self) -> int:
        return len(self.sites)

    def index(self, site: Site) -> int:
        try:
            return self._index[site]
        except KeyError:
            raise KeyError(f"unknown site {site!r}") from None

    def indices(self, sites: Iterable[Site]) -> frozenset:
        return frozenset(self.index(s) for s in sites)

    def __contains__(self, site) -> bool:
        return site in self._index

    def __len__(self) -> int:
        return len(self.sites)

    def __iter__(self):
        return iter(self.sites)

    def __repr__(self):
        return f"Space({list(self.sites)!r})"


@dataclass(frozen=True)
class Measure:
    """Nonnegative weight per site, stored densely in site order."""

    space: Space
    weights: tuple

    def __post_init__(self):
        w = tuple(self.weights)
        object.__setattr__(self, "weights", w)
        if len(w) != self.space.size:
            raise ValueError(f"expected {self.space.size} weights, got {len(w)}")
        for v in w:
            if not isinstance(v, Real) or v < 0 or v != v or v == float("inf"):
                raise ValueError(f"invalid measure weight {v!r}")

    @classmethod
    def zero(cls, space: Space) -> "Measure":
        return cls(space, (0,) * space.size)

    @classmethod
    def from_dict(cls, space: Space, weights: Mapping[Site, Real]) -> "Measure":
        w = [0] * space.size
        for s, v in weights.items():
            w[space.index(s)] = v
        return cls(space, tuple(w))

    def __getitem__(self, site: Site):
        return self.weights[self.space.index(site)]

    def mass(self, sites: Iterable[Site] | None = None):
        if sites is None:
            return sum(self.weights)
        return sum(self.weights[i] for i in self.space.indices(sites))

    @property
    def total(self):
        return sum(self.weights)

    def as_dict(self) -> dict:
        return dict(zip(self.space.sites, self.weights))

    def __repr__(self):
        return f"Measure({self.as_dict()!r})"


@dataclass(frozen=True)
class Config:
    """Finite point configuration: a nonnegative multiplicity per site."""

    space: Space
    counts: tuple

    def __post_init__(self):
        c = tuple(int(v) for v in self.counts)
        object.__setattr__(self, "counts", c)
        if len(c) != self.space.size:
            raise ValueError(f"expected {self.space.size} counts, got {len(c)}")
        if any(v < 0 for v in c):
            raise ValueError(f"negative multiplicity in {c!r}")

    @classmethod
    def empty(cls, space: Space) -> "Config":
        return cls(space, (0,) * space.size)

    @classmethod
    def from_dict(cls, space: Space, counts: Mapping[Site, int]) -> "Config":
        c = [0] * space.size
        for s, v in counts.items():
            c[space.index(s)] = v
        return cls(space, tuple(c))

    @classmethod
    def from_points(cls, space: Space, points: Iterable[Site]) -> "Config":
        c = [0] * space.size
        for s in points:
            c[space.index(s)] += 1
        return cls(space, tuple(c))

    def __getitem__(self, site: Site) -> int:
        return self.counts[self.space.index(site)]

    @property
    def total(self) -> int:
        return sum(self.counts)

    def mass(self, sites: Iterable[Site]) -> int:
        return sum(self.counts[i] for i in self.space.indices(sites))

    @property
    def support(self) -> tuple:
        return tuple(s for s, n in zip(self.space.sites, self.counts) if n)

    def points(self) -> tuple:
        """Sites of the configuration's points in site order, with repetition."""
        return tuple(s for s, n in zip(self.space.sites, self.counts) for _ in range(n))

    def as_dict(self) -> dict:
        return {s: n for s, n in zip(self.space.sites, self.counts) if n}

    def __le__(self, other: "Config") -> bool:
        return all(a <= b for a, b in zip(self.counts, other.counts))

    def __add__(self, other: "Config") -> "Config":
        return Config(self.space, tuple(a + b for a, b in zip(self.counts, other.counts)))

    def __repr__(self):
        return f"Config({self.as_dict()!r})"


@dataclass(frozen=True)
class SiteMap:
    """Total map from a source space onto a target space."""

    source: Space
    target: Space
    assignment: tuple  # target index for each source index

    def __post_init__(self):
        a = tuple(self.assignment)
        object.__setattr__(self, "assignment", a)
        if len(a) != self.source.size:
            raise ValueError("site map must assign every source site")
        if any(not 0 <= j < self.target.size for j in a):
            raise ValueError("site map points outside its target")

    @classmethod
    def from_dict(cls, source: Space, mapping: Mapping[Site, Site],
                  target: Space | None = None) -> "SiteMap":
        missing = [s for s in source.sites if s not in mapping]
        if missing:
            raise ValueError(f"site map leaves {missing!r} unassigned")
        if target is None:
            seen = []
            for s in source.sites:
                if mapping[s] not in seen:
                    seen.append(mapping[s])
            target = Space(tuple(seen))
        return cls(source, target, tuple(target.index(mapping[s]) for s in source.sites))

    @classmethod
    def identity(cls, space: Space) -> "SiteMap":
        return cls(space, space, tuple(range(space.size)))

    @classmethod
    def from_blocks(cls, source: Space, blocks: Sequence[Sequence[Site]],
                    labels: Sequence[Site] | None = None) -> "SiteMap":
        """Map collapsing each block of source sites to one target site."""
        if labels is None:
            labels = tuple("+".join(str(s) for s in b) for b in blocks)
        assignment = [None] * source.size
        for j, block in enumerate(blocks):
            for s in block:
                assignment[source.index(s)] = j
        if None in assignment:
            raise ValueError("blocks must cover every source site")
        return cls(source, Space(tuple(labels)), tuple(assignment))

    def __call__(self, site: Site) -> Site:
        return self.target.sites[self.assignment[self.source.index(site)]]

    def fibers(self) -> tuple:
        """Source indices of G^{-1}{y} for each target index y."""
        out = [[] for _ in range(self.target.size)]
        for i, j in enumerate(self.assignment):
            out[j].append(i)
        return tuple(tuple(f) for f in out)

    def is_onto(self) -> bool:
        return set(self.assignment) == set(range(self.target.size))

    def push_counts(self, counts: Counts) -> Counts:
        out = [0] * self.target.size
        for i, n in enumerate(counts):
            out[self.assignment[i]] += n
        return tuple(out)

    def as_dict(self) -> dict:
        return {s: self.target.sites[j] for s, j in zip(self.source.sites, self.assignment)}


@dataclass(frozen=True, eq=False)
class Kernel:
    """Papangelou kernel on a finite space: configuration -> measure.

    ``fn`` maps a counts tuple to a weight tuple. ``support_bound`` optionally
    caps the admissible multiplicity per site (``None`` entries are unbounded);
    configurations beyond it are outside the kernel's state space.
    """

    space: Space
    fn: Callable[[Counts], tuple] = field(repr=False)
    name: str = "kernel"
    support_bound: tuple | None = None
    params: Mapping = field(default_factory=dict, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_cached", lru_cache(maxsize=1 << 16)(self.fn))

    def intensity(self, counts: Counts) -> tuple:
        """Raw weights of ``pi(mu, .)`` for a counts tuple (cached)."""
        return self._cached(tuple(counts))

    def __call__(self, mu: Config) -> Measure:
        if mu.space != self.space:
            raise ValueError("configuration lives on a different space")
        return Measure(self.space, self.intensity(mu.counts))

    def at(self, counts: Counts, i: int):
        return self.intensity(counts)[i]

    def mass(self, counts: Counts, indices: Iterable[int]):
        w = self.intensity(counts)
        return sum(w[i] for i in indices)

    def admissible(self, counts: Counts) -> bool:
        if self.support_bound is None:
            return True
        return all(b is None or n <= b for n, b in zip(counts, self.support_bound))


def as_number(value):
    """Parse a rational string like ``"1/2"``; ints become Fractions."""
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers")
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, int):
        return Fraction(value)
    return value


def counts_add(counts: Counts, i: int) -> Counts:
    return counts[:i] + (counts[i] + 1,) + counts[i + 1:]


def counts_sub(counts: Counts, i: int) -> Counts:
    return counts[:i] + (counts[i] - 1,) + counts[i + 1:]


def config_add(mu: Config, x: Site) -> Config:
    return Config(mu.space, counts_add(mu.counts, mu.space.index(x)))


def restrict(mu: Config, B: Iterable[Site]) -> Config:
    keep = mu.space.indices(B)
    return Config(mu.space, tuple(n if i in keep else 0 for i, n in enumerate(mu.counts)))


def pushforward_config(mu: Config, G: SiteMap) -> Config:
    if mu.space != G.source:
        raise ValueError("configuration is not on the map's source space")
    return Config(G.target, G.push_counts(mu.counts))


def iter_counts(size: int, mass: int) -> Iterator[Counts]:
    """Count vectors of exactly ``mass`` points, in lexicographic point order."""
    for pts in itertools.combinations_with_replacement(range(size), mass):
        c = [0] * size
        for i in pts:
            c[i] += 1
        yield tuple(c)


def enumerate_counts(size: int, max_mass: int) -> list:
    return [c for m in range(max_mass + 1) for c in iter_counts(size, m)]


def enumerate_configs(space: Space, max_mass: int) -> list:
    """All configurations with total mass <= max_mass, by mass then point order."""
    if max_mass < 0:
        raise ValueError("max_mass must be >= 0")
    return [Config(space, c) for c in enumerate_counts(space.size, max_mass)]


def n_configs(size: int, max_mass: int) -> int:
    return sum(comb(m + size - 1, m) for m in range(max_mass + 1))


def to_jsonable(obj):
    """Plain JSON types: Fractions become ``"p/q"`` strings, configs become dicts."""
    import math as _math

    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, Fraction):
        return int(obj) if obj.denominator == 1 else str(obj)
    if isinstance(obj, int):
        return obj
    if isinstance(obj, float):
        if _math.isnan(obj):
            return "nan"
        if _math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, Config):
        return {str(k): v for k, v in obj.as_dict().items()}
    if isinstance(obj, Measure):
        return [to_jsonable(v) for v in obj.weights]
    if isinstance(obj, Mapping):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalar
        return to_jsonable(obj.item())
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    raise TypeError(f"cannot serialize {type(obj).__name__}")
