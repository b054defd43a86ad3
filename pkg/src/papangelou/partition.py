"""Iterated kernels, configuration weights and truncated partition sums.

The unnormalized weight of a configuration kappa on B, given a boundary
outside B, is the iterated kernel along any ordering of kappa's points
divided by prod_x kappa(x)!. Layer sums (all kappa of mass m) are built by
the recursion ``w(kappa) = w(kappa - d_x) pi(b + kappa - d_x, {x}) / kappa(x)``
and checked against a second removal order, which catches cocycle
violations on the way.

Exact inputs (ints, Fractions) are summed exactly; floating inputs are
carried in log space.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .core import Config, Kernel, Space, close, counts_add, counts_sub, is_exact, iter_counts

__all__ = [
    "CocycleViolation", "PartitionError", "Truncation", "PartitionSum", "WeightTable",
    "iterated_kernel", "config_weight", "partition_sum", "weight_table", "conditional_law",
]

LOG_RANGE = (1e-6, 1e6)


class CocycleViolation(ValueError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class PartitionError(ValueError):
    """Partition sum is zero, divergent, or not certified within tolerance."""


@dataclass(frozen=True)
class Truncation:
    """How far to enumerate mass layers.

    Enumeration always reaches ``max_mass``; with ``grow`` it keeps adding
    layers until the geometric tail bound drops below ``tol``, the layer
    ratios stop declining at ratio >= 1, or ``mass_limit`` is hit.
    """

    max_mass: int = 12
    tol: float = 1e-10
    grow: bool = True
    mass_limit: int = 64

    def __post_init__(self):
        if self.max_mass < 0:
            raise ValueError("max_mass must be >= 0")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")


@dataclass(frozen=True)
class PartitionSum:
    value: object
    tail_bound: object
    converged: bool
    truncation_mass: int
    layers: tuple
    certified: bool
    warning: str | None = None

    @property
    def log_value(self) -> float:
        return math.log(self.value) if self.value > 0 else -math.inf


def _log(v):
    return math.log(v) if v > 0 else -math.inf


def _logsumexp(xs):
    xs = [x for x in xs if x > -math.inf]
    if not xs:
        return -math.inf
    m = max(xs)
    return m + math.log(math.fsum(math.exp(x - m) for x in xs))


def iterated_kernel(pi: Kernel, mu: Config, points: Sequence) -> object:
    """``pi^(k)(mu; x_1..x_k) = prod_j pi(mu + d_x1 + ... + d_x{j-1}, {x_j})``."""
    space = pi.space
    counts = mu.counts
    factors = []
    for x in points:
        i = space.index(x)
        factors.append(pi.at(counts, i))
        counts = counts_add(counts, i)
    if any(v == 0 for v in factors):
        return 0 * factors[0] if factors else 1
    if all(is_exact(v) for v in factors) or all(
            LOG_RANGE[0] <= abs(v) <= LOG_RANGE[1] for v in factors):
        out = 1
        for v in factors:
            out = out * v
        return out
    return math.exp(math.fsum(math.log(v) for v in factors))


def _factorial_product(counts):
    out = 1
    for n in counts:
        out *= math.factorial(n)
    return out


def _boundary_counts(pi: Kernel, boundary: Config, B_idx: frozenset):
    if boundary.space != pi.space:
        raise ValueError("boundary lives on a different space")
    return tuple(0 if i in B_idx else n for i, n in enumerate(boundary.counts))


def config_weight(pi: Kernel, boundary: Config, B: Iterable, kappa: Config,
                  tol: float = 1e-9) -> object:
    """Unnormalized weight of ``kappa`` on ``B`` given the boundary outside ``B``.

    Evaluated along kappa's points in site order and in reverse order; a
    mismatch raises CocycleViolation.
    """
    space = pi.space
    B_idx = space.indices(B)
    if any(n and i not in B_idx for i, n in enumerate(kappa.counts)):
        raise ValueError("kappa must be supported on B")
    start = Config(space, _boundary_counts(pi, boundary, B_idx))
    pts = kappa.points()
    if not pts:
        return 1
    a = iterated_kernel(pi, start, pts)
    b = iterated_kernel(pi, start, pts[::-1])
    if not close(a, b, tol):
        raise CocycleViolation(
            f"iterated kernel depends on point order ({a} vs {b})",
            {"boundary": start.as_dict(), "points": list(pts), "forward": a, "reverse": b})
    fact = _factorial_product(kappa.counts)
    if is_exact(a):
        return Fraction(a) / fact
    return a / fact


class _Layers:
    """Incremental mass-layer enumeration of configuration weights on B."""

    def __init__(self, pi: Kernel, boundary: Config, B: Iterable, tol: float = 1e-9):
        self.pi = pi
        self.space = pi.space
        self.B = sorted(self.space.indices(B))
        self.b = _boundary_counts(pi, boundary, frozenset(self.B))
        self.tol = tol
        self.exact = all(is_exact(v) for v in pi.intensity(self.b))
        one = Fraction(1) if self.exact else 0.0
        self.prev = {self.b: one}
        self.mass = 0

    def embed(self, sub):
        c = list(self.b)
        for j, n in zip(self.B, sub):
            c[j] += n
        return tuple(c)

    def step(self) -> dict:
        """Compute the next layer; returns {counts: weight (or log weight)}."""
        self.mass += 1
        pi, exact = self.pi, self.exact
        nxt = {}
        zero = Fraction(0) if exact else -math.inf
        for sub in iter_counts(len(self.B), self.mass):
            c = self.embed(sub)
            if not pi.admissible(c):
                continue
            occupied = [(j, n) for j, n in zip(self.B, sub) if n]
            first = self._via(c, *occupied[0], zero)
            if len(occupied) > 1:
                last = self._via(c, *occupied[-1], zero)
                if not self._agree(first, last):
                    raise CocycleViolation(
                        "layer weights depend on point order",
                        {"config": Config(self.space, c).as_dict(),
                         "first_site_route": first, "last_site_route": last})
            nxt[c] = first
        self.prev = nxt
        return nxt

    def _via(self, c, j, n, zero):
        before = counts_sub(c, j)
        wb = self.prev.get(before)
        if wb is None:
            return zero
        v = self.pi.at(before, j)
        if self.exact and is_exact(v):
            return wb * v / n
        if self.exact:
            # float appeared mid-enumeration; fall back to a plain product
            return float(wb) * v / n
        return wb + _log(v) - math.log(n)

    def _agree(self, a, b):
        if self.exact:
            return close(a, b, self.tol)
        if a == b:
            return True
        return abs(a - b) <= self.tol

    def layer_sum(self, layer):
        if self.exact:
            return sum(layer.values(), Fraction(0))
        return _logsumexp(layer.values())

    def capacity(self):
        bound = self.pi.support_bound
        if bound is None or any(bound[j] is None for j in self.B):
            return None
        return sum(bound[j] for j in self.B)


def _run(pi, boundary, B, truncation: Truncation, keep: bool):
    lay = _Layers(pi, boundary, B)
    exact = lay.exact
    entries = dict(lay.prev) if keep else None
    layers = [lay.layer_sum(lay.prev)]  # exact sums, or log sums
    cap = lay.capacity()
    ratios = []
    tail = None
    converged = False
    certified = False
    warning = None

    def lin(s):
        return s if exact else math.exp(s)

    while True:
        m = lay.mass
        if cap is not None and m >= cap:
            tail, converged, certified = 0 * lin(layers[-1]), True, True
            break
        if m >= 1:
            last, before = lin(layers[-1]), lin(layers[-2])
            if last == 0:
                tail, converged, certified = 0 * last, True, True
                break
            r = last / before if before else math.inf
            ratios.append(r)
            if m >= truncation.max_mass:
                if r < 1:
                    tail = last * r / (1 - r)
                    certified = len(ratios) >= 3 and ratios[-1] <= ratios[-2] <= ratios[-3]
                    converged = tail <= truncation.tol
                    if converged:
                        break
                else:
                    tail = math.inf
                    declining = len(ratios) >= 2 and ratios[-1] < ratios[-2]
                    if not declining:
                        warning = (f"layer sums non-decreasing at mass {m} (ratio {float(r):.4g}); "
                                   "local integrability presumably violated")
                        break
                if not truncation.grow or m >= truncation.mass_limit:
                    break
        layer = lay.step()
        if keep:
            entries.update(layer)
        layers.append(lay.layer_sum(layer))

    if warning:
        warnings.warn(warning, RuntimeWarning, stacklevel=3)
    if exact:
        value = sum(layers, Fraction(0))
    else:
        value = math.exp(_logsumexp(layers))
    if tail is None:
        tail = math.inf
    result = PartitionSum(
        value=value, tail_bound=tail, converged=converged, truncation_mass=lay.mass,
        layers=tuple(lin(s) for s in layers), certified=certified, warning=warning)
    return result, entries, exact


def partition_sum(pi: Kernel, boundary: Config, B: Iterable,
                  truncation: Truncation = Truncation()) -> PartitionSum:
    """Sum of configuration weights on B with a geometric tail certificate."""
    result, _, _ = _run(pi, boundary, B, truncation, keep=False)
    return result


@dataclass
class WeightTable:
    """Weights (or probabilities) of configurations on a bounded set."""

    space: Space
    configs: list
    weights: list
    truncation_mass: int
    tail_bound: object
    certified: bool
    normalized: bool = False
    partition: object = None

    @property
    def entries(self) -> dict:
        return dict(zip(self.configs, self.weights))

    def __getitem__(self, mu: Config):
        try:
            return self.weights[self.configs.index(mu)]
        except ValueError:
            return 0

    def __len__(self):
        return len(self.configs)

    def marginal(self, site) -> dict:
        i = self.space.index(site)
        out = {}
        for mu, w in zip(self.configs, self.weights):
            out[mu.counts[i]] = out.get(mu.counts[i], 0) + w
        return dict(sorted(out.items()))

    def mean(self, site) -> float:
        return float(sum(n * w for n, w in self.marginal(site).items()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([str(s) for s in self.space.sites] + ["weight"])
        for mu, v in zip(self.configs, self.weights):
            w.writerow(list(mu.counts) + [_num(v)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "sites": [str(s) for s in self.space.sites],
            "normalized": self.normalized,
            "truncation_mass": self.truncation_mass,
            "tail_bound": _num(self.tail_bound),
            "certified": self.certified,
            "entries": [{"counts": list(mu.counts), "weight": _num(v)}
                        for mu, v in zip(self.configs, self.weights)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _num(v):
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else int(v)
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return v


def weight_table(pi: Kernel, boundary: Config, B: Iterable,
                 truncation: Truncation = Truncation()) -> WeightTable:
    """Unnormalized weights of every configuration on B up to the truncation mass."""
    result, entries, exact = _run(pi, boundary, B, truncation, keep=True)
    space = pi.space
    B_idx = space.indices(B)
    configs, weights = [], []
    for c, w in entries.items():
        kappa = tuple(n if i in B_idx else 0 for i, n in enumerate(c))
        configs.append(Config(space, kappa))
        weights.append(w if exact else math.exp(w))
    return WeightTable(space, configs, weights, result.truncation_mass, result.tail_bound,
                       result.certified, normalized=False, partition=result)


def conditional_law(pi: Kernel, boundary: Config, B: Iterable,
                    truncation: Truncation = Truncation()) -> WeightTable:
    """Law of the configuration on B given the boundary outside B.

    Raises PartitionError when the partition sum is zero or not certified
    below ``truncation.tol``.
    """
    table = weight_table(pi, boundary, B, truncation)
    ps = table.partition
    if not ps.converged:
        raise PartitionError(
            f"partition sum not converged at mass {ps.truncation_mass} "
            f"(tail bound {_num(ps.tail_bound)}, tol {truncation.tol})"
            + (f": {ps.warning}" if ps.warning else ""))
    if not ps.value > 0:
        raise PartitionError("partition sum is zero")
    total = sum(table.weights, Fraction(0)) if all(is_exact(w) for w in table.weights) \
        else math.fsum(table.weights)
    table.weights = [w / total for w in table.weights]
    table.normalized = True
    return table
