"""Decision procedures for the kernel postulates, bounded by a probe mass.

Every check enumerates the admissible configurations of mass <= probe_mass
and reports the first violation found (configurations in enumeration order,
then sites in site order). A pass therefore means "no violation up to the
bound". Rational kernels are compared exactly; others at relative ``tol``.

Grouping checks ((J), (J'), Dynkin) report the extreme pair of the first
violating group: the configurations with the smallest and largest value.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field

from .core import (Config, Kernel, SiteMap, close, counts_add, div, enumerate_counts,
                   is_exact, to_jsonable)

__all__ = [
    "CheckReport", "check_cocycle", "check_A2", "check_A2prime_extract_f", "check_J",
    "check_Jprime", "check_dynkin", "check_BC", "check_simple", "recheck",
    "check_A6", "set_partitions", "bell", "run_check", "PROPERTIES",
]

PROPERTIES = ("A1", "A2", "A2prime", "A6", "J", "Jprime", "D", "BC", "simple")


@dataclass
class CheckReport:
    property: str
    verdict: str
    witness: dict | None = None
    probe_bound: int = 0
    tolerance: float | str = 1e-9
    flags: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return to_jsonable({
            "property": self.property, "verdict": self.verdict, "witness": self.witness,
            "probe_bound": self.probe_bound, "tolerance": self.tolerance,
            "flags": self.flags,
        })


def _probes(pi: Kernel, probe_mass: int) -> list:
    if probe_mass < 0:
        raise ValueError("probe_mass must be >= 0")
    return [c for c in enumerate_counts(pi.space.size, probe_mass) if pi.admissible(c)]


def _exact_kernel(pi: Kernel, probes) -> bool:
    return all(is_exact(v) for c in probes[:8] for v in pi.intensity(c))


def _report(prop, witness, probe_mass, tol, exact, flags=()):
    return CheckReport(prop, "fail" if witness else "pass", witness, probe_mass,
                       "exact" if exact else tol, list(flags))


def _cfg(pi, counts):
    return Config(pi.space, counts)


def check_cocycle(pi: Kernel, probe_mass: int = 4, tol: float = 1e-9) -> CheckReport:
    """(A1): pi(mu + d_y, {x}) pi(mu, {y}) == pi(mu + d_x, {y}) pi(mu, {x})."""
    probes = _probes(pi, probe_mass)
    sites = pi.space.sites
    n = pi.space.size
    for c in probes:
        w = pi.intensity(c)
        for i in range(n):
            wi = pi.intensity(counts_add(c, i))
            for j in range(i + 1, n):
                wj = pi.intensity(counts_add(c, j))
                lhs = wj[i] * w[j]
                rhs = wi[j] * w[i]
                if not close(lhs, rhs, tol):
                    wit = {"mu": _cfg(pi, c), "x": sites[i], "y": sites[j],
                           "lhs": lhs, "rhs": rhs}
                    return _report("A1", wit, probe_mass, tol, _exact_kernel(pi, probes))
    return _report("A1", None, probe_mass, tol, _exact_kernel(pi, probes))


def check_A2(pi: Kernel, probe_mass: int = 4, tol: float = 1e-9) -> CheckReport:
    """(A2): adding a point at y leaves the intensity off y unchanged."""
    probes = _probes(pi, probe_mass)
    sites = pi.space.sites
    n = pi.space.size
    for c in probes:
        w = pi.intensity(c)
        for j in range(n):
            cj = counts_add(c, j)
            if not pi.admissible(cj):
                continue
            wj = pi.intensity(cj)
            for i in range(n):
                if i != j and not close(wj[i], w[i], tol):
                    wit = {"mu": _cfg(pi, c), "y": sites[j], "x": sites[i],
                           "with_point": wj[i], "without_point": w[i]}
                    return _report("A2", wit, probe_mass, tol, _exact_kernel(pi, probes))
    return _report("A2", None, probe_mass, tol, _exact_kernel(pi, probes))


def check_A2prime_extract_f(pi: Kernel, probe_mass: int = 4, tol: float = 1e-9):
    """(A2'): pi(mu + d_y, {x}) == f(x, y) pi(mu, {x}) for x != y.

    Returns ``(report, f)`` with ``f`` a dict ``{(x, y): value}`` of the
    identified off-diagonal entries (``None`` on failure). ``f(x, y)`` is read
    off the first probed configuration with ``pi(mu, {x}) > 0``, which is the
    empty one whenever ``pi(0, {x}) > 0``; sites where no such configuration
    exists are flagged indeterminate rather than failed.
    """
    probes = _probes(pi, probe_mass)
    sites = pi.space.sites
    n = pi.space.size
    exact = _exact_kernel(pi, probes)
    f, flags = {}, []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            ratio = base = None
            for c in probes:
                cj = counts_add(c, j)
                if not pi.admissible(cj):
                    continue
                lam, lam_y = pi.at(c, i), pi.at(cj, i)
                if ratio is None:
                    if lam > 0:
                        ratio, base = div(lam_y, lam), c
                    elif lam_y != 0 and not close(lam_y, 0, tol):
                        wit = {"mu": _cfg(pi, c), "x": sites[i], "y": sites[j],
                               "with_point": lam_y, "without_point": lam}
                        return _report("A2prime", wit, probe_mass, tol, exact), None
                    continue
                if not close(lam_y, ratio * lam, tol):
                    wit = {"mu": _cfg(pi, c), "x": sites[i], "y": sites[j],
                           "with_point": lam_y, "predicted": ratio * lam, "f": ratio,
                           "f_from": _cfg(pi, base)}
                    return _report("A2prime", wit, probe_mass, tol, exact), None
            if ratio is None:
                flags.append(f"indeterminate f({sites[i]!r}, {sites[j]!r})")
            else:
                f[(sites[i], sites[j])] = ratio
    return _report("A2prime", None, probe_mass, tol, exact, flags), f


def _extreme_pair(group, tol):
    """(argmin, argmax) entries of a group if their values differ."""
    lo = min(group, key=lambda e: e[1])
    hi = max(group, key=lambda e: e[1])
    if close(lo[1], hi[1], tol):
        return None
    return lo, hi


def _first_group_violation(keyed, tol):
    groups = {}
    for key, c, v in keyed:
        groups.setdefault(key, []).append((c, v))
    for key, group in groups.items():
        pair = _extreme_pair(group, tol)
        if pair:
            return key, pair
    return None


def check_J(pi: Kernel, probe_mass: int = 4, tol: float = 1e-9) -> CheckReport:
    """(J): pi(mu, {x}) depends on mu only through mu({x})."""
    probes = _probes(pi, probe_mass)
    for i, x in enumerate(pi.space.sites):
        hit = _first_group_violation(((c[i], c, pi.at(c, i)) for c in probes), tol)
        if hit:
            _, ((c1, v1), (c2, v2)) = hit
            wit = {"site": x, "mu": _cfg(pi, c1), "nu": _cfg(pi, c2), "values": [v1, v2]}
            return _report("J", wit, probe_mass, tol, _exact_kernel(pi, probes))
    return _report("J", None, probe_mass, tol, _exact_kernel(pi, probes))


def _subsets_largest_first(n):
    for size in range(n, 0, -1):
        yield from itertools.combinations(range(n), size)


def check_Jprime(pi: Kernel, probe_mass: int = 4, tol: float = 1e-9,
                 subsets=None) -> CheckReport:
    """(J'): for every subset B, pi(mu, B) depends on mu only through mu(B).

    Subsets are visited from the whole space down to singletons. Spaces with
    more than 20 sites need an explicit ``subsets`` list (of site tuples).
    """
    n = pi.space.size
    flags = []
    if subsets is None:
        if n > 20:
            raise ValueError(f"{n} sites is too many to enumerate subsets; pass `subsets`")
        idx_sets = list(_subsets_largest_first(n))
    else:
        idx_sets = [tuple(sorted(pi.space.indices(B))) for B in subsets]
        flags.append(f"sampled subsets ({len(idx_sets)})")
    probes = _probes(pi, probe_mass)
    for B in idx_sets:
        keyed = ((sum(c[i] for i in B), c, pi.mass(c, B)) for c in probes)
        hit = _first_group_violation(keyed, tol)
        if hit:
            _, ((c1, v1), (c2, v2)) = hit
            wit = {"B": [pi.space.sites[i] for i in B], "mu": _cfg(pi, c1),
                   "nu": _cfg(pi, c2), "values": [v1, v2]}
            return _report("Jprime", wit, probe_mass, tol, _exact_kernel(pi, probes), flags)
    return _report("Jprime", None, probe_mass, tol, _exact_kernel(pi, probes), flags)


def check_dynkin(pi: Kernel, G: SiteMap, probe_mass: int = 4, tol: float = 1e-9) -> CheckReport:
    """(D): G mu1 == G mu2 implies pi(mu1, G^{-1}{y}) == pi(mu2, G^{-1}{y}) for all y."""
    if G.source != pi.space:
        raise ValueError("map source differs from the kernel's space")
    probes = _probes(pi, probe_mass)
    fibers = G.fibers()
    groups = {}
    for c in probes:
        groups.setdefault(G.push_counts(c), []).append(c)
    for image, members in groups.items():
        if len(members) < 2:
            continue
        for y, fiber in enumerate(fibers):
            pair = _extreme_pair([(c, pi.mass(c, fiber)) for c in members], tol)
            if pair:
                (c1, v1), (c2, v2) = pair
                wit = {"map": G.as_dict(), "target_site": G.target.sites[y],
                       "image": Config(G.target, image), "mu1": _cfg(pi, c1),
                       "mu2": _cfg(pi, c2), "values": [v1, v2]}
                return _report("D", wit, probe_mass, tol, _exact_kernel(pi, probes))
    return _report("D", None, probe_mass, tol, _exact_kernel(pi, probes))


def set_partitions(n: int):
    """All partitions of range(n) as restricted growth strings, in lexicographic order."""
    def rec(prefix, top):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for b in range(top + 2):
            yield from rec(prefix + [b], max(top, b))
    if n == 0:
        yield ()
        return
    yield from rec([0], 0)


def bell(n: int) -> int:
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


def _canonical(labels):
    seen = {}
    return tuple(seen.setdefault(b, len(seen)) for b in labels)


def _map_inventory(n, budget, seed=0):
    """Two-site merges, subset collapses and two-block splits, topped up at random."""
    out = {}
    for i, j in itertools.combinations(range(n), 2):
        lab = list(range(n))
        lab[j] = i
        out.setdefault(_canonical(lab), None)
    for size in range(n, 0, -1):
        for B in itertools.combinations(range(n), size):
            lab = [-1 if k in B else k for k in range(n)]
            out.setdefault(_canonical(lab), None)
            out.setdefault(_canonical([0 if k in B else 1 for k in range(n)]), None)
    rng = random.Random(seed)
    attempts = 0
    while len(out) < budget and attempts < 50 * budget:
        attempts += 1
        k = rng.randint(1, n)
        out.setdefault(_canonical([rng.randrange(k) for _ in range(n)]), None)
    return list(out)


def _partition_map(space, labels):
    k = max(labels) + 1
    blocks = [[space.sites[i] for i, b in enumerate(labels) if b == j] for j in range(k)]
    return SiteMap.from_blocks(space, blocks)


def check_BC(pi: Kernel, probe_mass: int = 4, map_budget: int = 1000,
             tol: float = 1e-9) -> CheckReport:
    """(BC): Dynkin's condition for every map of the space onto another.

    On a finite space every map is continuous and proper, and (D) depends on
    a map only through its partition of the sites into fibers, so the set
    partitions are enumerated (all of them when they fit in ``map_budget``).
    """
    n = pi.space.size
    if n < 2:
        return CheckReport("BC", "pass", None, probe_mass, tol,
                           ["single-site space: trivially satisfied"])
    flags = []
    if bell(n) <= map_budget:
        partitions = list(set_partitions(n))
    else:
        partitions = _map_inventory(n, map_budget)
        flags.append(f"sampled maps ({len(partitions)} of {bell(n)})")
    exact = True
    for labels in partitions:
        G = _partition_map(pi.space, labels)
        rep = check_dynkin(pi, G, probe_mass, tol)
        exact = rep.tolerance == "exact"
        if not rep.passed:
            return CheckReport("BC", "fail", rep.witness, probe_mass, rep.tolerance, flags)
    flags.append(f"maps checked: {len(partitions)}")
    return CheckReport("BC", "pass", None, probe_mass, "exact" if exact else tol, flags)


def check_simple(pi: Kernel, probe_mass: int = 4, tol: float = 1e-9) -> CheckReport:
    """pi(mu, supp mu) == 0 on every probed configuration."""
    probes = _probes(pi, probe_mass)
    for c in probes:
        supp = [i for i, k in enumerate(c) if k]
        v = pi.mass(c, supp)
        if v != 0 and not (not is_exact(v) and abs(v) <= tol * max(1.0, float(sum(pi.intensity(c))))):
            wit = {"mu": _cfg(pi, c), "support": [pi.space.sites[i] for i in supp],
                   "mass_on_support": v}
            return _report("simple", wit, probe_mass, tol, _exact_kernel(pi, probes))
    return _report("simple", None, probe_mass, tol, _exact_kernel(pi, probes))


def check_A6(pi: Kernel, f_diagonal, probe_mass: int = 4, tol: float = 1e-9) -> CheckReport:
    """(A6): the supplied pair-density diagonal is strictly positive.

    The diagonal is not identifiable from the kernel alone, so it is an input.
    """
    bad = [(s, d) for s, d in zip(pi.space.sites, f_diagonal) if not d > 0]
    wit = {"site": bad[0][0], "f_diagonal": bad[0][1]} if bad else None
    return CheckReport("A6", "fail" if bad else "pass", wit, probe_mass, tol,
                       ["diagonal supplied by caller"])


def run_check(pi: Kernel, prop: str, probe_mass: int = 4, tol: float = 1e-9, **kw) -> CheckReport:
    """Dispatch by property name (``A1``, ``J'``/``Jprime``, ``D`` needs ``G=``, ...)."""
    key = prop.replace("'", "prime")
    if key == "A1":
        return check_cocycle(pi, probe_mass, tol)
    if key == "A2":
        return check_A2(pi, probe_mass, tol)
    if key == "A2prime":
        return check_A2prime_extract_f(pi, probe_mass, tol)[0]
    if key == "A6":
        return check_A6(pi, kw["f_diagonal"], probe_mass, tol)
    if key == "J":
        return check_J(pi, probe_mass, tol)
    if key == "Jprime":
        return check_Jprime(pi, probe_mass, tol)
    if key == "D":
        return check_dynkin(pi, kw["G"], probe_mass, tol)
    if key == "BC":
        return check_BC(pi, probe_mass, kw.get("map_budget", 1000), tol)
    if key == "simple":
        return check_simple(pi, probe_mass, tol)
    raise ValueError(f"unknown property {prop!r}; known: {', '.join(PROPERTIES)}")


def recheck(pi: Kernel, report: CheckReport, G: SiteMap | None = None, tol: float = 1e-9) -> bool:
    """Re-evaluate a failing report's witness; True iff the violation reproduces."""
    w = report.witness
    if w is None:
        return False
    space = pi.space

    def lam(mu, site):
        return pi(mu)[site]

    p = report.property
    if p == "A1":
        mu, x, y = w["mu"], w["x"], w["y"]
        lhs = lam(mu.__class__(space, counts_add(mu.counts, space.index(y))), x) * lam(mu, y)
        rhs = lam(mu.__class__(space, counts_add(mu.counts, space.index(x))), y) * lam(mu, x)
        return not close(lhs, rhs, tol)
    if p == "A2":
        mu, x, y = w["mu"], w["x"], w["y"]
        return not close(lam(Config(space, counts_add(mu.counts, space.index(y))), x),
                         lam(mu, x), tol)
    if p == "A2prime":
        mu, x, y = w["mu"], w["x"], w["y"]
        with_point = lam(Config(space, counts_add(mu.counts, space.index(y))), x)
        if "predicted" not in w:
            return lam(mu, x) == 0 and with_point != 0
        return not close(with_point, w["f"] * lam(mu, x), tol)
    if p == "J":
        return (w["mu"][w["site"]] == w["nu"][w["site"]]
                and not close(lam(w["mu"], w["site"]), lam(w["nu"], w["site"]), tol))
    if p == "Jprime":
        B = w["B"]
        return (w["mu"].mass(B) == w["nu"].mass(B)
                and not close(pi(w["mu"]).mass(B), pi(w["nu"]).mass(B), tol))
    if p in ("D", "BC"):
        m = w["map"]
        fiber = [s for s in space.sites if m[s] == w["target_site"]]
        same = all(sum(w["mu1"][s] for s in space.sites if m[s] == t)
                   == sum(w["mu2"][s] for s in space.sites if m[s] == t)
                   for t in set(m.values()))
        return same and not close(pi(w["mu1"]).mass(fiber), pi(w["mu2"]).mass(fiber), tol)
    if p == "simple":
        mu = w["mu"]
        return pi(mu).mass(mu.support) != 0
    if p == "A6":
        return not w["f_diagonal"] > 0
    raise ValueError(f"cannot recheck property {p!r}")
