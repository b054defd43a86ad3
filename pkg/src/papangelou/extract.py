"""Recover structural decompositions from black-box kernels and rebuild them.

Three regimes:

* local: ``pi(mu, {x}) = rho_x + C_x(mu(x))``
* interaction, positive diagonal: ``pi(mu, {z}) = V(z, mu) (rho_z + C_z(mu_z))``
* interaction, vanishing diagonal: ``pi(mu, {z}) = V(z, mu) rho_z + V(z, mu off z) c_z(mu_z)``

``c`` tables hold increments in the first two regimes and direct values in
the third, matching :func:`papangelou.kernels.interaction_kernel`. Every
extraction rebuilds the kernel and compares it with the source on all
probed configurations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .checks import (CheckReport, check_A2, check_A2prime_extract_f, check_cocycle,
                     check_Jprime, _probes)
from .core import Config, Kernel, Measure, close, div, is_exact, to_jsonable
from .kernels import (LocalReinforcement, PairDensity, interaction_kernel,
                      local_reinforcement_kernel)

__all__ = ["ExtractionError", "Decomposition", "Classification", "extract_local",
           "extract_interaction", "extract_vanishing_diagonal", "classify"]

REGIMES = ("local", "interaction_positive_diagonal", "interaction_vanishing_diagonal")


class ExtractionError(ValueError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


@dataclass
class Decomposition:
    rho: Measure
    c: dict  # {(site, n): value}
    regime: str
    f: PairDensity | None = None
    max_recovered_n: int = 0

    def increments(self, site) -> list:
        n = 1
        out = []
        while (site, n) in self.c:
            out.append(self.c[(site, n)])
            n += 1
        return out

    def kernel(self) -> Kernel:
        """Rebuild the kernel the decomposition describes."""
        if self.regime == "local":
            return local_reinforcement_kernel(LocalReinforcement(self.rho, dict(self.c)),
                                              name="reconstructed")
        return interaction_kernel(self.rho, self.f, dict(self.c))

    def to_dict(self) -> dict:
        space = self.rho.space
        return to_jsonable({
            "regime": self.regime,
            "sites": [str(s) for s in space.sites],
            "rho": list(self.rho.weights),
            "c": {str(s): self.increments(s) for s in space.sites},
            "f": None if self.f is None else [list(r) for r in self.f.matrix],
            "max_recovered_n": self.max_recovered_n,
        })


def _require(report: CheckReport, what: str):
    if not report.passed:
        raise ExtractionError(f"{what} fails: {report.property} violated", report.to_dict())


def _diag_values(pi: Kernel, i: int, max_n: int) -> list:
    """[pi(n d_x, {x}) for n = 0..] up to max_n or the support bound."""
    out = []
    counts = [0] * pi.space.size
    for n in range(max_n + 1):
        counts[i] = n
        c = tuple(counts)
        if not pi.admissible(c):
            break
        out.append(pi.at(c, i))
    return out


def _verify(pi: Kernel, rebuilt: Kernel, probe_mass: int, max_n: int, tol: float):
    for c in _probes(pi, probe_mass):
        if max(c, default=0) > max_n:
            continue
        a, b = pi.intensity(c), rebuilt.intensity(c) if rebuilt.admissible(c) else None
        if b is None:
            if any(v != 0 for v in a):
                raise ExtractionError("reconstruction excludes a configuration the source allows",
                                      to_jsonable({"mu": Config(pi.space, c), "source": a}))
            continue
        for i, (u, v) in enumerate(zip(a, b)):
            if not close(u, v, tol):
                raise ExtractionError(
                    "reconstruction differs from the source kernel",
                    to_jsonable({"mu": Config(pi.space, c), "site": pi.space.sites[i],
                                 "source": u, "reconstructed": v}))


def extract_local(pi: Kernel, max_n: int = 6, probe_mass: int = 4,
                  tol: float = 1e-9) -> Decomposition:
    """rho = pi(0, .) and increments c_x(n) = pi(n d_x, {x}) - pi((n-1) d_x, {x})."""
    _require(check_cocycle(pi, probe_mass, tol), "cocycle condition")
    _require(check_A2(pi, probe_mass, tol), "local extraction")
    space = pi.space
    rho = Measure(space, pi.intensity((0,) * space.size))
    c = {}
    for i, x in enumerate(space.sites):
        vals = _diag_values(pi, i, max_n)
        for n in range(1, len(vals)):
            c[(x, n)] = vals[n] - vals[n - 1]
    dec = Decomposition(rho, c, "local", None, max_n)
    _verify(pi, dec.kernel(), probe_mass, max_n, tol)
    return dec


def _pair_density(pi: Kernel, f_off: dict, diagonal) -> PairDensity:
    space = pi.space
    n = space.size
    m = [[None] * n for _ in range(n)]
    for i, x in enumerate(space.sites):
        m[i][i] = diagonal[i]
        for j, y in enumerate(space.sites):
            if i == j:
                continue
            v = f_off.get((x, y), f_off.get((y, x), 1))
            m[i][j] = v
    return PairDensity(space, tuple(tuple(r) for r in m))


def _off_diagonal(pi: Kernel, probe_mass: int, tol: float) -> dict:
    _require(check_cocycle(pi, probe_mass, tol), "cocycle condition")
    rep, f = check_A2prime_extract_f(pi, probe_mass, tol)
    _require(rep, "interaction extraction")
    for (x, y), v in f.items():
        if (y, x) in f and not close(v, f[(y, x)], tol):
            raise ExtractionError("extracted pair density is not symmetric",
                                  to_jsonable({"x": x, "y": y, "f_xy": v, "f_yx": f[(y, x)]}))
    return f


def extract_interaction(pi: Kernel, f_diagonal, max_n: int = 6, probe_mass: int = 4,
                        tol: float = 1e-9) -> Decomposition:
    """Positive-diagonal interaction decomposition; ``f_diagonal`` is an input.

    Increments: c_x(n) = f(x,x)^-n pi(n d_x, {x}) - f(x,x)^-(n-1) pi((n-1) d_x, {x}).
    """
    space = pi.space
    diag = tuple(f_diagonal[s] if isinstance(f_diagonal, dict) else f_diagonal[i]
                 for i, s in enumerate(space.sites))
    if not all(d > 0 for d in diag):
        raise ExtractionError("positive-diagonal extraction needs f(x, x) > 0 everywhere")
    f = _pair_density(pi, _off_diagonal(pi, probe_mass, tol), diag)
    rho = Measure(space, pi.intensity((0,) * space.size))
    c = {}
    for i, x in enumerate(space.sites):
        vals = _diag_values(pi, i, max_n)
        d = diag[i]
        for n in range(1, len(vals)):
            c[(x, n)] = div(vals[n], d ** n) - div(vals[n - 1], d ** (n - 1))
    dec = Decomposition(rho, c, "interaction_positive_diagonal", f, max_n)
    _verify(pi, dec.kernel(), probe_mass, max_n, tol)
    return dec


def extract_vanishing_diagonal(pi: Kernel, max_n: int = 6, probe_mass: int = 4,
                               tol: float = 1e-9) -> Decomposition:
    """Zero-diagonal interaction decomposition with c_y(n) = pi(n d_y, {y})."""
    space = pi.space
    zero = tuple(0 * v for v in pi.intensity((0,) * space.size))
    f = _pair_density(pi, _off_diagonal(pi, probe_mass, tol), zero)
    rho = Measure(space, pi.intensity((0,) * space.size))
    c = {}
    for i, x in enumerate(space.sites):
        vals = _diag_values(pi, i, max_n)
        for n in range(1, len(vals)):
            c[(x, n)] = vals[n]
    dec = Decomposition(rho, c, "interaction_vanishing_diagonal", f, max_n)
    _verify(pi, dec.kernel(), probe_mass, max_n, tol)
    return dec


@dataclass
class Classification:
    kind: str
    parameters: dict
    reports: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return to_jsonable({"class": self.kind, "parameters": self.parameters,
                            "reports": [r.to_dict() for r in self.reports]})


def _integer_valued(values, tol) -> bool:
    for v in values:
        if is_exact(v):
            if Fraction(v).denominator != 1:
                return False
        elif abs(v - round(v)) > tol * max(1.0, abs(v)):
            return False
    return True


def classify(pi: Kernel, probe_mass: int = 4, tol: float = 1e-9) -> Classification:
    """Name the kernel's family from the postulate battery and its extraction.

    Linear kernels rho + c mu are Poisson (c = 0), Polya sum (0 < c < 1,
    rho0 = rho / c) or Polya difference (c < 0 with rho / |c| integer);
    other (A1)+(A2) kernels are local reinforcement, (A1)+(A2') kernels are
    interactions, anything else is unknown.
    """
    a1 = check_cocycle(pi, probe_mass, tol)
    a2 = check_A2(pi, probe_mass, tol)
    reports = [a1, a2]
    if a1.passed and a2.passed:
        jp = check_Jprime(pi, probe_mass, tol) if pi.space.size <= 20 else None
        if jp is not None:
            reports.append(jp)
        dec = extract_local(pi, max_n=max(probe_mass, 1), probe_mass=probe_mass, tol=tol)
        rho = dec.rho.weights
        incs = list(dec.c.values())
        if jp is not None and jp.passed:
            c1 = incs[0] if incs else 0
            if all(close(v, c1, tol) for v in incs):
                if c1 == 0 or (not is_exact(c1) and abs(c1) <= tol):
                    return Classification("poisson", {"rho": rho}, reports)
                if 0 < c1 < 1:
                    return Classification("polya_sum", {"z": c1, "rho0": tuple(div(r, c1) for r in rho)},
                                          reports)
                if c1 < 0:
                    rho0 = tuple(div(r, -c1) for r in rho)
                    if _integer_valued(rho0, tol):
                        rho0 = tuple(int(round(v)) if not is_exact(v) else Fraction(v) for v in rho0)
                        return Classification("polya_difference", {"z": -c1, "rho0": rho0},
                                              reports)
        return Classification("local_reinforcement", {"rho": rho, "c": dec.to_dict()["c"]},
                              reports)
    if a1.passed:
        a2p, f = check_A2prime_extract_f(pi, probe_mass, tol)
        reports.append(a2p)
        if a2p.passed:
            return Classification("interaction", {"rho": pi.intensity((0,) * pi.space.size),
                                                  "f": {f"{x},{y}": v for (x, y), v in f.items()}},
                                  reports)
    return Classification("unknown", {}, reports)
