"""Monte Carlo checks of the integration-by-parts identity

    E sum_x mu(x) h(x, mu)  =  E sum_x pi(mu, {x}) h(x, mu + d_x)

and of its transport along site maps. Both sides are estimated on the same
draws; the z-score uses the standard error of the per-draw difference.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .checks import check_dynkin
from .core import Config, Kernel, SiteMap, Space
from .kernels import DynkinViolation, pushforward_kernel
from .partition import Truncation
from .samplers import SampleBatch, sample

__all__ = ["TestFunction", "EstimateReport", "SUITE_VERSION", "default_suite", "campbell_lhs",
           "campbell_rhs", "estimate", "gnz_test", "transform_test", "reports_to_csv",
           "reports_to_json"]

SUITE_VERSION = "1"
THRESHOLD = 3.0


@dataclass(frozen=True)
class TestFunction:
    eval: Callable  # (site, Config) -> real
    name: str
    family: str  # indicator | constant | count-weighted | exponential-tilt

    __test__ = False  # keep pytest from collecting it


def default_suite(space: Space) -> list:
    """Indicators of each site, h = 1, h = mu({x}) and the tilt exp(-mu(X))."""
    suite = [TestFunction(lambda x, mu, s=s: 1.0 if x == s else 0.0, f"indicator[{s}]", "indicator")
             for s in space.sites]
    suite.append(TestFunction(lambda x, mu: 1.0, "one", "constant"))
    suite.append(TestFunction(lambda x, mu: float(mu[x]), "count", "count-weighted"))
    suite.append(TestFunction(lambda x, mu: math.exp(-mu.total), "tilt", "exponential-tilt"))
    return suite


@dataclass
class EstimateReport:
    h: str
    lhs: float
    rhs: float
    se_lhs: float
    se_rhs: float
    se_diff: float
    n: int
    z_score: float
    verdict: str
    sums: dict  # per-draw sums that reproduce every statistic
    kernel: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["z_score"] = _finite(self.z_score)
        return d


def _finite(v):
    return "inf" if v == math.inf else v


def _unique(batch: SampleBatch):
    if len(batch.counts) == 0:
        raise ValueError("empty sample batch")
    return np.unique(batch.counts, axis=0, return_inverse=True)


def _lhs_values(space: Space, rows, h: TestFunction) -> np.ndarray:
    out = np.zeros(len(rows))
    for k, r in enumerate(rows):
        mu = Config(space, tuple(int(v) for v in r))
        out[k] = sum(n * h.eval(x, mu) for x, n in zip(space.sites, mu.counts) if n)
    return out


def _rhs_values(pi: Kernel, rows, h: TestFunction) -> np.ndarray:
    space = pi.space
    out = np.zeros(len(rows))
    for k, r in enumerate(rows):
        c = tuple(int(v) for v in r)
        lam = pi.intensity(c)
        total = 0.0
        for i, x in enumerate(space.sites):
            if lam[i]:
                up = list(c)
                up[i] += 1
                total += float(lam[i]) * h.eval(x, Config(space, tuple(up)))
        out[k] = total
    return out


def _mean_se(values: np.ndarray):
    n = len(values)
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


def campbell_lhs(batch: SampleBatch, h: TestFunction) -> dict:
    rows, inv = _unique(batch)
    mean, se = _mean_se(_lhs_values(batch.space, rows, h)[inv.ravel()])
    return {"mean": mean, "se": se}


def campbell_rhs(batch: SampleBatch, pi: Kernel, h: TestFunction) -> dict:
    rows, inv = _unique(batch)
    mean, se = _mean_se(_rhs_values(pi, rows, h)[inv.ravel()])
    return {"mean": mean, "se": se}


def _z(mean_diff: float, se_diff: float) -> float:
    if se_diff == 0:
        return 0.0 if mean_diff == 0 else math.inf
    return abs(mean_diff) / se_diff


def estimate(batch: SampleBatch, pi: Kernel, h: TestFunction) -> EstimateReport:
    """Paired estimate of both sides of the identity for one test function."""
    rows, inv = _unique(batch)
    inv = inv.ravel()
    a = _lhs_values(batch.space, rows, h)[inv]
    b = _rhs_values(pi, rows, h)[inv]
    d = a - b
    n = len(d)
    lhs, se_l = _mean_se(a)
    rhs, se_r = _mean_se(b)
    md, se_d = _mean_se(d)
    z = _z(md, se_d)
    sums = {"lhs": float(a.sum()), "rhs": float(b.sum()), "lhs_sq": float((a * a).sum()),
            "rhs_sq": float((b * b).sum()), "diff": float(d.sum()), "diff_sq": float((d * d).sum())}
    return EstimateReport(h.name, lhs, rhs, se_l, se_r, se_d, n, z,
                          "pass" if z <= THRESHOLD else "fail", sums, pi.name)


def gnz_test(pi: Kernel, sampler_method: str = "exact", h_suite: list | None = None,
             n: int = 100_000, seed: int = 0, *, batch: SampleBatch | None = None,
             replicas: int = 1, workers: int = 1,
             truncation: Truncation = Truncation()) -> list:
    """One report per test function; pass iff the paired z-score is at most 3.

    ``batch`` overrides sampling, which lets draws from one law be tested
    against another kernel.
    """
    if batch is None:
        batch = sample(pi, sampler_method, n, seed, replicas, workers, truncation)
    suite = default_suite(pi.space) if h_suite is None else h_suite
    return [estimate(batch, pi, h) for h in suite]


def transform_test(pi: Kernel, G: SiteMap, sampler_method: str = "exact",
                   h_suite: list | None = None, n: int = 100_000, seed: int = 0, *,
                   probe_mass: int = 4, replicas: int = 1, workers: int = 1,
                   truncation: Truncation = Truncation()):
    """Sample from ``pi``, push through ``G`` and test against the image kernel.

    Returns ``(reports, image_kernel, pushed_batch)``.
    """
    d = check_dynkin(pi, G, probe_mass)
    if not d.passed:
        raise DynkinViolation(f"Dynkin's condition fails for {pi.name} under the given map",
                              d.witness)
    target = pushforward_kernel(pi, G, probe_mass)
    pushed = sample(pi, sampler_method, n, seed, replicas, workers, truncation).push(G)
    suite = default_suite(G.target) if h_suite is None else h_suite
    return [estimate(pushed, target, h) for h in suite], target, pushed


_CSV_FIELDS = ("kernel", "h", "n", "lhs", "rhs", "se_lhs", "se_rhs", "se_diff", "z_score",
               "verdict")


def reports_to_csv(reports: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_CSV_FIELDS)
    for r in reports:
        d = r.to_dict()
        w.writerow([d[k] for k in _CSV_FIELDS])
    return buf.getvalue()


def reports_to_json(reports: list) -> str:
    return json.dumps({"suite_version": SUITE_VERSION, "reports": [r.to_dict() for r in reports]},
                      sort_keys=True)
