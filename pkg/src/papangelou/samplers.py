"""Exact, product-form and birth-death samplers for Papangelou processes.

Each sampler splits its work into ``replicas``, and every replica gets its own
child stream of ``numpy.random.SeedSequence(seed)``. Replicas may run on
several threads (``workers``), but results are concatenated in replica order,
so the output depends on ``(seed, replicas)`` and never on ``workers``.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import Config, Kernel, Space
from .partition import Truncation, conditional_law

__all__ = ["SampleBatch", "sample", "METHODS", "sample_exact", "sample_product_form", "sample_birth_death",
           "exact_law"]


@dataclass
class SampleBatch:
    space: Space
    counts: np.ndarray  # (n, |X|) multiplicities
    seed: int
    method: str
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.counts)

    @property
    def configs(self) -> list:
        return [Config(self.space, tuple(int(v) for v in row)) for row in self.counts]

    def empirical(self) -> dict:
        """Relative frequency of each distinct configuration (counts tuple keys)."""
        rows, freq = np.unique(self.counts, axis=0, return_counts=True)
        n = len(self.counts)
        return {tuple(int(v) for v in r): f / n for r, f in zip(rows, freq)}

    def marginal(self, site) -> dict:
        col = self.counts[:, self.space.index(site)]
        vals, freq = np.unique(col, return_counts=True)
        return {int(v): f / len(col) for v, f in zip(vals, freq)}

    def mean(self, site) -> float:
        return float(self.counts[:, self.space.index(site)].mean())

    def push(self, G) -> "SampleBatch":
        """Image batch under a site map."""
        M = np.zeros((G.source.size, G.target.size), dtype=np.int64)
        for i, j in enumerate(G.assignment):
            M[i, j] = 1
        return SampleBatch(G.target, self.counts @ M, self.seed, self.method,
                           dict(self.diagnostics, pushed_by=G.as_dict()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([str(s) for s in self.space.sites])
        w.writerows(self.counts.tolist())
        return buf.getvalue()

    def to_dict(self, include_draws: bool = False) -> dict:
        out = {
            "sites": [str(s) for s in self.space.sites],
            "n": len(self.counts),
            "seed": self.seed,
            "method": self.method,
            "diagnostics": self.diagnostics,
            "mean": [float(v) for v in self.counts.mean(axis=0)] if len(self.counts) else [],
        }
        if include_draws:
            out["draws"] = self.counts.tolist()
        return out

    def to_json(self, include_draws: bool = True) -> str:
        return json.dumps(self.to_dict(include_draws), sort_keys=True)


def _split(n: int, replicas: int) -> list:
    return [n // replicas + (1 if r < n % replicas else 0) for r in range(replicas)]


def _run_replicas(fn, seed: int, sizes: list, workers: int) -> list:
    streams = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = list(zip(range(len(sizes)), streams, sizes))
    if workers <= 1 or len(jobs) == 1:
        return [fn(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def exact_law(pi: Kernel, truncation: Truncation = Truncation()):
    """Normalized weight table of the whole space with empty boundary."""
    return conditional_law(pi, Config.empty(pi.space), pi.space.sites, truncation)


def sample_exact(pi: Kernel, n: int, truncation: Truncation = Truncation(), seed: int = 0,
                 replicas: int = 1, workers: int = 1, table=None) -> SampleBatch:
    """I.i.d. draws by inverse CDF over the enumerated configuration law."""
    if table is None:
        table = exact_law(pi, truncation)
    probs = np.array([float(w) for w in table.weights])
    cdf = np.cumsum(probs)
    rows = np.array([mu.counts for mu in table.configs], dtype=np.int64)

    def one(r, stream, size):
        rng = np.random.default_rng(stream)
        idx = np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right")
        return rows[np.minimum(idx, len(rows) - 1)]

    parts = _run_replicas(one, seed, _split(n, replicas), workers)
    counts = np.concatenate(parts) if parts else np.zeros((0, pi.space.size), dtype=np.int64)
    diag = {"truncation_mass": table.truncation_mass, "tail_bound": float(table.tail_bound),
            "n_configs": len(table), "replicas": replicas}
    return SampleBatch(pi.space, counts, seed, "exact", diag)


def sample_product_form(pi: Kernel, n: int, seed: int = 0, replicas: int = 1,
                        workers: int = 1) -> SampleBatch:
    """Independent per-site draws for the Poisson and Polya kernels."""
    family = pi.params.get("family")
    rho = np.array([float(v) for v in pi.params.get("rho", ())])
    if family == "poisson":
        def draw(rng, size):
            return rng.poisson(rho, size=(size, len(rho)))
    elif family == "polya_sum":
        z = float(pi.params["z"])

        def draw(rng, size):
            out = np.zeros((size, len(rho)), dtype=np.int64)
            for i, r in enumerate(rho):
                if r > 0:
                    out[:, i] = rng.negative_binomial(r, 1 - z, size=size)
            return out
    elif family == "polya_difference":
        z = float(pi.params["z"])
        trials = np.array(pi.support_bound, dtype=np.int64)

        def draw(rng, size):
            return rng.binomial(trials, z / (1 + z), size=(size, len(trials)))
    else:
        raise ValueError(f"no product-form sampler for kernel family {family!r}")

    def one(r, stream, size):
        return draw(np.random.default_rng(stream), size).astype(np.int64)

    parts = _run_replicas(one, seed, _split(n, replicas), workers)
    return SampleBatch(pi.space, np.concatenate(parts), seed, "product_form",
                       {"family": family, "replicas": replicas})


def _chain(pi: Kernel, steps: int, burn_in: int, thin: int, rng, init):
    size = pi.space.size
    state = list(init)
    m = sum(state)
    n_keep = len(range(burn_in, steps, thin))
    out = np.zeros((n_keep, size), dtype=np.int64)
    accepted = births = deaths = 0
    kept = 0
    chunk = 1 << 16
    for start in range(0, steps, chunk):
        k = min(chunk, steps - start)
        u_move = rng.random(k)
        u_pick = rng.random(k)
        u_acc = rng.random(k)
        for t in range(k):
            step = start + t
            if m == 0 or u_move[t] < 0.5:
                x = int(u_pick[t] * size)
                lam = pi.intensity(tuple(state))[x]
                beta = 1.0 if m == 0 else 0.5
                ratio = float(lam) * size * 0.5 / ((m + 1) * beta)
                if ratio >= 1 or u_acc[t] < ratio:
                    state[x] += 1
                    m += 1
                    accepted += 1
                    births += 1
            else:
                r = int(u_pick[t] * m)
                x = 0
                while r >= state[x]:
                    r -= state[x]
                    x += 1
                state[x] -= 1
                lam = float(pi.intensity(tuple(state))[x])
                beta = 1.0 if m == 1 else 0.5
                ratio = m * beta / (0.5 * size * lam) if lam > 0 else float("inf")
                if ratio >= 1 or u_acc[t] < ratio:
                    m -= 1
                    accepted += 1
                    deaths += 1
                else:
                    state[x] += 1
            if step >= burn_in and (step - burn_in) % thin == 0:
                out[kept] = state
                kept += 1
    return out, {"accepted": accepted, "births": births, "deaths": deaths}


def sample_birth_death(pi: Kernel, steps: int, burn_in: int = 10_000, thin: int = 10,
                       seed: int = 0, replicas: int = 1, workers: int = 1,
                       init: Config | None = None) -> SampleBatch:
    """Metropolis-Hastings birth-death chain targeting the configuration law.

    Births pick a uniform site, deaths a uniform existing point (1/2 each when
    the configuration is nonempty). Detailed balance uses
    ``P(mu + d_x) / P(mu) = pi(mu, {x}) / (mu(x) + 1)``. Every replica runs
    its own chain of ``steps`` steps and keeps every ``thin``-th state after
    ``burn_in``.
    """
    if not steps > burn_in >= 0:
        raise ValueError("need steps > burn_in >= 0")
    if thin < 1:
        raise ValueError("thin must be >= 1")
    start = (0,) * pi.space.size if init is None else init.counts

    def one(r, stream, _size):
        return _chain(pi, steps, burn_in, thin, np.random.default_rng(stream), start)

    results = _run_replicas(one, seed, [steps] * replicas, workers)
    counts = np.concatenate([r[0] for r in results])
    acc = sum(r[1]["accepted"] for r in results)
    diag = {
        "acceptance_rate": acc / (steps * replicas),
        "births": sum(r[1]["births"] for r in results),
        "deaths": sum(r[1]["deaths"] for r in results),
        "steps": steps, "burn_in": burn_in, "thin": thin, "replicas": replicas,
    }
    return SampleBatch(pi.space, counts, seed, "birth_death", diag)


METHODS = ("exact", "product_form", "birth_death")


def sample(pi: Kernel, method: str, n: int, seed: int = 0, replicas: int = 1, workers: int = 1,
           truncation: Truncation = Truncation(), burn_in: int = 10_000, thin: int = 10,
           table=None) -> SampleBatch:
    """Draw ``n`` configurations with the named method.

    For ``birth_death`` the ``n`` draws are split over the replicas' chains,
    each run for ``burn_in + thin * (its share)`` steps.
    """
    if method == "exact":
        return sample_exact(pi, n, truncation, seed, replicas, workers, table)
    if method == "product_form":
        return sample_product_form(pi, n, seed, replicas, workers)
    if method == "birth_death":
        per = -(-n // replicas)
        batch = sample_birth_death(pi, burn_in + thin * per, burn_in, thin, seed, replicas, workers)
        batch.counts = batch.counts[:n] if replicas == 1 else _take_balanced(batch.counts, per, n)
        return batch
    raise ValueError(f"unknown sampler method {method!r}; expected one of {METHODS}")


def _take_balanced(counts: np.ndarray, per: int, n: int) -> np.ndarray:
    sizes = _split(n, len(counts) // per)
    return np.concatenate([counts[r * per: r * per + s] for r, s in enumerate(sizes)])
