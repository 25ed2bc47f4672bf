"""Monte Carlo estimation of two-terminal connectivity.

Samples are processed in fixed-size blocks. Roadway states for sample ``j`` of
event ``k`` come from counter-based uniforms keyed by ``(seed, k)`` and indexed
by ``j``, and block results are reduced in block order. The estimate is
therefore bit-identical for any worker count.
"""
from __future__ import annotations

import io
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import rng as rngmod
from ._backend import kernels
from .errors import DataError
from .fragility import IM_PERIODS, Bridge, BridgeArrays
from .hazard import (GmpeCoefficients, haversine_km, ln_median_pga, ln_spectral_shape)
from .network import TransportNetwork, check_probs

BLOCK_SIZE = 1 << 14
#: Loma Prieta (1989) epicenter, degrees
DEFAULT_EPICENTER = (37.04, -121.88)

TOPOLOGY = "topology"
EVENT = "event"


@dataclass
class ReliabilityEstimate:
    p_hat: float
    n_samples: int
    successes: int
    trace: list[tuple[int, float]] = field(default_factory=list)
    elapsed_seconds: float = 0.0

    @property
    def std_err(self) -> float:
        p = self.p_hat
        return float(np.sqrt(p * (1.0 - p) / self.n_samples))

    def summary(self) -> dict:
        return {"p_hat": self.p_hat, "n_samples": self.n_samples,
                "std_err": self.std_err, "elapsed_seconds": self.elapsed_seconds}

    def trace_csv(self) -> str:
        buf = io.StringIO()
        buf.write("sample_index,running_mean\n")
        for idx, mean in self.trace:
            buf.write(f"{idx},{mean!r}\n")
        return buf.getvalue()


def checkpoints(n: int) -> list[int]:
    """1, 2, 5, 10, 20, 50, ... up to n, always ending with n."""
    out, decade = [], 1
    while decade <= n:
        out.extend(c for c in (decade, 2 * decade, 5 * decade) if c <= n)
        decade *= 10
    if not out or out[-1] != n:
        out.append(n)
    return out


def sample_topology(probs, rng: np.random.Generator) -> np.ndarray:
    """One Bernoulli draw per roadway: 1 (survived) with probability probs[i]."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or not np.all((p >= 0) & (p <= 1)):
        raise DataError("probabilities must be a vector in [0, 1]")
    return (rng.random(p.shape[0]) < p).astype(np.uint8)


# -- checkers -----------------------------------------------------------------

def resolve_check(net: TransportNetwork, check) -> Callable | None:
    """Return a batch function states -> indicators, or None for the fused DFS kernel."""
    if check is None or (isinstance(check, str) and check == "dfs"):
        return None
    if hasattr(check, "check_batch"):
        return check.check_batch
    if callable(check):
        def per_row(states):
            return np.fromiter((check(net, row) for row in states), dtype=np.uint8,
                               count=len(states))
        return per_row
    raise DataError(f"unsupported connectivity check {check!r}")


def _block_worker(net, probs, key, start, count, batch_fn):
    if batch_fn is None:
        g = net.arrays
        return kernels.sample_and_check(key, start, count, probs, g.indptr, g.nbr, g.lnk,
                                        g.link_u, g.link_v, g.source, g.terminal)
    states = kernels.sample_states(key, start, count, probs)
    ind = np.asarray(batch_fn(states))
    if ind.shape != (count,):
        raise DataError(f"check returned shape {ind.shape} for {count} samples")
    return ind.astype(np.uint8)


def _run(net, prob_rows, n_per_row, check, seed, workers, want_trace):
    """Count successes per row of ``prob_rows``; optionally record a flat-index trace."""
    batch_fn = resolve_check(net, check)
    n_rows = prob_rows.shape[0]
    total = n_rows * n_per_row
    cps = checkpoints(total) if want_trace else []
    tasks = []
    for k in range(n_rows):
        key = rngmod.stream_key(seed, TOPOLOGY, k)
        for start in range(0, n_per_row, BLOCK_SIZE):
            tasks.append((k, key, start, min(BLOCK_SIZE, n_per_row - start)))

    def work(task):
        k, key, start, count = task
        ind = _block_worker(net, prob_rows[k], key, start, count, batch_fn)
        if not want_trace:
            return int(ind.sum()), None
        lo = k * n_per_row + start
        local = [c - lo for c in cps if lo < c <= lo + count]
        csum = np.cumsum(ind, dtype=np.int64)
        return int(csum[-1]), [int(csum[c - 1]) for c in local]

    counts = np.zeros(n_rows, dtype=np.int64)
    trace = []
    running = 0
    cp_iter = iter(cps)
    for (k, _, start, count), (succ, partial) in zip(tasks, _map(work, tasks, workers)):
        if partial:
            for part in partial:
                c = next(cp_iter)
                trace.append((c, (running + part) / c))
        running += succ
        counts[k] += succ
    return counts, trace


def _map(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return map(fn, items)
    pool = ThreadPoolExecutor(max_workers=workers)
    try:
        return list(pool.map(fn, items))
    finally:
        pool.shutdown()


def estimate_connectivity(net: TransportNetwork, probs, n: int, check="dfs",
                          seed: int = 0, workers: int = 1) -> ReliabilityEstimate:
    """Mean connectivity over ``n`` sampled topologies."""
    if n < 1:
        raise DataError("sample count must be at least 1")
    p = check_probs(probs, net.n_links)
    t0 = time.perf_counter()
    counts, trace = _run(net, p[None, :], n, check, seed, workers, True)
    succ = int(counts[0])
    return ReliabilityEstimate(succ / n, n, succ, trace, time.perf_counter() - t0)


def connectivity_per_event(net: TransportNetwork, prob_rows, n: int, check="dfs",
                           seed: int = 0, workers: int = 1) -> np.ndarray:
    """Per-row Monte Carlo connectivity for a matrix of roadway probabilities."""
    P = np.ascontiguousarray(np.atleast_2d(np.asarray(prob_rows, dtype=np.float64)))
    if P.shape[1] != net.n_links or not np.all((P >= 0) & (P <= 1)):
        raise DataError(f"probability rows must be in [0, 1] with {net.n_links} columns")
    counts, _ = _run(net, P, n, check, seed, workers, False)
    return counts / n


# -- seismic scenario ---------------------------------------------------------

class SeismicScenario:
    """Network + bridges + GMPE + epicenter: magnitudes -> roadway survival probabilities."""

    def __init__(self, net: TransportNetwork, bridges: Sequence[Bridge], gmpe: GmpeCoefficients,
                 epicenter: tuple[float, float] = DEFAULT_EPICENTER):
        self.net = net
        self.gmpe = gmpe
        self.epicenter = tuple(epicenter)
        self.bridges = sorted(bridges, key=lambda b: b.id)
        self.arrays = BridgeArrays(self.bridges)
        missing = [b for b in net.bridge_ids if b not in self.arrays.position]
        if missing:
            raise DataError(f"network references bridges missing from the inventory: {missing}")
        pos = self.arrays.position
        self.link_bridges = [np.array([pos[b] for b in road.bridge_ids], dtype=np.int64)
                             for road in net.links]
        a = self.arrays
        self.distance_km = haversine_km(a.lat, a.lon, self.epicenter[0], self.epicenter[1])
        self.im_kinds = sorted(set(a.im_kind))

    @property
    def bridge_ids(self) -> np.ndarray:
        return self.arrays.ids

    @property
    def n_bridges(self) -> int:
        return len(self.arrays)

    def ln_ims(self, magnitudes, residual_z=None, sigma_ln=None) -> dict[str, np.ndarray]:
        """ln intensity measures, shape (n_events, n_bridges), per IM kind."""
        m = np.asarray(magnitudes, dtype=np.float64)[:, None]
        a = self.arrays
        ln_pga = ln_median_pga(self.gmpe, m, self.distance_km, a.vs30, a.basin_depth)
        if residual_z is not None:
            sigma = self.gmpe.sigma_ln_pga if sigma_ln is None else sigma_ln
            ln_pga = ln_pga + sigma * np.asarray(residual_z)
        out = {}
        for kind in self.im_kinds:
            period = IM_PERIODS[kind]
            out[kind] = ln_pga if period is None else ln_pga + ln_spectral_shape(
                self.gmpe, period, m, self.distance_km, a.vs30, a.basin_depth)
        return out

    def bridge_survivals(self, magnitudes, residual_z=None, sigma_ln=None) -> np.ndarray:
        """Bridge survival probabilities, shape (n_events, n_bridges), columns in id order."""
        return self.arrays.survival_from_ln_im(self.ln_ims(magnitudes, residual_z, sigma_ln))

    def roadway_probs(self, bridge_survivals) -> np.ndarray:
        """Roadway survival (..., n_links): product of bridge survivals, summed in log scale."""
        s = np.asarray(bridge_survivals, dtype=np.float64)
        out = np.ones(s.shape[:-1] + (self.net.n_links,))
        with np.errstate(divide="ignore"):
            ln_s = np.log(s)
        for i, idx in enumerate(self.link_bridges):
            if idx.size:
                out[..., i] = np.exp(ln_s[..., idx].sum(axis=-1))
        return out

    def probs_at(self, magnitude: float) -> np.ndarray:
        return self.roadway_probs(self.bridge_survivals([magnitude]))[0]

    def draw_events(self, magnitude_dist, n_events: int, seed: int, with_residuals=False,
                    label=EVENT):
        """Magnitudes (n_events,) and residual normals (n_events, n_bridges) or None.

        Each event has its own stream; the magnitude is drawn first, so turning
        residuals on or off leaves the magnitudes unchanged.
        """
        mags = np.empty(n_events)
        z = np.zeros((n_events, self.n_bridges)) if with_residuals else None
        for k in range(n_events):
            g = rngmod.stream(seed, label, k)
            mags[k] = magnitude_dist.sample(g)
            if with_residuals:
                z[k] = g.standard_normal(self.n_bridges)
        return mags, z


def estimate_probabilistic_event(scenario: SeismicScenario, magnitude_dist, n_outer: int,
                                 n_inner: int = 1000, with_residuals: bool = False, check="dfs",
                                 seed: int = 0, workers: int = 1,
                                 sigma_ln: float | None = None) -> ReliabilityEstimate:
    """Nested estimate: n_outer earthquake draws, n_inner topologies each."""
    if n_outer < 1 or n_inner < 1:
        raise DataError("n_outer and n_inner must be at least 1")
    t0 = time.perf_counter()
    mags, z = scenario.draw_events(magnitude_dist, n_outer, seed, with_residuals)
    P = scenario.roadway_probs(scenario.bridge_survivals(mags, z, sigma_ln))
    counts, trace = _run(scenario.net, np.ascontiguousarray(P), n_inner, check, seed, workers, True)
    succ = int(counts.sum())
    n = n_outer * n_inner
    return ReliabilityEstimate(succ / n, n, succ, trace, time.perf_counter() - t0)
