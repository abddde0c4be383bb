"""
Thermal-cloud ensembles: sampling, batched evolution and averaging.

Each member is a plane wave at momentum p0 = hbar_eff (m0 + beta) drawn
from a Gaussian of width sigma_p * hbar_eff.  Members evolve independently
with their own quasimomentum and their own (frozen) kick strength; the
ensemble average is incoherent, i.e. probabilities are summed, not
amplitudes.

Members are processed in fixed-size chunks.  Chunk boundaries do not
depend on the worker count and the reduction runs in member order, so the
output is bitwise identical for any number of workers.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import GridTooSmall, InvalidParameter
from .model import Mode, SimParams, build_schedule
from .observables import MomentumDistribution, ObservableSeries
from .quantum import edge_width, evolve_batch, momenta, pad_grid

log = logging.getLogger(__name__)

CHUNK_SIZE = 25


@dataclass(frozen=True)
class CloudSpec:
    """Gaussian momentum cloud; sigma_p is measured in units of hbar_eff."""

    sigma_p: float = 2.0
    n_members: int = 200
    seed: int = 0

    def __post_init__(self):
        if not self.sigma_p > 0:
            raise InvalidParameter(f"sigma_p must be > 0, got {self.sigma_p}")
        if int(self.n_members) != self.n_members or self.n_members < 1:
            raise InvalidParameter(f"n_members must be >= 1, got {self.n_members}")

    @property
    def w(self):
        return self.sigma_p


@dataclass(frozen=True)
class NoiseSpec:
    """Relative Gaussian error of the kick strength, frozen per member."""

    k_rel_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.k_rel_sigma < 0.5:
            raise InvalidParameter(f"k_rel_sigma must lie in [0, 0.5), got {self.k_rel_sigma}")


class CloudSample(NamedTuple):
    m0: np.ndarray
    beta: np.ndarray
    n_rejected: int

    def members(self):
        return list(zip(self.m0.tolist(), self.beta.tolist()))


def _split_momentum(q):
    """q = m0 + beta with beta in [0, 1); values within 1e-12 of an integer snap to it."""
    r = np.rint(q)
    q = np.where(np.abs(q - r) < 1e-12, r, q)
    m0 = np.floor(q)
    beta = q - m0
    # floor of a value just below an integer can leave beta == 1.0 after rounding
    wrap = beta >= 1.0
    m0[wrap] += 1
    beta[wrap] = 0.0
    return m0.astype(np.int64), beta


def sample_cloud(spec: CloudSpec, hbar_eff, grid_size) -> CloudSample:
    """Draw member momenta p0 ~ Normal(0, sigma_p hbar_eff), split as hbar_eff (m0 + beta).

    Draws landing in the edge region of the grid are rejected and redrawn.
    """
    if not hbar_eff > 0:
        raise InvalidParameter("hbar_eff must be positive")
    rng = np.random.default_rng(spec.seed)
    limit = grid_size // 2 - edge_width(grid_size)
    q = rng.normal(0.0, spec.sigma_p * hbar_eff, spec.n_members) / hbar_eff
    rejected = 0
    while True:
        bad = np.flatnonzero((q < -limit) | (q >= limit - 1))
        if bad.size == 0:
            break
        rejected += bad.size
        if rejected > 100 * spec.n_members:
            raise GridTooSmall(f"cloud of width {spec.sigma_p} does not fit a grid of {grid_size}")
        q[bad] = rng.normal(0.0, spec.sigma_p * hbar_eff, bad.size) / hbar_eff
    if rejected:
        log.warning("rejected and redrew %d cloud samples outside the grid", rejected)
    m0, beta = _split_momentum(q)
    return CloudSample(m0, beta, rejected)


def sample_kicks(k, noise: NoiseSpec, n_members):
    """Per-member kick strengths k (1 + Normal(0, k_rel_sigma)), clipped at 0."""
    if noise.k_rel_sigma == 0:
        return np.full(n_members, float(k))
    rng = np.random.default_rng(noise.seed)
    return np.clip(k * (1.0 + noise.k_rel_sigma * rng.standard_normal(n_members)), 0.0, None)


def default_workers():
    env = os.environ.get("KRLAB_THREADS")
    n = os.cpu_count() or 1
    if env:
        try:
            n = min(n, max(1, int(env)))
        except ValueError:
            raise InvalidParameter(f"KRLAB_THREADS must be an integer, got {env!r}") from None
    return n


@dataclass(eq=False)
class EnsembleResult:
    params: SimParams
    series: ObservableSeries              # averaged <E> and IPR of the averaged distribution
    final_distribution: MomentumDistribution
    member_energies: np.ndarray           # (n_members, n_records)
    member_k: np.ndarray
    cloud: CloudSample
    grid_size: int

    @property
    def distributions(self):
        return self.series.snapshots


def _run_chunk(args):
    sl, cloud, ks, schedule, params, record_every, snapshot_at = args
    D = params.grid_size
    m0 = cloud.m0[sl]
    amps = np.zeros((len(m0), D), dtype=complex)
    amps[np.arange(len(m0)), m0 + D // 2] = 1.0
    try:
        return evolve_batch(
            amps, cloud.beta[sl], ks[sl], schedule, params.hbar_eff,
            record_every=record_every, snapshot_at=snapshot_at,
        )
    except GridTooSmall as exc:
        member = sl.start + (exc.member or 0)
        raise GridTooSmall(f"member {member}: {exc}", exc.edge_occupancy, member) from exc


def run_ensemble(params: SimParams, cloud: CloudSpec, noise: NoiseSpec, record_every=1, *,
                 workers=None, snapshot_at=(), chunk_size=CHUNK_SIZE) -> EnsembleResult:
    """Evolve every cloud member and average the results.

    The returned series holds the member-averaged energy and the IPR of the
    member-averaged momentum distribution at each recorded kick.
    Averaged distributions are kept as snapshots for the final kick and for
    any kick in `snapshot_at`.
    """
    schedule = build_schedule(params)
    sample = sample_cloud(cloud, params.hbar_eff, params.grid_size)
    ks = sample_kicks(params.k, noise, cloud.n_members)
    B = cloud.n_members
    chunks = [slice(i, min(i + chunk_size, B)) for i in range(0, B, chunk_size)]
    jobs = [(sl, sample, ks, schedule, params, record_every, ()) for sl in chunks]
    workers = workers or default_workers()
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chunk, jobs))
    else:
        results = [_run_chunk(j) for j in jobs]

    D = max(r.grid_size for r in results)
    kicks = results[0].kicks
    energies = np.concatenate([r.energies.T for r in results], axis=0)
    prob_sum = np.zeros((len(kicks), D))
    for r in results:
        prob_sum += pad_grid(r.prob_sums, D).real
    P = prob_sum / B
    wanted = set(snapshot_at) | {schedule.n_kicks}
    snaps = {
        int(n): MomentumDistribution(P[i], params.hbar_eff, 0.0, beta_resolved=False)
        for i, n in enumerate(kicks) if n in wanted
    }
    series = ObservableSeries(kicks, energies.mean(axis=0), np.sum(P**2, axis=1), snaps)
    return EnsembleResult(
        params=params.replace(grid_size=D),
        series=series,
        final_distribution=snaps[schedule.n_kicks],
        member_energies=energies,
        member_k=ks,
        cloud=sample,
        grid_size=D,
    )


@dataclass(eq=False)
class SweepResult:
    M_values: list
    results: dict

    def table(self):
        """Energy table: first column kick, then one column per M."""
        first = self.results[self.M_values[0]].series
        cols = [first.kick_index] + [self.results[M].series.energy for M in self.M_values]
        return np.column_stack(cols)


def sweep_M(params: SimParams, M_list, cloud: CloudSpec, noise: NoiseSpec, record_every=1,
            **kw) -> SweepResult:
    """run_ensemble for each M in `M_list` (MAKR) with shared cloud and noise seeds."""
    M_list = list(M_list)
    for M in M_list:
        if params.n_kicks % M:
            raise InvalidParameter(f"M={M} does not divide n_kicks={params.n_kicks}")
    results = {
        M: run_ensemble(params.replace(M=M, mode=Mode.MAKR), cloud, noise, record_every, **kw)
        for M in M_list
    }
    return SweepResult(M_list, results)


def mean_at(result: EnsembleResult, kick):
    return result.series.at(kick)[0]


def distribution_table(dist: MomentumDistribution):
    m = momenta(dist.grid_size)
    return np.column_stack([m, dist.hbar_eff * (m + dist.beta), dist.probs])
