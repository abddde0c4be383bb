"""
Split-operator evolution of momentum-space wavefunctions.

A state is a vector of amplitudes A_m on the integer momentum lattice
m = -D/2 .. D/2-1 (stored in natural, centered order) together with a
quasimomentum beta in [0, 1), so the physical momentum of component m is
p = hbar_eff * (m + beta).  Kicks are diagonal on the position grid
x_j = 2 pi j / D and conserve beta; free evolution is diagonal in m.

Conventions (applied everywhere):

    kick   A -> F^-1 [ exp(-i s k cos x_j) F A ]
    free   A_m -> A_m exp(-i hbar_eff r (m + beta)^2 / 2)

where s is the kick sign and r the gap duration in units of T.  Both FFT
directions use unitary ("ortho") normalization.

The batched routines accept amplitude arrays of shape (B, D) with one row
per ensemble member; the single-state API is a thin wrapper over them.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridTooSmall, InvalidParameter
from .model import MAX_GRID, Gap, KickSchedule, SimParams, half_talbot_ratio

log = logging.getLogger(__name__)

EDGE_TOL = 1e-8
EDGE_FRACTION = 0.05


def momenta(D):
    """Integer momentum labels of a grid of size D in storage order."""
    return np.arange(D) - D // 2


def edge_width(D):
    """Number of grid points on each side counted as the edge (5% in total)."""
    return max(1, int(round(EDGE_FRACTION * D / 2)))


def edge_occupancy(amps):
    """Probability in the outer 5% of the momentum grid (per row for 2-D input)."""
    P = np.abs(amps) ** 2
    w = edge_width(amps.shape[-1])
    return P[..., :w].sum(axis=-1) + P[..., -w:].sum(axis=-1)


@dataclass(frozen=True, eq=False)
class MomentumWavefunction:
    amps: np.ndarray
    beta: float = 0.0
    hbar_eff: float = 1.0

    def __post_init__(self):
        a = np.asarray(self.amps, dtype=complex)
        if a.ndim != 1:
            raise InvalidParameter("amps must be one-dimensional")
        D = a.size
        if D < 2 or D & (D - 1):
            raise InvalidParameter(f"grid size must be a power of two, got {D}")
        if not 0.0 <= self.beta < 1.0:
            raise InvalidParameter(f"beta must lie in [0, 1), got {self.beta}")
        if not self.hbar_eff > 0:
            raise InvalidParameter("hbar_eff must be positive")
        a.setflags(write=False)
        object.__setattr__(self, "amps", a)

    @property
    def grid_size(self):
        return self.amps.size

    @property
    def m(self):
        return momenta(self.grid_size)

    @property
    def p(self):
        return self.hbar_eff * (self.m + self.beta)

    @property
    def probabilities(self):
        return np.abs(self.amps) ** 2

    def norm(self):
        return float(np.sum(self.probabilities))

    def edge_occupancy(self):
        return float(edge_occupancy(self.amps))

    def with_amps(self, amps):
        return MomentumWavefunction(amps, self.beta, self.hbar_eff)

    def padded(self, D):
        """Same state embedded in a larger grid (zero amplitudes outside)."""
        return self.with_amps(pad_grid(self.amps, D))

    def overlap(self, other):
        return complex(np.vdot(self.amps, other.amps))


def pad_grid(amps, D):
    """Zero-pad centered amplitude rows to grid size D."""
    old = amps.shape[-1]
    if D < old:
        raise InvalidParameter("cannot shrink a grid")
    lo = D // 2 - old // 2
    out = np.zeros(amps.shape[:-1] + (D,), dtype=complex)
    out[..., lo:lo + old] = amps
    return out


def position_grid(D):
    return 2.0 * np.pi * np.arange(D) / D


def to_position(amps):
    """Periodic part u(x_j) = sum_m A_m exp(i m x_j) / sqrt(D)."""
    return np.fft.ifft(np.fft.ifftshift(amps, axes=-1), axis=-1, norm="ortho")


def to_momentum(u):
    return np.fft.fftshift(np.fft.fft(u, axis=-1, norm="ortho"), axes=-1)


def kick_factor(D, k, sign=1):
    """exp(-i sign k cos x_j); k may be an array of shape (B,) for a batch."""
    k = np.asarray(k, dtype=float)
    c = np.cos(position_grid(D))
    return np.exp(-1j * sign * k[..., None] * c)


def free_phase(D, beta, hbar_eff, duration_ratio):
    """Phase hbar_eff r (m + beta)^2 / 2 of the free propagator, reduced mod 2 pi.

    When hbar_eff r / 2 is an integer multiple q of pi (Talbot-type gaps)
    the m^2 term is evaluated in integer arithmetic, which keeps the
    half-Talbot phases exact even for |m| ~ 10^4.
    """
    m = momenta(D)
    beta = np.asarray(beta, dtype=float)[..., None]
    c = 0.5 * hbar_eff * duration_ratio
    q = round(c / math.pi)
    if q != 0 and abs(c / math.pi - q) < 1e-12:
        mi = m.astype(np.int64)
        quad = math.pi * ((q * mi * mi) % 2)
        lin = 2.0 * math.pi * np.mod(q * mi * beta, 1.0)
        return quad + lin + q * math.pi * beta**2
    return np.mod(c * (m + beta) ** 2, 2.0 * math.pi)


def free_factor(D, beta, hbar_eff, duration_ratio):
    return np.exp(-1j * free_phase(D, beta, hbar_eff, duration_ratio))


def gap_ratio(gap, hbar_eff):
    if gap is Gap.T:
        return 1.0
    if gap is Gap.TD:
        return half_talbot_ratio(hbar_eff)
    return 0.0


def _check_edge(amps, where):
    edge = edge_occupancy(amps)
    bad = np.flatnonzero(np.atleast_1d(edge) > EDGE_TOL)
    if bad.size:
        e = float(np.atleast_1d(edge)[bad[0]])
        raise GridTooSmall(
            f"edge occupancy {e:.3g} exceeds {EDGE_TOL:g} {where} (grid {amps.shape[-1]})",
            edge_occupancy=e,
            member=int(bad[0]),
        )


def apply_kick(psi: MomentumWavefunction, k, sign=1) -> MomentumWavefunction:
    """One delta kick exp(-i sign k cos x); raises GridTooSmall on edge spill."""
    if sign not in (1, -1):
        raise InvalidParameter("sign must be +1 or -1")
    D = psi.grid_size
    u = to_position(psi.amps) * kick_factor(D, k, sign)
    amps = to_momentum(u)
    _check_edge(amps, "after kick")
    return psi.with_amps(amps)


def apply_free(psi: MomentumWavefunction, duration_ratio) -> MomentumWavefunction:
    """Free evolution for duration_ratio * T; the momentum distribution is unchanged."""
    if duration_ratio < 0:
        raise InvalidParameter("duration must be non-negative")
    if duration_ratio == 0:
        return psi
    f = free_factor(psi.grid_size, psi.beta, psi.hbar_eff, duration_ratio)
    return psi.with_amps(psi.amps * f)


def translate_pi(psi: MomentumWavefunction) -> MomentumWavefunction:
    """Shift the periodic part of the state by pi on the position grid.

    Implemented as a roll by D/2 grid points in position space.  For beta
    != 0 the true wavefunction picks up an extra global phase exp(i pi beta),
    which is dropped here.
    """
    D = psi.grid_size
    u = to_position(psi.amps)
    return psi.with_amps(to_momentum(np.roll(u, -D // 2, axis=-1)))


def translate_pi_inverse(psi):
    D = psi.grid_size
    u = to_position(psi.amps)
    return psi.with_amps(to_momentum(np.roll(u, D // 2, axis=-1)))


def make_initial(kind="plane_wave", *, m0=0, sigma_p=None, beta=0.0,
                 grid_size=2048, hbar_eff=1.0) -> MomentumWavefunction:
    """Plane wave |m0> or a real Gaussian packet of momentum width sigma_p.

    sigma_p is a momentum (same units as p = hbar_eff (m + beta)).
    """
    D = grid_size
    m = momenta(D)
    amps = np.zeros(D, dtype=complex)
    if kind == "plane_wave":
        if not -D // 2 <= m0 < D // 2:
            raise GridTooSmall(f"m0={m0} lies outside a grid of size {D}")
        amps[m0 + D // 2] = 1.0
    elif kind == "gaussian":
        if sigma_p is None or not sigma_p > 0:
            raise InvalidParameter("gaussian packet needs sigma_p > 0")
        p = hbar_eff * (m - m0 + beta)
        amps[:] = np.exp(-(p**2) / (4.0 * sigma_p**2))
        amps /= np.linalg.norm(amps)
    else:
        raise InvalidParameter(f"unknown initial state kind {kind!r}")
    psi = MomentumWavefunction(amps, beta, hbar_eff)
    _check_edge(psi.amps, "in initial state")
    return psi


@dataclass
class BatchResult:
    """Raw output of :func:`evolve_batch`.

    energies and prob_sums have one row per recorded kick; prob_sums holds
    the member-summed momentum distribution (not yet divided by B) on the
    final grid.
    """

    amps: np.ndarray
    kicks: np.ndarray
    energies: np.ndarray
    prob_sums: np.ndarray
    snapshots: dict = field(default_factory=dict)

    @property
    def grid_size(self):
        return self.amps.shape[-1]


def _energies(amps, beta, hbar_eff):
    p = hbar_eff * (momenta(amps.shape[-1])[None, :] + beta[:, None])
    return np.sum(np.abs(amps) ** 2 * p**2, axis=-1) / 2.0


def evolve_batch(amps, beta, k, schedule: KickSchedule, hbar_eff, *,
                 record_every=1, snapshot_at=(), auto_grow=True,
                 max_grid=MAX_GRID) -> BatchResult:
    """Evolve B states (rows of `amps`) through `schedule`.

    Each row has its own quasimomentum beta[b] and kick strength k[b].
    Observables are recorded before the first kick (kick 0), after every
    `record_every` kicks and after the final kick.  When a kick pushes
    probability into the grid edge the step is redone on a grid twice as
    large, up to `max_grid`.
    """
    amps = np.array(amps, dtype=complex, ndmin=2)
    B, D = amps.shape
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (B,)).copy()
    k = np.broadcast_to(np.asarray(k, dtype=float), (B,)).copy()
    if np.any(k < 0):
        raise InvalidParameter("kick strength must be non-negative")
    if record_every < 1:
        raise InvalidParameter("record_every must be >= 1")
    N = schedule.n_kicks
    snapshot_at = set(snapshot_at)

    def factors(D):
        return (
            kick_factor(D, k),
            {g: free_factor(D, beta, hbar_eff, gap_ratio(g, hbar_eff)) for g in (Gap.T, Gap.TD)},
        )

    kick_f, free_f = factors(D)
    kicks, energies, probs, snaps = [], [], [], {}

    def record(n):
        P = np.abs(amps) ** 2
        kicks.append(n)
        energies.append(_energies(amps, beta, hbar_eff))
        probs.append(P.sum(axis=0))
        if n in snapshot_at:
            snaps[n] = P.copy()

    record(0)
    for n, (sign, gap) in enumerate(schedule, start=1):
        while True:
            f = kick_f if sign > 0 else kick_f.conj()
            new = to_momentum(to_position(amps) * f)
            edge = edge_occupancy(new)
            if np.all(edge <= EDGE_TOL):
                break
            if not auto_grow or D >= max_grid:
                bad = int(np.argmax(edge))
                raise GridTooSmall(
                    f"edge occupancy {edge[bad]:.3g} after kick {n} on grid {D}",
                    edge_occupancy=float(edge[bad]),
                    member=bad,
                )
            D *= 2
            log.info("growing grid to %d before kick %d", D, n)
            amps = pad_grid(amps, D)
            probs = [pad_grid(q, D).real for q in probs]
            snaps = {key: pad_grid(v, D).real for key, v in snaps.items()}
            kick_f, free_f = factors(D)
        amps = new
        if n % record_every == 0 or n == N:
            record(n)
        if gap is not Gap.NONE:
            amps = amps * free_f[gap]

    return BatchResult(
        amps=amps,
        kicks=np.array(kicks),
        energies=np.array(energies),
        prob_sums=np.array(probs),
        snapshots=snaps,
    )


def evolve(psi0: MomentumWavefunction, schedule: KickSchedule, params: SimParams,
           record_every=1, *, snapshot_at=(), auto_grow=True, k=None):
    """Evolve one wavefunction through `schedule`.

    Returns the final state and an ObservableSeries with mean energy and
    IPR at every recorded kick; snapshots of the momentum distribution are
    stored for kicks listed in `snapshot_at` and for the final kick.
    """
    from .observables import MomentumDistribution, ObservableSeries

    if schedule.n_kicks != params.n_kicks:
        raise InvalidParameter("schedule length does not match params.n_kicks")
    if abs(psi0.hbar_eff - params.hbar_eff) > 1e-15:
        raise InvalidParameter("initial state and params disagree on hbar_eff")
    res = evolve_batch(
        psi0.amps[None, :], [psi0.beta], params.k if k is None else k, schedule,
        params.hbar_eff, record_every=record_every,
        snapshot_at=set(snapshot_at) | {schedule.n_kicks}, auto_grow=auto_grow,
    )
    psi = MomentumWavefunction(res.amps[0], psi0.beta, psi0.hbar_eff)
    D = res.grid_size
    snaps = {
        n: MomentumDistribution(pad_grid(P, D).real[0], params.hbar_eff, psi0.beta)
        for n, P in res.snapshots.items()
    }
    ipr = np.sum(res.prob_sums**2, axis=-1)
    series = ObservableSeries(res.kicks, res.energies[:, 0], ipr, snaps)
    return psi, series
