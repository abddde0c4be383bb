"""
Observables of momentum-space states: mean energy, inverse participation
ratio, exponential localization-length fits and break-time estimates.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import FitFailed, InvalidInput, InvalidParameter
from .quantum import MomentumWavefunction, momenta


@dataclass(frozen=True, eq=False)
class MomentumDistribution:
    """Probabilities over the centered momentum grid m = -D/2 .. D/2-1.

    For a single state (beta_resolved=True) component m sits at momentum
    hbar_eff (m + beta).  Ensemble averages mix members with different beta
    and are binned by the integer part m only (beta_resolved=False).
    """

    probs: np.ndarray
    hbar_eff: float = 1.0
    beta: float = 0.0
    beta_resolved: bool = True

    def __post_init__(self):
        P = np.asarray(self.probs, dtype=float)
        if P.ndim != 1:
            raise InvalidParameter("probs must be one-dimensional")
        if np.any(P < 0):
            raise InvalidParameter("probabilities must be non-negative")
        if abs(P.sum() - 1.0) > 1e-9:
            raise InvalidParameter(f"probabilities sum to {P.sum()!r}, not 1")
        P.setflags(write=False)
        object.__setattr__(self, "probs", P)

    @classmethod
    def from_state(cls, psi: MomentumWavefunction):
        return cls(psi.probabilities, psi.hbar_eff, psi.beta)

    @property
    def grid_size(self):
        return self.probs.size

    @property
    def m(self):
        return momenta(self.grid_size)

    @property
    def p(self):
        return self.hbar_eff * (self.m + self.beta)


@dataclass(eq=False)
class ObservableSeries:
    kick_index: np.ndarray
    energy: np.ndarray
    ipr: np.ndarray
    snapshots: dict = field(default_factory=dict)

    def __post_init__(self):
        self.kick_index = np.asarray(self.kick_index, dtype=int)
        self.energy = np.asarray(self.energy, dtype=float)
        self.ipr = np.asarray(self.ipr, dtype=float)
        n = len(self.kick_index)
        if len(self.energy) != n or len(self.ipr) != n:
            raise InvalidParameter("series columns must have equal length")
        if n > 1 and np.any(np.diff(self.kick_index) <= 0):
            raise InvalidParameter("kick_index must be strictly increasing")

    def __len__(self):
        return len(self.kick_index)

    def at(self, kick):
        i = int(np.searchsorted(self.kick_index, kick))
        if i == len(self) or self.kick_index[i] != kick:
            raise KeyError(f"kick {kick} was not recorded")
        return self.energy[i], self.ipr[i]


def _as_distribution(obj):
    if isinstance(obj, MomentumWavefunction):
        return MomentumDistribution.from_state(obj)
    return obj


def mean_energy(obj) -> float:
    """<p^2/2> with p = hbar_eff (m + beta)."""
    d = _as_distribution(obj)
    return float(np.sum(d.probs * d.p**2) / 2.0)


def ipr(obj) -> float:
    """Inverse participation ratio sum_m P(m)^2."""
    d = _as_distribution(obj)
    return float(np.sum(d.probs**2))


def participation_number(obj) -> float:
    return 1.0 / ipr(obj)


class LocalizationFit(NamedTuple):
    xi: float           # in momentum-grid states
    xi_p: float         # the same length in momentum units (xi * hbar_eff)
    residual: float     # RMS of log P about the fitted line
    n_points: int


def fit_localization_length(dist, *, exclude=1, floor=1e-12, window=None) -> LocalizationFit:
    """Least-squares fit of log P(m) = a - |m - m_peak| / xi over both wings.

    The central peak and `exclude` states on either side of it (3 states by
    default) are left out, as are points with P <= floor and, when
    `window` is given, points with |m - m_peak| > window.  A large
    residual means the profile is not exponential.
    """
    d = _as_distribution(dist)
    P = d.probs
    m = d.m
    peak = m[int(np.argmax(P))]
    dist_from_peak = np.abs(m - peak)
    mask = (dist_from_peak > exclude) & (P > floor)
    if window is not None:
        mask &= dist_from_peak <= window
    if mask.sum() < 20:
        raise FitFailed(f"only {int(mask.sum())} usable points for the localization fit")
    x = dist_from_peak[mask].astype(float)
    y = np.log(P[mask])
    slope, intercept = np.polyfit(x, y, 1)
    if slope >= 0:
        raise FitFailed("profile does not decay away from its peak")
    resid = y - (slope * x + intercept)
    xi = -1.0 / slope
    return LocalizationFit(xi, xi * d.hbar_eff, float(np.sqrt(np.mean(resid**2))), int(mask.sum()))


class BreakTime(NamedTuple):
    t_b: int | None
    E_sat: float
    localized: bool


def _slope(k, E):
    return np.polyfit(k.astype(float), E, 1)[0]


def estimate_break_time(series: ObservableSeries, *, window=10, initial=5, fraction=0.1) -> BreakTime:
    """Kick at which the energy growth stalls, and the saturated energy.

    t_b is the first kick n such that the least-squares slope of <E> over
    kicks [n, n + window) falls below `fraction` of the slope over the first
    `initial` kicks.  E_sat is the mean energy over the final quarter of
    the series.  When no window qualifies the result has localized=False
    and t_b=None.
    """
    k = np.asarray(series.kick_index)
    E = np.asarray(series.energy)
    if len(k) < 20:
        raise InvalidInput(f"need at least 20 records, got {len(k)}")
    first = k <= k[0] + initial
    s0 = _slope(k[first], E[first])
    if s0 <= 0:
        raise InvalidInput("energy does not grow initially; break time undefined")
    E_sat = float(np.mean(E[len(E) - len(E) // 4:]))
    for start in k:
        sel = (k >= start) & (k < start + window)
        if k[-1] < start + window - 1:
            break
        if sel.sum() >= 2 and _slope(k[sel], E[sel]) < fraction * s0:
            return BreakTime(int(start), E_sat, True)
    return BreakTime(None, E_sat, False)


def late_slope(series: ObservableSeries, n_last):
    sel = series.kick_index > series.kick_index[-1] - n_last
    return _slope(series.kick_index[sel], series.energy[sel])
