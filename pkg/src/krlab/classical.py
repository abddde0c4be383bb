"""
Classical stroboscopic map of the (modified) kicked rotor.

One step is kick-then-drift,

    p' = p + s_n K sin(x)
    x' = x + p'  (mod 2 pi)

with s_n = +1 for the standard rotor (M = 0) and s_n = sign_at(n, M)
otherwise.  All routines work on whole arrays of orbits at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import InvalidInput, InvalidParameter
from .model import sign_at

TWO_PI = 2.0 * math.pi


class PhasePoint(NamedTuple):
    x: float
    p: float

    @property
    def p_fold(self):
        return self.p % TWO_PI


def kick_drift(x, p, K, sign=1):
    """Array form of one map step; K may be an array (one value per orbit)."""
    p = p + sign * K * np.sin(x)
    x = np.mod(x + p, TWO_PI)
    return x, p


def classical_step(pt: PhasePoint, K, sign=1) -> PhasePoint:
    if sign not in (1, -1):
        raise InvalidParameter("sign must be +1 or -1")
    x, p = kick_drift(pt.x, pt.p, K, sign)
    # mod can return exactly 2 pi for tiny negative x
    return PhasePoint(float(x) % TWO_PI, float(p))


def kick_signs(n_steps, M):
    """Signs of the first n_steps kicks; M = 0 is the standard rotor."""
    if M == 0:
        return np.ones(n_steps, dtype=int)
    return np.array([sign_at(n, M) for n in range(n_steps)], dtype=int)


@dataclass
class ClassicalEnsemble:
    x: np.ndarray
    p: np.ndarray
    rng_seed: int = 0
    step_count: int = 0

    def __post_init__(self):
        self.x = np.mod(np.asarray(self.x, dtype=float), TWO_PI)
        self.p = np.asarray(self.p, dtype=float)
        if self.x.shape != self.p.shape or self.x.ndim != 1:
            raise InvalidParameter("x and p must be 1-D arrays of equal length")

    def __len__(self):
        return self.x.size

    @property
    def points(self):
        return [PhasePoint(a, b) for a, b in zip(self.x.tolist(), self.p.tolist())]

    @classmethod
    def uniform(cls, n, seed=0, p_range=(0.0, TWO_PI)):
        rng = np.random.default_rng(seed)
        x = rng.uniform(0.0, TWO_PI, n)
        p = rng.uniform(p_range[0], p_range[1], n)
        return cls(x, p, seed)

    @classmethod
    def grid(cls, n_x, n_p=None, seed=None, p_range=(0.0, TWO_PI)):
        """Cell-centred grid on [0, 2pi) x p_range, optionally jittered within each cell."""
        n_p = n_x if n_p is None else n_p
        dx = TWO_PI / n_x
        dp = (p_range[1] - p_range[0]) / n_p
        X, P = np.meshgrid((np.arange(n_x) + 0.5) * dx, p_range[0] + (np.arange(n_p) + 0.5) * dp)
        x, p = X.ravel(), P.ravel()
        if seed is not None:
            rng = np.random.default_rng(seed)
            x = x + rng.uniform(-0.5, 0.5, x.size) * dx
            p = p + rng.uniform(-0.5, 0.5, p.size) * dp
        return cls(x, p, 0 if seed is None else seed)

    def evolve(self, K, M, n_steps, **kw):
        xs, ps = iterate(self.x, self.p, K, M, n_steps, **kw)
        return ClassicalEnsemble(xs[-1], ps[-1], self.rng_seed, self.step_count + n_steps)


def iterate(x, p, K, M, n_steps, *, K_jitter=0.0, jitter="per_kick", seed=0, start=0):
    """Trajectories of all orbits: arrays (n_steps + 1, n_orbits) of x and unfolded p.

    K_jitter is the relative standard deviation of K.  With jitter="frozen"
    each orbit keeps one perturbed K for its whole life; with "per_kick"
    a fresh value is drawn for every orbit at every kick.
    """
    x = np.mod(np.asarray(x, dtype=float), TWO_PI)
    p = np.asarray(p, dtype=float)
    signs = kick_signs(start + n_steps, M)[start:]
    rng = np.random.default_rng(seed)
    if jitter not in ("per_kick", "frozen"):
        raise InvalidParameter(f"unknown jitter mode {jitter!r}")
    Ks = K * (1.0 + K_jitter * rng.standard_normal(x.shape)) if K_jitter else K
    xs = np.empty((n_steps + 1,) + x.shape)
    ps = np.empty_like(xs)
    xs[0], ps[0] = x, p
    for n in range(n_steps):
        if K_jitter and jitter == "per_kick" and n:
            Ks = K * (1.0 + K_jitter * rng.standard_normal(x.shape))
        x, p = kick_drift(x, p, Ks, signs[n])
        xs[n + 1], ps[n + 1] = x, p
    return xs, ps


class PoincareSection(NamedTuple):
    orbit_id: np.ndarray
    step: np.ndarray
    x: np.ndarray
    p_fold: np.ndarray


def poincare_section(K, M, n_orbits, n_steps, seed=0) -> PoincareSection:
    """Point cloud (x, p mod 2pi) after every step of n_orbits orbits.

    Initial conditions sit on a uniform grid over [0, 2pi)^2 with random
    jitter inside each cell; M = 0 is the standard map.
    """
    if n_orbits < 1 or n_steps < 1:
        raise InvalidParameter("n_orbits and n_steps must be >= 1")
    side = math.ceil(math.sqrt(n_orbits))
    ens = ClassicalEnsemble.grid(side, seed=seed)
    x0, p0 = ens.x[:n_orbits], ens.p[:n_orbits]
    xs, ps = iterate(x0, p0, K, M, n_steps)
    steps = np.arange(1, n_steps + 1)
    return PoincareSection(
        orbit_id=np.tile(np.arange(n_orbits), n_steps),
        step=np.repeat(steps, n_orbits),
        x=xs[1:].ravel(),
        p_fold=np.mod(ps[1:], TWO_PI).ravel(),
    )


class ClassicalEnergy(NamedTuple):
    energy: np.ndarray      # <p^2/2> for steps 0 .. n_steps
    diffusion_rate: float   # slope of energy vs step over the second half


def classical_mean_energy(ens: ClassicalEnsemble, K, M, n_steps, **kw) -> ClassicalEnergy:
    if len(ens) == 0:
        raise InvalidParameter("ensemble is empty")
    _, ps = iterate(ens.x, ens.p, K, M, n_steps, **kw)
    E = np.mean(ps**2, axis=1) / 2.0
    n = np.arange(n_steps + 1)
    late = n >= n_steps // 2
    rate = np.polyfit(n[late], E[late], 1)[0] if late.sum() >= 2 else 0.0
    return ClassicalEnergy(E, float(rate))


class OrbitClass(str, Enum):
    BALLISTIC = "ballistic"
    BOUNDED = "bounded"
    DIFFUSIVE = "diffusive"


MIN_ORBIT = 50


def _linear_fit_stats(P):
    """Slope and R^2 of p_n against n for each column of P."""
    n = np.arange(P.shape[0], dtype=float)
    nc = n - n.mean()
    Pc = P - P.mean(axis=0)
    sxx = np.sum(nc**2)
    slope = nc @ Pc / sxx
    ss_tot = np.sum(Pc**2, axis=0)
    ss_res = ss_tot - slope**2 * sxx
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.where(ss_tot > 0, 1.0 - ss_res / ss_tot, 0.0)
    return slope, r2


def classify_orbits(P):
    """Vectorized detect_transporting over the columns of P (steps x orbits).

    Returns an array of OrbitClass values as plain strings.
    """
    P = np.asarray(P, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    if P.shape[0] < MIN_ORBIT:
        raise InvalidInput(f"orbit too short: {P.shape[0]} < {MIN_ORBIT} points")
    slope, r2 = _linear_fit_stats(P)
    ballistic = (np.abs(slope) > 0.5) & (r2 > 0.99)
    bounded = np.max(np.abs(P - P[0]), axis=0) < TWO_PI
    out = np.full(P.shape[1], OrbitClass.DIFFUSIVE.value)
    out[bounded] = OrbitClass.BOUNDED.value
    out[ballistic] = OrbitClass.BALLISTIC.value
    return out


def detect_transporting(orbit) -> OrbitClass:
    """Classify one orbit from its unfolded momenta.

    `orbit` is a sequence of PhasePoint or of plain momentum values.
    """
    p = [pt.p if isinstance(pt, PhasePoint) else pt for pt in orbit]
    return OrbitClass(classify_orbits(np.asarray(p, dtype=float))[0])


class TransportScan(NamedTuple):
    x0: np.ndarray
    p0: np.ndarray
    labels: np.ndarray
    momenta: np.ndarray   # unfolded p trajectories, (n_steps + 1, n_orbits)

    @property
    def ballistic(self):
        return self.labels == OrbitClass.BALLISTIC.value

    @property
    def ballistic_fraction(self):
        return float(np.mean(self.ballistic))


def scan_transporting(K, M, n_grid=100, n_steps=200, **kw) -> TransportScan:
    """Classify orbits launched from an n_grid x n_grid cell-centred grid on [0, 2pi)^2."""
    ens = ClassicalEnsemble.grid(n_grid)
    _, ps = iterate(ens.x, ens.p, K, M, n_steps, **kw)
    return TransportScan(ens.x, ens.p, classify_orbits(ps), ps)


def growth_exponent(energy, start=None):
    """Exponent a of <E>_n ~ n^a from a log-log fit over steps >= start (default: second half)."""
    E = np.asarray(energy, dtype=float)
    n = np.arange(E.size)
    start = E.size // 2 if start is None else start
    sel = (n >= max(start, 1)) & (E > 0)
    return float(np.polyfit(np.log(n[sel]), np.log(E[sel]), 1)[0])
