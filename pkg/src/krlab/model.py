"""
Dimensionless parameters, kick schedules and unit conversion for the
kicked rotor family.

Three kick sequences are supported:

    KR    every kick has the same sign, every gap lasts T
    MKR   the kick sign flips after every M kicks (+ for floor(n/M) even)
    MAKR  all kicks positive, but after every M-th kick the free evolution
          lasts T_d = 2*pi*T/hbar_eff (half the Talbot time) instead of T

Times are measured in units of the kick period T, so a gap of T has
duration ratio 1 and a T_d gap has ratio 2*pi/hbar_eff.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

from .errors import InvalidParameter, InvalidSchedule

MIN_GRID = 64
MAX_GRID = 2**16
DEFAULT_GRID = 2048


class Mode(str, Enum):
    KR = "KR"
    MKR = "MKR"
    MAKR = "MAKR"


class Gap(str, Enum):
    T = "T"
    TD = "Td"
    NONE = "None"


def _is_power_of_two(n):
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SimParams:
    """Dimensionless physics parameters of one simulation.

    K (classical chaos parameter), k (quantum kick strength) and hbar_eff
    are stored redundantly and must satisfy K = k * hbar_eff.  Use
    :meth:`from_k` or :meth:`from_K` to build a consistent triple.
    """

    K: float
    k: float
    hbar_eff: float
    M: int = 1
    mode: Mode = Mode.KR
    n_kicks: int = 60
    grid_size: int = DEFAULT_GRID

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not self.hbar_eff > 0:
            raise InvalidParameter(f"hbar_eff must be > 0, got {self.hbar_eff}")
        if not math.isfinite(self.K) or not math.isfinite(self.k):
            raise InvalidParameter("K and k must be finite")
        if abs(self.K - self.k * self.hbar_eff) > 1e-12 * max(1.0, abs(self.K)):
            raise InvalidParameter(
                f"inconsistent kick strength: K={self.K} but k*hbar_eff={self.k * self.hbar_eff}"
            )
        if int(self.M) != self.M or self.M < 1:
            raise InvalidParameter(f"M must be an integer >= 1, got {self.M}")
        if int(self.n_kicks) != self.n_kicks or self.n_kicks < 1:
            raise InvalidParameter(f"n_kicks must be an integer >= 1, got {self.n_kicks}")
        if not _is_power_of_two(self.grid_size) or self.grid_size < MIN_GRID:
            raise InvalidParameter(
                f"grid_size must be a power of two >= {MIN_GRID}, got {self.grid_size}"
            )

    @classmethod
    def from_k(cls, k, hbar_eff, **kw):
        return cls(K=k * hbar_eff, k=k, hbar_eff=hbar_eff, **kw)

    @classmethod
    def from_K(cls, K, hbar_eff, **kw):
        return cls(K=K, k=K / hbar_eff, hbar_eff=hbar_eff, **kw)

    def replace(self, **changes):
        """Copy with changes; K is recomputed from k unless given explicitly."""
        d = dict(
            k=self.k, hbar_eff=self.hbar_eff, M=self.M, mode=self.mode,
            n_kicks=self.n_kicks, grid_size=self.grid_size,
        )
        K = changes.pop("K", None)
        d.update(changes)
        if K is not None:
            d["k"] = K / d["hbar_eff"]
        return SimParams.from_k(**d)

    @property
    def talbot_ratio(self):
        """Duration of a T_d gap in units of T."""
        return half_talbot_ratio(self.hbar_eff)


def half_talbot_ratio(hbar_eff):
    return 2.0 * math.pi / hbar_eff


@dataclass(frozen=True)
class KickSchedule:
    """Ordered (sign, following gap) pairs; the last gap is always Gap.NONE."""

    entries: tuple = field(default_factory=tuple)

    def __post_init__(self):
        entries = tuple((int(s), Gap(g)) for s, g in self.entries)
        if not entries:
            raise InvalidSchedule("schedule must contain at least one kick")
        for i, (s, g) in enumerate(entries):
            if s not in (1, -1):
                raise InvalidSchedule(f"kick {i}: sign must be +1 or -1, got {s}")
            last = i == len(entries) - 1
            if (g is Gap.NONE) != last:
                raise InvalidSchedule("exactly the final kick must carry the NONE gap")
        object.__setattr__(self, "entries", entries)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def n_kicks(self):
        return len(self.entries)

    @property
    def signs(self):
        return [s for s, _ in self.entries]

    @property
    def gaps(self):
        return [g for _, g in self.entries]


def sign_at(n, M):
    """Sign of kick number n (0-based) when the sign flips every M kicks."""
    if M < 1:
        raise InvalidParameter(f"M must be >= 1, got {M}")
    if n < 0:
        raise InvalidParameter(f"kick index must be >= 0, got {n}")
    return 1 if (n // M) % 2 == 0 else -1


def build_schedule(params: SimParams) -> KickSchedule:
    N, M = params.n_kicks, params.M
    if params.mode is Mode.KR:
        entries = [(1, Gap.T)] * N
    elif params.mode is Mode.MKR:
        entries = [(sign_at(n, M), Gap.T) for n in range(N)]
    else:
        if N % M:
            raise InvalidSchedule(f"MAKR needs n_kicks divisible by M (N={N}, M={M})")
        entries = [(1, Gap.TD if (n + 1) % M == 0 else Gap.T) for n in range(N)]
    entries[-1] = (entries[-1][0], Gap.NONE)
    return KickSchedule(tuple(entries))


class GapCounts(NamedTuple):
    n_T: int
    n_Td: int


def count_gaps(schedule: KickSchedule) -> GapCounts:
    """Numbers of localizing (T) and diffusing (T_d) free-evolution phases."""
    gaps = schedule.gaps
    return GapCounts(gaps.count(Gap.T), gaps.count(Gap.TD))


@dataclass(frozen=True)
class PhysicalParams:
    """Laboratory parameters of an atom-optics kicked rotor (SI units).

    Frequencies are angular (rad/s).
    """

    lattice_wavenumber: float
    atom_mass: float
    recoil_frequency: float
    pulse_period: float
    rabi_frequency: float
    detuning: float
    pulse_duration: float

    def __post_init__(self):
        for name in ("lattice_wavenumber", "atom_mass", "recoil_frequency",
                     "pulse_period", "rabi_frequency", "pulse_duration"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidParameter(f"{name} must be positive, got {v}")
        # zero detuning is reported by the conversion itself
        if self.detuning < 0 or not math.isfinite(self.detuning):
            raise InvalidParameter(f"detuning must be positive, got {self.detuning}")
        if self.pulse_duration / self.pulse_period > 0.01:
            warnings.warn(
                f"pulse_duration/pulse_period = {self.pulse_duration / self.pulse_period:.3g} "
                "> 0.01; delta-kick approximation is questionable",
                RuntimeWarning,
                stacklevel=3,
            )


class Dimensionless(NamedTuple):
    K: float
    k: float
    hbar_eff: float


def physical_to_dimensionless(phys: PhysicalParams) -> Dimensionless:
    """hbar_eff = 8 w_r T and k = Omega^2 tau / (8 Delta); K = k hbar_eff.

    The light shift hbar*Omega^2/(8 Delta) is an energy; dividing by hbar to
    get a phase per unit time leaves k = Omega^2 tau / (8 Delta).
    """
    if phys.detuning == 0:
        raise ZeroDivisionError("detuning is zero; kick strength is undefined")
    hbar_eff = 8.0 * phys.recoil_frequency * phys.pulse_period
    k = phys.rabi_frequency**2 * phys.pulse_duration / (8.0 * phys.detuning)
    return Dimensionless(K=k * hbar_eff, k=k, hbar_eff=hbar_eff)


def dimensionless_to_physical(k, hbar_eff, template: PhysicalParams) -> PhysicalParams:
    """Inverse of :func:`physical_to_dimensionless`.

    Solves for the pulse period and Rabi frequency; the remaining fields
    are copied from `template`.
    """
    if k < 0 or hbar_eff <= 0:
        raise InvalidParameter("need k >= 0 and hbar_eff > 0")
    T = hbar_eff / (8.0 * template.recoil_frequency)
    rabi = math.sqrt(8.0 * template.detuning * k / template.pulse_duration)
    return PhysicalParams(
        lattice_wavenumber=template.lattice_wavenumber,
        atom_mass=template.atom_mass,
        recoil_frequency=template.recoil_frequency,
        pulse_period=T,
        rabi_frequency=rabi,
        detuning=template.detuning,
        pulse_duration=template.pulse_duration,
    )
