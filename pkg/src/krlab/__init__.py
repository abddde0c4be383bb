"""Quantum and classical kicked rotor simulations, including sign-flipped (MKR)
and half-Talbot-delayed (MAKR) kick sequences."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    Gap, KickSchedule, Mode, PhysicalParams, SimParams,
    build_schedule, count_gaps, physical_to_dimensionless, sign_at,
)
from .quantum import (  # noqa: E402
    MomentumWavefunction, apply_free, apply_kick, evolve, make_initial,
)
from .observables import (  # noqa: E402
    MomentumDistribution, ObservableSeries, estimate_break_time,
    fit_localization_length, ipr, mean_energy,
)
from .ensemble import CloudSpec, NoiseSpec, run_ensemble, sample_cloud, sweep_M  # noqa: E402
