"""Raman-Nath check of the kick operator against Bessel-function populations."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.special import jv

from .quantum import apply_kick, make_initial


class BesselCalibration(NamedTuple):
    n: np.ndarray
    populations: np.ndarray
    bessel: np.ndarray

    @property
    def abs_diff(self):
        return np.abs(self.populations - self.bessel)

    @property
    def max_diff(self):
        return float(self.abs_diff.max())


def calibrate_bessel(k, n_max=20, grid_size=2048):
    """Populations of |n> after one kick of strength k on |0>, next to J_n(k)^2."""
    psi = apply_kick(make_initial("plane_wave", grid_size=grid_size), k)
    n = np.arange(-n_max, n_max + 1)
    P = psi.probabilities[n + grid_size // 2]
    return BesselCalibration(n, P, jv(n, k) ** 2)
