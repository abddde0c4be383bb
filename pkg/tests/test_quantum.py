import math

import numpy as np
import pytest
from scipy.special import jv

from krlab.errors import GridTooSmall, InvalidParameter
from krlab.model import Gap, KickSchedule, Mode, SimParams, build_schedule, half_talbot_ratio
from krlab.observables import mean_energy
from krlab.quantum import (
    MomentumWavefunction, apply_free, apply_kick, evolve, make_initial, momenta,
    translate_pi, translate_pi_inverse,
)


def random_state(D=256, beta=0.0, hbar=1.0, width=None, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=D) + 1j * rng.normal(size=D)
    width = D // 4 if width is None else width
    a[np.abs(momenta(D)) > width] = 0
    return MomentumWavefunction(a / np.linalg.norm(a), beta, hbar)


def dense_kick(D, k, sign=1):
    """Kick operator built element by element in the momentum basis."""
    m = momenta(D)
    x = 2 * np.pi * np.arange(D) / D
    F = np.exp(1j * np.outer(x, m)) / np.sqrt(D)
    return F.conj().T @ np.diag(np.exp(-1j * sign * k * np.cos(x))) @ F


def test_kick_zero_is_identity():
    psi = random_state()
    out = apply_kick(psi, 0.0)
    assert np.max(np.abs(out.amps - psi.amps)) < 1e-14


def test_kick_matches_dense_operator():
    psi = random_state(D=128, width=20)
    for sign in (1, -1):
        ref = dense_kick(128, 1.7, sign) @ psi.amps
        assert np.max(np.abs(apply_kick(psi, 1.7, sign).amps - ref)) < 1e-12


def test_kick_bessel_populations_k2():
    psi = apply_kick(make_initial(grid_size=512), 2.0)
    P = psi.probabilities
    for n in range(-6, 7):
        assert P[n + 256] == pytest.approx(jv(n, 2.0) ** 2, abs=1e-13)
    assert P[256] == pytest.approx(0.0501, abs=1e-4)
    assert P[257] == pytest.approx(0.3326, abs=1e-4)
    assert P[258] == pytest.approx(0.1245, abs=1e-4)


def test_sign_flip_is_translation_conjugate():
    psi = random_state(D=512, width=60)
    lhs = apply_kick(psi, 5.0, -1)
    rhs = translate_pi(apply_kick(translate_pi_inverse(psi), 5.0, +1))
    assert np.linalg.norm(lhs.amps - rhs.amps) < 1e-10


def test_free_zero_duration_identity():
    psi = random_state()
    assert np.array_equal(apply_free(psi, 0.0).amps, psi.amps)


@pytest.mark.parametrize("hbar", [1.0, 0.5, 0.7, 2.3])
def test_half_talbot_is_translation(hbar):
    psi = random_state(D=2048, hbar=hbar, width=900)
    moved = apply_free(psi, half_talbot_ratio(hbar))
    # alternating signs (-1)^m are exactly the pi shift
    expected = psi.amps * (-1.0) ** np.abs(momenta(2048))
    assert np.linalg.norm(moved.amps - expected) < 1e-10
    assert np.linalg.norm(moved.amps - translate_pi(psi).amps) < 1e-10


def test_half_talbot_not_translation_at_half_beta():
    psi = random_state(D=256, beta=0.5)
    moved = apply_free(psi, half_talbot_ratio(1.0))
    shifted = translate_pi(psi)
    assert abs(moved.overlap(shifted)) < 1 - 1e-3


def test_free_phase_formula():
    psi = random_state(D=128, beta=0.3, hbar=0.8)
    r = 1.37
    expected = psi.amps * np.exp(-1j * 0.8 * r * (momenta(128) + 0.3) ** 2 / 2)
    assert np.max(np.abs(apply_free(psi, r).amps - expected)) < 1e-12


def test_free_evolution_invisible_in_momentum():
    psi = random_state(D=512, beta=0.21, hbar=0.6)
    for r in (1.0, half_talbot_ratio(0.6), 0.123):
        out = apply_free(psi, r)
        assert np.max(np.abs(out.probabilities - psi.probabilities)) < 1e-14
        assert mean_energy(out) == pytest.approx(mean_energy(psi), rel=1e-13)


def test_free_rejects_negative_duration():
    with pytest.raises(InvalidParameter):
        apply_free(random_state(), -1.0)


def test_kick_on_small_grid_raises():
    with pytest.raises(GridTooSmall):
        apply_kick(make_initial(grid_size=64), 40.0)


def test_make_initial_plane_wave():
    psi = make_initial(grid_size=128)
    assert np.count_nonzero(psi.amps) == 1 and psi.amps[64] == 1
    psi3 = make_initial(m0=3, grid_size=128, hbar_eff=0.7)
    assert mean_energy(psi3) == (3 * 0.7) ** 2 / 2


def test_make_initial_gaussian_energy():
    hbar = 0.8
    sigma = 2 * hbar
    psi = make_initial("gaussian", sigma_p=sigma, grid_size=512, hbar_eff=hbar)
    p = hbar * momenta(512)
    w = np.exp(-p**2 / (2 * sigma**2))
    oracle = np.sum(w * p**2 / 2) / np.sum(w)
    assert mean_energy(psi) == pytest.approx(oracle, rel=1e-12)
    assert mean_energy(psi) == pytest.approx(sigma**2 / 2, rel=0.02)


def test_make_initial_gaussian_too_wide():
    with pytest.raises(GridTooSmall):
        make_initial("gaussian", sigma_p=30.0, grid_size=64)


def test_evolve_k0_is_identity():
    p = SimParams.from_k(0.0, 1.0, n_kicks=20, grid_size=256)
    psi0 = make_initial(m0=2, grid_size=256)
    psi, s = evolve(psi0, build_schedule(p), p)
    assert np.allclose(psi.probabilities, psi0.probabilities, atol=1e-15)
    assert np.allclose(s.energy, s.energy[0], rtol=1e-14)


def test_antiresonance_two_kicks():
    for k in (0.5, 3.0, 5.0):
        p = SimParams.from_k(k, 1.0, M=1, mode=Mode.MAKR, n_kicks=2, grid_size=256)
        psi0 = make_initial(grid_size=256)
        psi, _ = evolve(psi0, build_schedule(p), p)
        assert abs(abs(psi0.overlap(psi)) - 1) < 1e-10


def test_evolve_matches_manual_steps():
    p = SimParams.from_k(2.5, 0.9, M=3, mode=Mode.MAKR, n_kicks=9, grid_size=512)
    psi0 = make_initial(m0=1, beta=0.37, grid_size=512, hbar_eff=0.9)
    manual = psi0
    for sign, gap in build_schedule(p):
        manual = apply_kick(manual, 2.5, sign)
        if gap is Gap.T:
            manual = apply_free(manual, 1.0)
        elif gap is Gap.TD:
            manual = apply_free(manual, half_talbot_ratio(0.9))
    psi, s = evolve(psi0, build_schedule(p), p)
    assert np.max(np.abs(psi.amps - manual.amps)) < 1e-12
    assert s.energy[-1] == pytest.approx(mean_energy(manual), rel=1e-12)


def test_mkr_blocks_match_operator_product():
    # F_MKR = [F^-]^M [F^+]^M : M plus kicks then M minus kicks, each followed by T
    M = 2
    p = SimParams.from_k(4.0, 1.0, M=M, mode=Mode.MKR, n_kicks=2 * M, grid_size=256)
    psi0 = make_initial(grid_size=256)
    manual = psi0
    for sign in [1] * M + [-1] * M:
        manual = apply_free(apply_kick(manual, 4.0, sign), 1.0)
    psi, _ = evolve(psi0, build_schedule(p), p)
    # trailing free evolution is absent in evolve; momentum distributions agree
    assert np.max(np.abs(psi.probabilities - manual.probabilities)) < 1e-12


def test_grid_grows_when_needed():
    p = SimParams.from_k(5.0, 1.0, M=1, mode=Mode.MAKR, n_kicks=30, grid_size=64)
    psi0 = make_initial(beta=0.5, grid_size=64)   # resonant: ballistic growth
    psi, _ = evolve(psi0, build_schedule(p), p)
    assert psi.grid_size > 64
    assert psi.norm() == pytest.approx(1.0, abs=1e-10)
    assert psi.edge_occupancy() < 1e-8
    with pytest.raises(GridTooSmall):
        evolve(psi0, build_schedule(p), p, auto_grow=False)


def test_global_sign_irrelevance():
    N = 40
    p = SimParams.from_k(5.0, 1.0, n_kicks=N, grid_size=1024)
    plus = build_schedule(p)
    minus = KickSchedule(tuple((-1, g) for _, g in plus))
    psi0 = make_initial(grid_size=1024)
    _, s1 = evolve(psi0, plus, p, snapshot_at=range(N + 1))
    _, s2 = evolve(psi0, minus, p, snapshot_at=range(N + 1))
    for n in range(N + 1):
        assert np.max(np.abs(s1.snapshots[n].probs - s2.snapshots[n].probs)) < 1e-10


def test_unitarity_long_run():
    p = SimParams.from_K(5.0, 1.0, n_kicks=1000, grid_size=2048)
    psi, _ = evolve(make_initial(grid_size=2048), build_schedule(p), p, auto_grow=False)
    assert abs(psi.norm() - 1) < 1e-10
    assert psi.edge_occupancy() < 1e-8


def test_early_time_quantum_classical_correspondence():
    from krlab.classical import ClassicalEnsemble, classical_mean_energy

    hbar, K, n = 0.25, 5.0, 5
    p = SimParams.from_K(K, hbar, n_kicks=n, grid_size=2048)
    _, s = evolve(make_initial(grid_size=2048, hbar_eff=hbar), build_schedule(p), p)
    q_rate = np.polyfit(s.kick_index, s.energy, 1)[0]
    rng = np.random.default_rng(1)
    ens = ClassicalEnsemble(rng.uniform(0, 2 * math.pi, 200_000), np.zeros(200_000))
    E = classical_mean_energy(ens, K, 0, n).energy
    c_rate = np.polyfit(np.arange(n + 1), E, 1)[0]
    assert q_rate == pytest.approx(c_rate, rel=0.2)
