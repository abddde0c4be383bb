import numpy as np
import pytest

from krlab.ensemble import (
    CloudSpec, NoiseSpec, _split_momentum, run_ensemble, sample_cloud, sample_kicks, sweep_M,
)
from krlab.errors import InvalidParameter
from krlab.model import Mode, SimParams, build_schedule
from krlab.quantum import evolve, make_initial


def kr(n=40, grid=1024, **kw):
    return SimParams.from_K(5.0, 1.0, n_kicks=n, grid_size=grid, **kw)


def test_sample_cloud_deterministic():
    a = sample_cloud(CloudSpec(2.0, 500, seed=3), 1.0, 1024)
    b = sample_cloud(CloudSpec(2.0, 500, seed=3), 1.0, 1024)
    assert np.array_equal(a.m0, b.m0) and np.array_equal(a.beta, b.beta)
    c = sample_cloud(CloudSpec(2.0, 500, seed=4), 1.0, 1024)
    assert not np.array_equal(a.beta, c.beta)


def test_sample_cloud_moments():
    hbar, w = 0.7, 2.5
    s = sample_cloud(CloudSpec(w, 100_000, seed=1), hbar, 2048)
    p = hbar * (s.m0 + s.beta)
    assert np.var(p) == pytest.approx((w * hbar) ** 2, rel=0.02)
    assert np.all((s.beta >= 0) & (s.beta < 1))


def test_sample_cloud_narrow_limit():
    s = sample_cloud(CloudSpec(1e-14, 10, seed=0), 1.0, 256)
    assert np.all(s.m0 == 0) and np.all(s.beta == 0)


def test_split_momentum_snaps():
    m0, beta = _split_momentum(np.array([2.0 - 1e-14, -0.25, 3.5, -1e-13]))
    assert m0.tolist() == [2, -1, 3, 0]
    assert beta.tolist() == [0.0, 0.75, 0.5, 0.0]


def test_noise_spec_bounds():
    with pytest.raises(InvalidParameter):
        NoiseSpec(-0.1)
    with pytest.raises(InvalidParameter):
        NoiseSpec(0.5)
    assert np.all(sample_kicks(5.0, NoiseSpec(0.0), 4) == 5.0)
    ks = sample_kicks(5.0, NoiseSpec(0.1, seed=2), 50_000)
    assert np.std(ks / 5.0 - 1) == pytest.approx(0.1, rel=0.02)


def test_single_member_matches_evolve():
    p = kr(30, 512)
    cloud = CloudSpec(1.5, 1, seed=7)
    res = run_ensemble(p, cloud, NoiseSpec())
    s = res.cloud
    psi0 = make_initial(m0=int(s.m0[0]), beta=float(s.beta[0]), grid_size=512)
    psi, series = evolve(psi0, build_schedule(p), p)
    assert np.max(np.abs(res.series.energy - series.energy)) < 1e-10
    assert np.max(np.abs(res.final_distribution.probs - psi.probabilities)) < 1e-12


def test_average_is_member_mean():
    res = run_ensemble(kr(20, 512), CloudSpec(2.0, 60, seed=1), NoiseSpec(0.1, seed=2))
    assert np.max(np.abs(res.series.energy - res.member_energies.mean(axis=0))) < 1e-12
    assert res.member_energies.shape == (60, 21)
    assert res.final_distribution.probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_worker_count_does_not_change_bits():
    p = kr(25, 512, M=5, mode=Mode.MAKR)
    cloud, noise = CloudSpec(2.0, 80, seed=3), NoiseSpec(0.1, seed=4)
    a = run_ensemble(p, cloud, noise, workers=1)
    b = run_ensemble(p, cloud, noise, workers=4)
    assert np.array_equal(a.series.energy, b.series.energy)
    assert np.array_equal(a.series.ipr, b.series.ipr)
    assert np.array_equal(a.final_distribution.probs, b.final_distribution.probs)


def test_record_every():
    res = run_ensemble(kr(20, 512), CloudSpec(2.0, 10), NoiseSpec(), record_every=6)
    assert res.series.kick_index.tolist() == [0, 6, 12, 18, 20]


def test_sweep_with_M_equal_N_is_kr():
    N = 20
    cloud, noise = CloudSpec(2.0, 30, seed=5), NoiseSpec(0.1, seed=6)
    sw = sweep_M(kr(N, 512), [N], cloud, noise)
    ref = run_ensemble(kr(N, 512), cloud, noise)
    assert np.array_equal(sw.results[N].series.energy, ref.series.energy)


def test_sweep_rejects_non_divisor():
    with pytest.raises(InvalidParameter):
        sweep_M(kr(20, 512), [3], CloudSpec(), NoiseSpec())


def test_sweep_shared_seeds_repeatable():
    cloud, noise = CloudSpec(2.0, 30, seed=5), NoiseSpec(0.1, seed=6)
    a = sweep_M(kr(12, 512), [2, 3], cloud, noise)
    b = sweep_M(kr(12, 512), [2, 3], cloud, noise)
    assert np.array_equal(a.table(), b.table())
    assert a.table().shape == (13, 3)


@pytest.mark.slow
def test_makr_m2_exceeds_kr_saturation():
    cloud, noise = CloudSpec(2.0, 100, seed=0), NoiseSpec(0.1, seed=1)
    E_kr = run_ensemble(kr(60, 2048), cloud, noise).series.energy[-1]
    E_m2 = run_ensemble(kr(60, 2048, M=2, mode=Mode.MAKR), cloud, noise).series.energy[-1]
    assert E_m2 > 1.5 * E_kr


def test_m1_cloud_grows_linearly():
    p = kr(60, 2048, M=1, mode=Mode.MAKR)
    res = run_ensemble(p, CloudSpec(2.0, 200, seed=0), NoiseSpec())
    n, E = res.series.kick_index, res.series.energy
    sel = n >= 5
    slope, icpt = np.polyfit(n[sel], E[sel], 1)
    r2 = 1 - np.sum((E[sel] - (slope * n[sel] + icpt)) ** 2) / np.sum((E[sel] - E[sel].mean()) ** 2)
    assert slope > 0 and r2 > 0.95
