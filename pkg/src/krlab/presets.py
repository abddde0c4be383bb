"""
Figure presets.  Each preset returns a mapping of output file stem to a
table (header, rows); the CLI writes each table as CSV.

Physics is fixed per preset (K = 5, hbar_eff = 1 unless stated); ensemble
size, noise, seeds, grid and record interval come from the run config.
"""
from __future__ import annotations

from .classical import poincare_section
from .ensemble import run_ensemble
from .model import Mode, SimParams
from .quantum import momenta

K_FIG = 5.0
HBAR_FIG = 1.0

ENERGY_HEADER = ("kick", "mean_energy", "ipr")
DIST_HEADER = ("m", "p_momentum", "prob")
POINCARE_HEADER = ("orbit_id", "step", "x", "p_fold")


def energy_rows(series):
    return [(int(n), float(e), float(i)) for n, e, i in
            zip(series.kick_index, series.energy, series.ipr)]


def distribution_rows(dist):
    m = momenta(dist.grid_size)
    p = dist.hbar_eff * (m + dist.beta)
    return [(int(a), float(b), float(c)) for a, b, c in zip(m, p, dist.probs)]


def poincare_rows(sec):
    return [(int(o), int(s), float(x), float(p)) for o, s, x, p in
            zip(sec.orbit_id, sec.step, sec.x, sec.p_fold)]


def _params(cfg, mode, M, n_kicks, hbar=HBAR_FIG):
    return SimParams.from_K(K_FIG, hbar, M=M, mode=mode, n_kicks=n_kicks,
                            grid_size=cfg.params.grid_size)


def _ensemble(cfg, params):
    return run_ensemble(params, cfg.cloud, cfg.noise, cfg.record_every)


def _makr_runs(cfg, n_kicks, hbar=HBAR_FIG):
    runs = {"KR": _ensemble(cfg, _params(cfg, Mode.KR, 1, n_kicks, hbar))}
    for M in cfg.run["M_list"]:
        runs[f"M{M}"] = _ensemble(cfg, _params(cfg, Mode.MAKR, M, n_kicks, hbar))
    return runs


def figure1(cfg):
    """Poincare sections at K = 5 for the standard map and M = 2, 3."""
    out = {}
    for M in (0, 2, 3):
        sec = poincare_section(K_FIG, M, cfg.run["n_orbits"], cfg.run["n_steps"], seed=cfg.cloud.seed)
        out[f"fig1_M{M}_poincare"] = (POINCARE_HEADER, poincare_rows(sec))
    return out


def figure2(cfg):
    """KR against sign-flipped MKR (M = 2): energy growth and final distributions."""
    n = cfg.run["kicks"] or 1000
    out = {}
    for label, mode, M in (("KR", Mode.KR, 1), ("MKR2", Mode.MKR, 2)):
        res = _ensemble(cfg, _params(cfg, mode, M, n))
        out[f"fig2_{label}_energy"] = (ENERGY_HEADER, energy_rows(res.series))
        out[f"fig2_{label}_distribution"] = (DIST_HEADER, distribution_rows(res.final_distribution))
    return out


def figure3(cfg):
    """Mean energy against kick number for KR and MAKR with each M in run.M_list."""
    n = cfg.run["kicks"] or 60
    return {f"fig3_{label}_energy": (ENERGY_HEADER, energy_rows(res.series))
            for label, res in _makr_runs(cfg, n).items()}


def figure4(cfg):
    """Final averaged momentum distributions for KR and MAKR."""
    n = cfg.run["kicks"] or 60
    return {f"fig4_{label}_distribution": (DIST_HEADER, distribution_rows(res.final_distribution))
            for label, res in _makr_runs(cfg, n).items()}


def figure5(cfg):
    """IPR of the averaged final distribution against M for each hbar_eff (M = 0 is KR)."""
    n = cfg.run["kicks"] or 60
    rows = []
    for hbar in cfg.run["hbar_list"]:
        for label, res in _makr_runs(cfg, n, hbar).items():
            M = 0 if label == "KR" else int(label[1:])
            rows.append((float(hbar), M, float(res.series.ipr[-1])))
    return {"fig5_ipr": (("hbar_eff", "M", "ipr"), rows)}


FIGURES = {1: figure1, 2: figure2, 3: figure3, 4: figure4, 5: figure5}

