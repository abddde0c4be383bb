"""
Run configuration files.

Configs are TOML documents with the sections below; every key is
optional unless marked required.

    [params]   K or k (one required), hbar_eff (required), n_kicks (required),
               M, mode ("KR" | "MKR" | "MAKR"), grid_size
    [initial]  kind ("plane_wave" | "gaussian"), m0, sigma_p, beta
    [cloud]    sigma_p (alias w), n_members, seed
    [noise]    k_rel_sigma, seed
    [run]      record_every, M_list, n_orbits, n_steps, n_max, kicks, hbar_list, preset

Unknown sections or keys are errors.  Errors carry the line number of the
offending key when it can be located in the text.
"""
from __future__ import annotations

import copy
import math
import re
import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .ensemble import CloudSpec, NoiseSpec
from .errors import ConfigError, KrlabError
from .model import DEFAULT_GRID, Mode, SimParams, build_schedule

SCHEMA = {
    "params": {"K", "k", "hbar_eff", "M", "mode", "n_kicks", "grid_size"},
    "initial": {"kind", "m0", "sigma_p", "beta"},
    "cloud": {"sigma_p", "w", "n_members", "seed"},
    "noise": {"k_rel_sigma", "seed"},
    "run": {"record_every", "M_list", "n_orbits", "n_steps", "n_max", "kicks", "hbar_list", "preset"},
}

RUN_DEFAULTS = {
    "record_every": 1,
    "M_list": [2, 3, 4],
    "n_orbits": 100,
    "n_steps": 200,
    "n_max": 20,
    "kicks": None,
    "hbar_list": [0.5, 1.0],
    "preset": None,
}


@dataclass
class RunConfig:
    params: SimParams
    cloud: CloudSpec = field(default_factory=CloudSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    initial: dict = field(default_factory=lambda: {"kind": "plane_wave", "m0": 0, "beta": 0.0})
    run: dict = field(default_factory=lambda: dict(RUN_DEFAULTS))
    source: dict = field(default_factory=dict)

    @property
    def record_every(self):
        return self.run["record_every"]

    def to_dict(self):
        """Fully resolved configuration, suitable for a sidecar and for replay."""
        p = self.params
        return {
            "params": {
                "K": p.K, "k": p.k, "hbar_eff": p.hbar_eff, "M": p.M,
                "mode": p.mode.value, "n_kicks": p.n_kicks, "grid_size": p.grid_size,
            },
            "initial": dict(self.initial),
            "cloud": {"sigma_p": self.cloud.sigma_p, "n_members": self.cloud.n_members,
                      "seed": self.cloud.seed},
            "noise": {"k_rel_sigma": self.noise.k_rel_sigma, "seed": self.noise.seed},
            "run": {key: v for key, v in self.run.items() if v is not None},
        }


def _locate(text, section, key=None):
    if not text:
        return None
    current = None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"^\[\s*([A-Za-z0-9_-]+)\s*\]", s)
        if m:
            current = m.group(1)
            if key is None and current == section:
                return i
            continue
        if key is not None and current == section and re.match(rf"^{re.escape(key)}\s*=", s):
            return i
    return None


def _num(value, what, line, *, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{what} must be a number, got {value!r}", line)
    if integer and int(value) != value:
        raise ConfigError(f"{what} must be an integer, got {value!r}", line)
    if not math.isfinite(value):
        raise ConfigError(f"{what} must be finite", line)
    return int(value) if integer else float(value)


def parse_config(text) -> RunConfig:
    """Parse and validate TOML config text."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"malformed config: {exc}", int(m.group(1)) if m else None) from None
    return config_from_dict(data, text)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def config_from_dict(data, text=None, overrides=None) -> RunConfig:
    """Validate a nested dict; `overrides` maps (section, key) to a value."""
    data = copy.deepcopy(data)
    for (section, key), value in (overrides or {}).items():
        data.setdefault(section, {})[key] = value

    for section, body in data.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", _locate(text, section))
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table", _locate(text, section))
        for key in body:
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}", _locate(text, section, key))

    def where(section, key=None):
        return _locate(text, section, key)

    params = data.get("params")
    if params is None:
        raise ConfigError("missing required section [params]")
    for key in ("hbar_eff", "n_kicks"):
        if key not in params:
            raise ConfigError(f"missing required key params.{key}", where("params"))
    if "K" not in params and "k" not in params:
        raise ConfigError("missing required key params.K (or params.k)", where("params"))

    hbar = _num(params["hbar_eff"], "params.hbar_eff", where("params", "hbar_eff"))
    if hbar <= 0:
        raise ConfigError("params.hbar_eff must be > 0", where("params", "hbar_eff"))
    K = _num(params["K"], "params.K", where("params", "K")) if "K" in params else None
    k = _num(params["k"], "params.k", where("params", "k")) if "k" in params else None
    if K is not None and k is not None and abs(K - k * hbar) > 1e-12 * max(1.0, abs(K)):
        raise ConfigError(
            f"inconsistent kick strength: K={K} but k*hbar_eff={k * hbar}",
            where("params", "K") or where("params", "k"),
        )
    if k is None:
        k = K / hbar
    n_kicks = _num(params["n_kicks"], "params.n_kicks", where("params", "n_kicks"), integer=True)
    if n_kicks < 1:
        raise ConfigError(f"params.n_kicks must be >= 1, got {n_kicks}", where("params", "n_kicks"))
    M = _num(params.get("M", 1), "params.M", where("params", "M"), integer=True)
    try:
        mode = Mode(params.get("mode", "KR"))
    except ValueError:
        raise ConfigError("params.mode must be one of KR, MKR, MAKR", where("params", "mode")) from None
    grid = _num(params.get("grid_size", DEFAULT_GRID), "params.grid_size",
                where("params", "grid_size"), integer=True)
    try:
        sim = SimParams.from_k(k, hbar, M=M, mode=mode, n_kicks=n_kicks, grid_size=grid)
        build_schedule(sim)
    except KrlabError as exc:
        bad = next((key for key in ("n_kicks", "M", "grid_size") if key in str(exc)), None)
        raise ConfigError(str(exc), where("params", bad) if bad else where("params")) from None

    cloud_d = data.get("cloud", {})
    if "sigma_p" in cloud_d and "w" in cloud_d and cloud_d["sigma_p"] != cloud_d["w"]:
        raise ConfigError("cloud.sigma_p and cloud.w disagree", where("cloud", "w"))
    sigma_key = "w" if "w" in cloud_d else "sigma_p"
    sigma_p = _num(cloud_d.get(sigma_key, 2.0), f"cloud.{sigma_key}", where("cloud", sigma_key))
    n_members = _num(cloud_d.get("n_members", 200), "cloud.n_members",
                     where("cloud", "n_members"), integer=True)
    cloud_seed = _num(cloud_d.get("seed", 0), "cloud.seed", where("cloud", "seed"), integer=True)
    noise_d = data.get("noise", {})
    k_rel = _num(noise_d.get("k_rel_sigma", 0.0), "noise.k_rel_sigma", where("noise", "k_rel_sigma"))
    noise_seed = _num(noise_d.get("seed", 0), "noise.seed", where("noise", "seed"), integer=True)
    try:
        cloud = CloudSpec(sigma_p, n_members, cloud_seed)
    except KrlabError as exc:
        raise ConfigError(str(exc), where("cloud")) from None
    try:
        noise = NoiseSpec(k_rel, noise_seed)
    except KrlabError as exc:
        raise ConfigError(str(exc), where("noise", "k_rel_sigma")) from None

    init_d = data.get("initial", {})
    initial = {
        "kind": init_d.get("kind", "plane_wave"),
        "m0": _num(init_d.get("m0", 0), "initial.m0", where("initial", "m0"), integer=True),
        "beta": _num(init_d.get("beta", 0.0), "initial.beta", where("initial", "beta")),
    }
    if initial["kind"] not in ("plane_wave", "gaussian"):
        raise ConfigError(f"unknown initial.kind {initial['kind']!r}", where("initial", "kind"))
    if initial["kind"] == "gaussian":
        if "sigma_p" not in init_d:
            raise ConfigError("gaussian initial state needs initial.sigma_p", where("initial"))
        initial["sigma_p"] = _num(init_d["sigma_p"], "initial.sigma_p", where("initial", "sigma_p"))
        if initial["sigma_p"] <= 0:
            raise ConfigError("initial.sigma_p must be > 0", where("initial", "sigma_p"))
    if not 0.0 <= initial["beta"] < 1.0:
        raise ConfigError("initial.beta must lie in [0, 1)", where("initial", "beta"))

    run = dict(RUN_DEFAULTS)
    run.update(data.get("run", {}))
    for key in ("record_every", "n_orbits", "n_steps", "n_max"):
        run[key] = _num(run[key], f"run.{key}", where("run", key), integer=True)
        if run[key] < 1:
            raise ConfigError(f"run.{key} must be >= 1", where("run", key))
    if run["kicks"] is not None:
        run["kicks"] = _num(run["kicks"], "run.kicks", where("run", "kicks"), integer=True)
        if run["kicks"] < 1:
            raise ConfigError("run.kicks must be >= 1", where("run", "kicks"))
    if not isinstance(run["M_list"], list) or not run["M_list"]:
        raise ConfigError("run.M_list must be a non-empty list", where("run", "M_list"))
    run["M_list"] = [_num(v, "run.M_list entry", where("run", "M_list"), integer=True) for v in run["M_list"]]
    run["hbar_list"] = [_num(v, "run.hbar_list entry", where("run", "hbar_list")) for v in run["hbar_list"]]
    for M_ in run["M_list"]:
        if M_ < 1:
            raise ConfigError(f"run.M_list entries must be >= 1, got {M_}", where("run", "M_list"))

    return RunConfig(sim, cloud, noise, initial, run, data)
