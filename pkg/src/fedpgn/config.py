"""Declarative run configuration: TOML in, resolved TOML back out.

A config is a small set of key/value tables.  Values resolve in three
layers: built-in profile defaults, then the config file, then repeated
``--set section.key=value`` overrides (last write wins).  Unknown keys
are rejected outright.  Every run emits the fully resolved config next
to its results so the run can be replayed from that file alone.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import data as datamod
from . import mechanism, models
from .engine import AlgorithmSpec, DP_FEDPGN, RunConfig
from .errors import ConfigError

# Defaults mirror the reference experiment setup: 500 clients at 10%
# participation, B=50, K=50, R=300, eta decayed by 0.998 per round,
# sigma=0.8, delta=1/N, rho=0.2, beta=0.3, median clipping.
PROFILES = {
    "reference": {
        "federation": {"n_clients": 500, "sample_size": 50, "local_steps": 50,
                       "rounds": 300, "batch_size": 50},
        "data": {"per_class": 5000, "test_per_class": 1000},
    },
    "desk": {
        "federation": {"n_clients": 50, "sample_size": 10, "local_steps": 20,
                       "rounds": 100, "batch_size": 50},
        "data": {"per_class": 400, "test_per_class": 100},
    },
}

DEFAULTS = {
    "model": {"kind": models.SOFTMAX, "hidden": 16, "activation": "tanh",
              "init_std": 0.1},
    "data": {"source": "synthetic", "n_cls": 10, "n_in": 32, "per_class": 400,
             "test_per_class": 100, "spread": 0.3, "train_csv": "",
             "test_csv": "", "has_header": False},
    "partition": {"alpha": 0.1},
    "federation": {"n_clients": 50, "sample_size": 10, "local_steps": 20,
                   "rounds": 100, "batch_size": 50, "eta": 0.1,
                   "lr_decay": 0.998},
    "dp": {"clip_mode": "median", "clip_c": 1.0, "sigma": 0.8},
    "algorithm": {"variant": DP_FEDPGN, "rho": 0.2, "beta": 0.3,
                  "laplacian": False, "sigma_ls": 0.01,
                  "ls_per_layer": False},
    "seeds": {"data": 1, "partition": 2, "training": 3},
    "probes": {"landscape": False, "lim": 1.0, "resolution": 41, "sample": 512},
}

# Keys that are legal but have no default: absence carries meaning.
OPTIONAL_KEYS = {("federation", "gamma"), ("dp", "delta")}


@dataclass(frozen=True)
class ProbeSettings:
    landscape: bool
    lim: float
    resolution: int
    sample: int


def _coerce(text: str):
    for caster in (int, float):
        try:
            return caster(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def parse_overrides(pairs) -> dict:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not key=value")
        key, value = pair.split("=", 1)
        parts = key.strip().split(".")
        if len(parts) != 2:
            raise ConfigError(f"override key {key!r} must be section.key", field=key)
        out.setdefault(parts[0], {})[parts[1]] = _coerce(value.strip())
    return out


def _merge(base: dict, extra: dict) -> dict:
    out = {sec: dict(vals) for sec, vals in base.items()}
    for sec, vals in extra.items():
        out.setdefault(sec, {})
        out[sec].update(vals)
    return out


def _check_known(doc: dict) -> None:
    for sec, vals in doc.items():
        if sec == "profile":
            continue
        if sec not in DEFAULTS:
            raise ConfigError(f"unknown config section [{sec}]", field=sec)
        if not isinstance(vals, dict):
            raise ConfigError(f"[{sec}] must be a table", field=sec)
        for key in vals:
            if key not in DEFAULTS[sec] and (sec, key) not in OPTIONAL_KEYS:
                raise ConfigError(f"unknown key {sec}.{key}", field=f"{sec}.{key}")


def load_toml(path) -> dict:
    with open(path, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config does not parse: {exc}") from exc


def resolve(doc: dict | None = None, overrides=None, profile: str | None = None) -> dict:
    """Layer profile defaults, the document, and overrides into one dict."""
    doc = dict(doc or {})
    profile = doc.pop("profile", profile)
    _check_known(doc)
    layered = DEFAULTS
    if profile is not None:
        if profile not in PROFILES:
            raise ConfigError(f"unknown profile {profile!r}", field="profile")
        layered = _merge(layered, PROFILES[profile])
    layered = _merge(layered, doc)
    if overrides:
        over = parse_overrides(overrides) if not isinstance(overrides, dict) else overrides
        _check_known(over)
        layered = _merge(layered, over)
    return layered


def build_run_config(resolved: dict) -> RunConfig:
    m, d, f, dp, alg, seeds = (resolved["model"], resolved["data"],
                               resolved["federation"], resolved["dp"],
                               resolved["algorithm"], resolved["seeds"])
    model = models.Model(
        kind=m["kind"], n_in=int(d["n_in"]), n_cls=int(d["n_cls"]),
        hidden=int(m["hidden"]) if m["kind"] == models.MLP else None,
        activation=m["activation"])

    if d["source"] == "synthetic":
        source = datamod.SyntheticSource(
            n_cls=int(d["n_cls"]), n_in=int(d["n_in"]),
            per_class=int(d["per_class"]), spread=float(d["spread"]),
            test_per_class=int(d["test_per_class"]))
    elif d["source"] == "csv":
        if not d["train_csv"]:
            raise ConfigError("csv source needs data.train_csv", field="data.train_csv")
        schema = datamod.CsvSchema(n_cls=int(d["n_cls"]), n_in=int(d["n_in"]),
                                   has_header=bool(d["has_header"]))
        source = datamod.CsvSource(d["train_csv"], schema,
                                   d["test_csv"] or None)
    else:
        raise ConfigError(f"unknown data source {d['source']!r}", field="data.source")

    variant = alg["variant"]
    laplacian = bool(alg["laplacian"])
    if variant.endswith("-ls"):
        variant = variant[:-3]
        laplacian = True
    algo = AlgorithmSpec(variant=variant, rho=float(alg["rho"]),
                         beta=float(alg["beta"]),
                         sigma_ls=float(alg["sigma_ls"]) if laplacian else None,
                         ls_per_layer=bool(alg["ls_per_layer"]))

    clip = mechanism.ClipPolicy(mode=dp["clip_mode"],
                                c=float(dp["clip_c"]) if dp["clip_mode"] == "fixed" else None)

    return RunConfig(
        model=model, algo=algo, source=source,
        n_clients=int(f["n_clients"]), sample_size=int(f["sample_size"]),
        local_steps=int(f["local_steps"]), rounds=int(f["rounds"]),
        batch_size=int(f["batch_size"]), eta=float(f["eta"]),
        gamma=float(f["gamma"]) if "gamma" in f else None,
        lr_decay=float(f["lr_decay"]), clip=clip,
        noise=mechanism.NoiseSpec(float(dp["sigma"])),
        dp_delta=float(dp["delta"]) if "delta" in dp else None,
        partition_alpha=float(resolved["partition"]["alpha"]),
        seed_data=int(seeds["data"]), seed_partition=int(seeds["partition"]),
        seed_train=int(seeds["training"]), init_std=float(m["init_std"]))


def build_probe_settings(resolved: dict) -> ProbeSettings:
    p = resolved["probes"]
    return ProbeSettings(bool(p["landscape"]), float(p["lim"]),
                         int(p["resolution"]), int(p["sample"]))


def _toml_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    return '"' + str(value).replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_toml(resolved: dict) -> str:
    """Serialize a resolved config; parsing it back reproduces the run."""
    lines = []
    for sec in sorted(resolved):
        lines.append(f"[{sec}]")
        for key in sorted(resolved[sec]):
            lines.append(f"{key} = {_toml_scalar(resolved[sec][key])}")
        lines.append("")
    return "\n".join(lines)
