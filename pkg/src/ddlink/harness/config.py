"""Experiment configuration: versioned schema, strict validation."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import yaml

from ddlink import modems
from ddlink.detectors import DetectorOptions

SCHEMA_VERSION = 1

EXPERIMENTS = ("psd", "ber", "chanmat", "equiv", "detect-bench")
DETECTORS = ("mf", "zf", "lmmse", "gmp", "oamp", "mamp", "cd_oamp", "cd_mamp")

_TOP_KEYS = {
    "schema_version",
    "experiment",
    "schemes",
    "geometry",
    "constellation",
    "pulse",
    "filter",
    "oversampling",
    "channel",
    "snr_db",
    "trials",
    "frames",
    "detectors",
    "detector_options",
    "per_detector_options",
    "seed",
    "velocities_kmh",
    "bandwidth_fracs",
    "sizes",
    "fault",
    "body_oversample",
}


class ConfigError(ValueError):
    """Invalid or unsupported experiment configuration."""


@dataclass(frozen=True)
class ChannelConfig:
    paths: int = 3
    tau_max_sym: float = 4.0  # in units of T/M
    speed_kmh: float = 300.0
    carrier_hz: float = 4e9
    profile: str = "random"  # "random" draws gains; "awgn" pins a unit gain


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    schemes: tuple = ("otfs_rect",)
    m: int = 64
    n: int = 16
    df: float = 15e3
    constellation: str = "qpsk"
    beta: float = 0.5
    span: int = 16
    q: int = 8
    bandwidth_frac: float = 1.0
    bl_span: int = 16
    oversampling: int = 8
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    snr_db: tuple = (10.0, 12.0, 14.0, 16.0)
    trials: int = 500
    frames: int = 50
    detectors: tuple = ("oamp",)
    detector_options: dict = field(default_factory=dict)
    per_detector_options: dict = field(default_factory=dict)
    seed: int = 1
    velocities_kmh: tuple | None = None
    bandwidth_fracs: tuple | None = None
    sizes: tuple = (256, 512)
    fault: str | None = None
    body_oversample: dict = field(default_factory=dict)

    def modem(self, scheme: str) -> modems.Modem:
        kw = dict(df=self.df, beta=self.beta, span=self.span)
        if scheme == "oddm":
            kw["q"] = self.q
        if scheme == "afdm":
            nu_max = _nu_max(self)
            kw["c1"] = modems.default_afdm_c1(nu_max, self.m, self.n, self.df)
        if scheme in self.body_oversample:
            kw["oversample"] = int(self.body_oversample[scheme])
        return modems.Modem(scheme, self.m, self.n, **kw)

    def options_for(self, detector: str) -> DetectorOptions:
        merged = dict(self.detector_options)
        merged.update(self.per_detector_options.get(detector, {}))
        if detector == "cd_mamp":
            merged.setdefault("inner", "mamp")
        if detector == "cd_oamp":
            merged.setdefault("inner", "oamp")
        return DetectorOptions(**merged)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


def _nu_max(cfg: ExperimentConfig) -> float:
    from ddlink import channel as chanmod

    return chanmod.doppler_max(cfg.channel.speed_kmh, cfg.channel.carrier_hz)


def _as_tuple(value, kind=float):
    if value is None:
        return None
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"expected a list, got {value!r}")
    return tuple(kind(v) for v in value)


def parse_config(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    experiment = data.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {experiment!r}")

    geometry = data.get("geometry", {})
    pulse = data.get("pulse", {})
    filt = data.get("filter", {})
    chan = data.get("channel", {})
    for block, allowed in (
        (geometry, {"m", "n", "df_hz"}),
        (pulse, {"beta", "span", "q"}),
        (filt, {"bandwidth_frac", "span"}),
        (chan, {"paths", "tau_max_sym", "speed_kmh", "carrier_hz", "profile"}),
    ):
        bad = set(block) - allowed
        if bad:
            raise ConfigError(f"unknown keys {sorted(bad)} (allowed: {sorted(allowed)})")

    schemes = tuple(data.get("schemes", ("otfs_rect",)))
    for s in schemes:
        if s not in modems.SCHEMES:
            raise ConfigError(f"unknown scheme {s!r}")
    detectors = tuple(data.get("detectors", ("oamp",)))
    for d in detectors:
        if d not in DETECTORS:
            raise ConfigError(f"unknown detector {d!r}")
    if data.get("constellation", "qpsk") not in ("qpsk", "qam16"):
        raise ConfigError("constellation must be qpsk or qam16")

    cfg = ExperimentConfig(
        experiment=experiment,
        schemes=schemes,
        m=int(geometry.get("m", 64)),
        n=int(geometry.get("n", 16)),
        df=float(geometry.get("df_hz", 15e3)),
        constellation=data.get("constellation", "qpsk"),
        beta=float(pulse.get("beta", 0.5)),
        span=int(pulse.get("span", 16)),
        q=int(pulse.get("q", 8)),
        bandwidth_frac=float(filt.get("bandwidth_frac", 1.0)),
        bl_span=int(filt.get("span", 16)),
        oversampling=int(data.get("oversampling", 8)),
        channel=ChannelConfig(
            paths=int(chan.get("paths", 3)),
            tau_max_sym=float(chan.get("tau_max_sym", 4.0)),
            speed_kmh=float(chan.get("speed_kmh", 300.0)),
            carrier_hz=float(chan.get("carrier_hz", 4e9)),
            profile=str(chan.get("profile", "random")),
        ),
        snr_db=_as_tuple(data.get("snr_db", [10.0, 12.0, 14.0, 16.0])),
        trials=int(data.get("trials", 500)),
        frames=int(data.get("frames", 50)),
        detectors=detectors,
        detector_options=dict(data.get("detector_options", {})),
        per_detector_options={k: dict(v) for k, v in data.get("per_detector_options", {}).items()},
        seed=int(data.get("seed", 1)),
        velocities_kmh=_as_tuple(data.get("velocities_kmh")),
        bandwidth_fracs=_as_tuple(data.get("bandwidth_fracs")),
        sizes=_as_tuple(data.get("sizes", [256, 512]), int),
        fault=data.get("fault"),
        body_oversample={str(k): int(v) for k, v in data.get("body_oversample", {}).items()},
    )
    if cfg.trials < 1 or cfg.frames < 1:
        raise ConfigError("trials and frames must be >= 1")
    if cfg.oversampling < 1:
        raise ConfigError("oversampling must be >= 1")
    if cfg.channel.profile not in ("random", "awgn"):
        raise ConfigError("channel profile must be 'random' or 'awgn'")
    for det in detectors:
        cfg.options_for(det)  # validates option names/ranges eagerly
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    try:
        return parse_config(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
