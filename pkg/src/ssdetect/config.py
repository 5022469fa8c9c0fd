"""Pipeline configuration: a flat ``key = value`` file with ``#`` comments.

Every key has a default, so an empty file is a valid config. List values are
whitespace or comma separated. All randomness is derived from ``seed``.
"""

from __future__ import annotations

import configparser
import dataclasses
import os
from importlib import resources
from dataclasses import dataclass, fields

from .attacksim import ATTACK_KINDS, CorpusConfig
from .errors import ConfigError, MissingFileError
from .features import MfccConfig
from .gmm import TrainConfig
from .grouping import SCHEMES

VARIANTS = ("adapt", "noadapt")


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    # simulated corpus
    num_natural: int = 600
    num_spoofed: int = 600
    min_frames: int = 300
    max_frames: int = 600
    dim: int = 10
    attacks: tuple = ("glitch", "smooth", "shift")
    smooth_window: int = 5
    glitch_rate: float = 0.1
    glitch_magnitude: float = 2.0
    shift_scale: float = 0.3
    split_fractions: tuple = (0.4, 0.2, 0.4)
    # audio front end
    frame_length_ms: float = 25.0
    frame_shift_ms: float = 10.0
    num_ceps: int = 19
    num_filters: int = 26
    preemphasis: float = 0.97
    delta_window: int = 2
    vad: bool = True
    # models
    num_components: int = 64
    max_em_iters: int = 100
    rel_ll_tolerance: float = 1e-5
    variance_floor_factor: float = 1e-3
    kmeans_iters: int = 20
    map_relevance: float = 16.0
    # scoring and fusion
    schemes: tuple = ("class", "phoneme", "gaussian")
    variant: str = "adapt"
    weighted: bool = False
    class_map: str = ""  # empty: built-in 37-phoneme table
    fusion_prior: float = 0.5
    fusion_l2: float = 1e-6
    # attacks withheld from model and fusion training, reported as Unknown
    unknown_attacks: tuple = ()

    def __post_init__(self):
        for a in self.attacks + self.unknown_attacks:
            if a not in ATTACK_KINDS:
                raise ConfigError(f"unknown attack {a!r}")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"unknown grouping scheme {s!r}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}")
        if not 0.0 < self.fusion_prior < 1.0:
            raise ConfigError("fusion_prior must lie in (0, 1)")
        if len(self.split_fractions) != 3:
            raise ConfigError("split_fractions needs three values")

    def corpus(self) -> CorpusConfig:
        return CorpusConfig(self.num_natural, self.num_spoofed, self.min_frames, self.max_frames,
                            self.dim, self.attacks, self.smooth_window, self.glitch_rate,
                            self.glitch_magnitude, self.shift_scale, self.split_fractions,
                            self.seed)

    def train(self, offset: int = 0) -> TrainConfig:
        return TrainConfig(self.num_components, self.max_em_iters, self.rel_ll_tolerance,
                           self.variance_floor_factor, self.kmeans_iters, self.seed + offset,
                           self.map_relevance)

    def mfcc(self) -> MfccConfig:
        return MfccConfig(frame_length_ms=self.frame_length_ms,
                          frame_shift_ms=self.frame_shift_ms, num_ceps=self.num_ceps,
                          num_filters=self.num_filters, preemphasis=self.preemphasis,
                          delta_window=self.delta_window)


def _convert(name, kind, raw):
    try:
        if kind == "bool":
            low = raw.lower()
            if low not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                raise ValueError(raw)
            return low in ("true", "yes", "1", "on")
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "tuple":
            items = raw.replace(",", " ").split()
            return tuple(float(v) for v in items) if name == "split_fractions" else tuple(items)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def parse_config(text: str, source: str = "<string>", **overrides) -> PipelineConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None,
                                       delimiters=("=",))
    try:
        parser.read_string("[pipeline]\n" + text, source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    types = {f.name: f.type for f in fields(PipelineConfig)}
    values = {}
    for key, raw in parser["pipeline"].items():
        if key not in types:
            raise ConfigError(f"{source}: unknown key {key!r}")
        values[key] = _convert(key, types[key], raw.strip())
    values.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig(**values)


def read_config(path=None, **overrides) -> PipelineConfig:
    if path is None:
        return parse_config("", **overrides)
    if not os.path.exists(path):
        raise MissingFileError(f"no such file: {path}")
    with open(path) as fh:
        return parse_config(fh.read(), str(path), **overrides)


def format_config(cfg: PipelineConfig) -> str:
    out = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = " ".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        out.append(f"{f.name} = {v}")
    return "\n".join(out) + "\n"


def default_config_path() -> str:
    """Path of the shipped, fully commented default config."""
    return str(resources.files("ssdetect").joinpath("data/default.cfg"))


def default_config() -> PipelineConfig:
    return read_config(default_config_path())


def with_seed(cfg: PipelineConfig, seed) -> PipelineConfig:
    return cfg if seed is None else dataclasses.replace(cfg, seed=int(seed))
