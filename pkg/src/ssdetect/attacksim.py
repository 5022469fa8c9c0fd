"""Synthetic natural/spoofed feature corpora with controlled artifact types.

Natural utterances come from a phonetic source: a sequence of phoneme
segments, each segment drawn from that phoneme's Gaussian with AR(1)
correlated frame noise. Spoofed utterances start from a natural draw and then
receive one artifact:

* ``smooth``  - centered moving average over frames (long-duration artifact)
* ``glitch``  - sparse, large per-frame perturbations (short-duration artifact)
* ``shift``   - frames drawn from a mean-perturbed copy of the source model

Per-utterance randomness comes from ``np.random.SeedSequence([seed, stream, index])``
where ``stream`` is 0 for utterances, 1 for the phonetic source and 2 for the
shifted model.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidDataError
from .features import FeatureMatrix, format_features
from .gmm import DiagGmm
from .grouping import ClassMap, PhonemeAlignment, default_class_map, format_alignment

ATTACK_KINDS = ("smooth", "glitch", "shift")

# Share of frames per sound class and segment duration range in frames.
CLASS_FREQUENCY = {"vowel": 0.542, "nasal": 0.156, "glide": 0.118, "stop": 0.112, "rest": 0.072}
CLASS_DURATION = {"vowel": (6, 14), "nasal": (4, 9), "glide": (4, 8), "stop": (2, 5),
                  "rest": (4, 10)}


@dataclass(frozen=True)
class AttackConfig:
    kind: str = "glitch"
    smooth_window: int = 5
    glitch_rate: float = 0.05
    glitch_magnitude: float = 3.0
    shift_scale: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise InvalidDataError(f"unknown attack kind {self.kind!r}")
        if not 0.0 <= self.glitch_rate <= 1.0:
            raise InvalidDataError("glitch rate must lie in [0, 1]")
        if self.smooth_window < 1:
            raise InvalidDataError("smoothing window must be >= 1")
        if self.glitch_magnitude < 0 or self.shift_scale < 0:
            raise InvalidDataError("magnitudes must be non-negative")


def mix_seed(seed: int, index: int, stream: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(stream), int(index)])


def sample_gmm(gmm: DiagGmm, n: int, seed=0, utt_id: str = "sample") -> FeatureMatrix:
    """``n`` i.i.d. frames: component by weight, then a diagonal Gaussian draw."""
    rng = np.random.default_rng(seed)
    if n <= 0:
        return FeatureMatrix(np.zeros((0, gmm.dim)), 100.0, utt_id)
    comp = rng.choice(gmm.num_components, size=n, p=gmm.weights)
    z = rng.standard_normal((n, gmm.dim))
    return FeatureMatrix(gmm.means[comp] + np.sqrt(gmm.variances[comp]) * z, 100.0, utt_id)


def smooth_attack(feats: FeatureMatrix, window: int) -> FeatureMatrix:
    """Per-dimension centered moving average, edges replicated."""
    if window < 1 or window % 2 == 0:
        raise InvalidDataError("smoothing window must be a positive odd number")
    x = feats.frames
    if window == 1 or x.shape[0] == 0:
        return feats
    h = window // 2
    padded = np.concatenate([np.repeat(x[:1], h, axis=0), x, np.repeat(x[-1:], h, axis=0)])
    csum = np.concatenate([np.zeros((1, x.shape[1])), np.cumsum(padded, axis=0)])
    out = (csum[window:] - csum[:-window]) / window
    return replace(feats, frames=out)


def glitch_attack(feats: FeatureMatrix, cfg: AttackConfig, scale=None) -> FeatureMatrix:
    """Perturb a Bernoulli(rate) subset of frames by magnitude * scale * N(0, 1).

    ``scale`` is the per-dimension corpus standard deviation; it defaults to
    the utterance's own. Unselected frames are returned untouched.
    """
    rng = np.random.default_rng(cfg.seed)
    x = feats.frames
    n, d = x.shape
    selected = rng.random(n) < cfg.glitch_rate
    noise = rng.standard_normal((n, d))
    if scale is None:
        scale = x.std(axis=0) if n else np.zeros(d)
    out = x.copy()
    out[selected] = x[selected] + cfg.glitch_magnitude * np.asarray(scale) * noise[selected]
    return replace(feats, frames=out)


def shift_gmm(gmm: DiagGmm, scale: float, seed=0) -> DiagGmm:
    """Copy of ``gmm`` with means moved by scale * std * N(0, 1)."""
    rng = np.random.default_rng(seed)
    offset = scale * np.sqrt(gmm.variances) * rng.standard_normal(gmm.means.shape)
    return DiagGmm(gmm.weights.copy(), gmm.means + offset, gmm.variances.copy())


# --- phonetic corpus ---------------------------------------------------------

@dataclass(frozen=True)
class PhoneticSource:
    """One Gaussian per phoneme plus segment duration ranges."""

    model: DiagGmm
    phonemes: tuple
    durations: tuple  # (min, max) frames per phoneme
    ar_coef: float = 0.5


def phonetic_source(class_map: ClassMap | None = None, dim: int = 10, seed: int = 0,
                    mean_spread: float = 1.5, ar_coef: float = 0.5) -> PhoneticSource:
    class_map = class_map or default_class_map()
    rng = np.random.default_rng(mix_seed(seed, 0, stream=1))
    phonemes = tuple(class_map.phonemes)
    classes = [class_map[p] for p in phonemes]
    per_class = {c: classes.count(c) for c in set(classes)}
    weights = np.array([CLASS_FREQUENCY[c] / per_class[c] for c in classes])
    # Convert frame shares into segment-start probabilities.
    mean_dur = np.array([sum(CLASS_DURATION[c]) / 2.0 for c in classes])
    weights = weights / mean_dur
    means = mean_spread * rng.standard_normal((len(phonemes), dim))
    variances = rng.uniform(0.5, 1.5, size=(len(phonemes), dim))
    model = DiagGmm(weights / weights.sum(), means, variances)
    return PhoneticSource(model, phonemes, tuple(CLASS_DURATION[c] for c in classes), ar_coef)


def _ar_noise(rng, n, d, rho):
    e = rng.standard_normal((n, d))
    z = np.empty_like(e)
    if n:
        z[0] = e[0]
    k = np.sqrt(1.0 - rho * rho)
    for i in range(1, n):
        z[i] = rho * z[i - 1] + k * e[i]
    return z


def sample_utterance(source: PhoneticSource, num_frames: int, rng, utt_id: str = "utt",
                     model: DiagGmm | None = None):
    """Return (FeatureMatrix, PhonemeAlignment) of exactly ``num_frames`` frames."""
    model = model or source.model
    segs, labels, t = [], [], 0
    while t < num_frames:
        p = int(rng.choice(len(source.phonemes), p=source.model.weights))
        lo, hi = source.durations[p]
        dur = min(int(rng.integers(lo, hi + 1)), num_frames - t)
        segs.append((t, t + dur, p))
        t += dur
    comp = np.concatenate([np.full(e - s, p) for s, e, p in segs])
    z = _ar_noise(rng, num_frames, model.dim, source.ar_coef)
    frames = model.means[comp] + np.sqrt(model.variances[comp]) * z
    rate = 100.0
    # Frames are grouped by their window center i / rate + 0.0125 s, so segment
    # boundaries go halfway between neighbouring centers.
    edge = lambda i: i / rate + 0.0075  # noqa: E731
    alignment = PhonemeAlignment(tuple((edge(s), edge(e), source.phonemes[p])
                                       for s, e, p in segs), utt_id)
    return FeatureMatrix(frames, rate, utt_id), alignment


@dataclass(frozen=True)
class CorpusConfig:
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
    split_fractions: tuple = (0.4, 0.2, 0.4)  # train / dev / eval
    seed: int = 0


@dataclass
class Utterance:
    id: str
    label: str  # "natural" or "spoof"
    attack: str  # "human" for natural speech
    split: str
    feats: FeatureMatrix
    alignment: PhonemeAlignment = field(repr=False)


def _split_names(n, fractions):
    counts = np.floor(np.asarray(fractions) / np.sum(fractions) * n).astype(int)
    counts[-1] = n - counts[:-1].sum()
    return [name for name, c in zip(("train", "dev", "eval"), counts) for _ in range(c)]


def generate_corpus(cfg: CorpusConfig = CorpusConfig(), class_map: ClassMap | None = None):
    """Build the simulated corpus. Spoofed utterances cycle through ``cfg.attacks``."""
    for a in cfg.attacks:
        if a not in ATTACK_KINDS:
            raise InvalidDataError(f"unknown attack kind {a!r}")
    source = phonetic_source(class_map, cfg.dim, cfg.seed)
    shifted = shift_gmm(source.model, cfg.shift_scale, mix_seed(cfg.seed, 0, stream=2))
    corpus_std = np.sqrt(source.model.weights @ (source.model.variances + source.model.means ** 2)
                         - (source.model.weights @ source.model.means) ** 2)
    utts = []
    nat_splits = _split_names(cfg.num_natural, cfg.split_fractions)
    for i in range(cfg.num_natural):
        rng = np.random.default_rng(mix_seed(cfg.seed, i))
        n = int(rng.integers(cfg.min_frames, cfg.max_frames + 1))
        uid = f"nat{i:04d}"
        feats, ali = sample_utterance(source, n, rng, uid)
        utts.append(Utterance(uid, "natural", "human", nat_splits[i], feats, ali))

    per_attack = {a: [] for a in cfg.attacks}
    for j in range(cfg.num_spoofed):
        per_attack[cfg.attacks[j % len(cfg.attacks)]].append(j)
    split_of = {}
    for a, idx in per_attack.items():
        split_of.update(zip(idx, _split_names(len(idx), cfg.split_fractions)))

    for j in range(cfg.num_spoofed):
        attack = cfg.attacks[j % len(cfg.attacks)]
        rng = np.random.default_rng(mix_seed(cfg.seed, cfg.num_natural + j))
        n = int(rng.integers(cfg.min_frames, cfg.max_frames + 1))
        uid = f"spf{j:04d}"
        model = shifted if attack == "shift" else None
        feats, ali = sample_utterance(source, n, rng, uid, model)
        acfg = AttackConfig(attack, cfg.smooth_window, cfg.glitch_rate, cfg.glitch_magnitude,
                            cfg.shift_scale, int(rng.integers(2 ** 31)))
        if attack == "smooth":
            feats = smooth_attack(feats, cfg.smooth_window)
        elif attack == "glitch":
            feats = glitch_attack(feats, acfg, corpus_std)
        utts.append(Utterance(uid, "spoof", attack, split_of[j], feats, ali))
    return utts


def write_corpus(utts, out_dir) -> dict:
    """Write SSDFEAT + alignment files and one manifest per split.

    Returns {split: manifest path}. Alignments sit next to their feature file
    with a ``.lab`` extension.
    """
    feat_dir = os.path.join(out_dir, "feats")
    os.makedirs(feat_dir, exist_ok=True)
    manifests = {}
    for u in utts:
        fpath = os.path.join(feat_dir, u.id + ".feat")
        _atomic_write(fpath, format_features(u.feats))
        _atomic_write(os.path.join(feat_dir, u.id + ".lab"), format_alignment(u.alignment))
        manifests.setdefault(u.split, []).append((u.id, f"feats/{u.id}.feat {u.label} {u.attack}"))
    paths = {}
    for split, rows in manifests.items():
        path = os.path.join(out_dir, f"{split}.lst")
        _atomic_write(path, "".join(r + "\n" for _, r in sorted(rows)))
        paths[split] = path
    return paths


def _atomic_write(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)
