"""MFCC front end: framing, mel cepstra, regression deltas and a bigaussian VAD."""

from __future__ import annotations

import math
import os
import wave
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInputError, FormatError, InvalidDataError, MissingFileError


@dataclass(frozen=True)
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int
    id: str = "utt"

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64).ravel()
        object.__setattr__(self, "samples", samples)
        if int(self.sample_rate) <= 0:
            raise InvalidDataError(f"sample rate must be positive, got {self.sample_rate}")


@dataclass(frozen=True)
class FeatureMatrix:
    """N x D frame matrix.

    ``frame_index`` holds the position of every row in the original analysis
    frame grid, so time lookups still work after VAD has dropped frames.
    """

    frames: np.ndarray
    frame_rate_hz: float = 100.0
    id: str = "utt"
    frame_index: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim == 1:
            frames = frames.reshape(-1, 1) if frames.size else frames.reshape(0, 0)
        if frames.ndim != 2:
            raise InvalidDataError("feature matrix must be two-dimensional")
        if not np.all(np.isfinite(frames)):
            raise InvalidDataError(f"non-finite feature values in {self.id}")
        object.__setattr__(self, "frames", frames)
        if self.frame_index is None:
            object.__setattr__(self, "frame_index", np.arange(frames.shape[0]))
        else:
            idx = np.asarray(self.frame_index, dtype=np.int64)
            if idx.shape != (frames.shape[0],):
                raise InvalidDataError("frame_index length must equal the number of frames")
            object.__setattr__(self, "frame_index", idx)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    def select(self, mask) -> "FeatureMatrix":
        mask = np.asarray(mask, dtype=bool)
        return FeatureMatrix(self.frames[mask], self.frame_rate_hz, self.id, self.frame_index[mask])


@dataclass(frozen=True)
class MfccConfig:
    frame_length_ms: float = 25.0
    frame_shift_ms: float = 10.0
    num_ceps: int = 19
    num_filters: int = 26
    preemphasis: float = 0.97
    low_freq: float = 0.0
    high_freq: float | None = None  # None -> Nyquist
    log_floor: float = 1e-10
    delta_window: int = 2

    def frame_length(self, sample_rate: int) -> int:
        return int(round(self.frame_length_ms * sample_rate / 1000.0))

    def hop_length(self, sample_rate: int) -> int:
        return int(round(self.frame_shift_ms * sample_rate / 1000.0))


def num_frames(num_samples: int, frame_len: int, hop: int) -> int:
    if num_samples < frame_len:
        return 0
    return (num_samples - frame_len) // hop + 1


def frame_signal(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    n = num_frames(len(x), frame_len, hop)
    if n == 0:
        return np.zeros((0, frame_len))
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n)[:, None]
    return x[idx]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(num_filters: int, nfft: int, sample_rate: int,
                   low_freq: float = 0.0, high_freq: float | None = None) -> np.ndarray:
    """Triangular filters on the HTK mel scale, shape (num_filters, nfft // 2 + 1)."""
    high_freq = sample_rate / 2.0 if high_freq is None else high_freq
    mel_points = np.linspace(hz_to_mel(low_freq), hz_to_mel(high_freq), num_filters + 2)
    hz_points = mel_to_hz(mel_points)
    bin_freqs = np.arange(nfft // 2 + 1) * sample_rate / nfft
    fbank = np.zeros((num_filters, nfft // 2 + 1))
    for m in range(num_filters):
        left, center, right = hz_points[m], hz_points[m + 1], hz_points[m + 2]
        rising = (bin_freqs - left) / (center - left)
        falling = (right - bin_freqs) / (right - center)
        fbank[m] = np.maximum(0.0, np.minimum(rising, falling))
    return fbank


def dct_matrix(num_filters: int) -> np.ndarray:
    """Orthonormal DCT-II basis; row k gives coefficient c_k."""
    n = np.arange(num_filters)
    k = n[:, None]
    basis = np.cos(np.pi * k * (2 * n[None, :] + 1) / (2 * num_filters))
    basis *= np.sqrt(2.0 / num_filters)
    basis[0] *= np.sqrt(0.5)
    return basis


def _check_audio(audio: AudioBuffer):
    if audio.samples.size == 0:
        raise EmptyInputError(f"empty audio in {audio.id}")
    if not np.all(np.isfinite(audio.samples)):
        raise InvalidDataError(f"non-finite samples in {audio.id}")


def extract_mfcc(audio: AudioBuffer, cfg: MfccConfig = MfccConfig()) -> FeatureMatrix:
    """Static cepstra c1..c_num_ceps for every analysis frame."""
    _check_audio(audio)
    sr = int(audio.sample_rate)
    high = sr / 2.0 if cfg.high_freq is None else cfg.high_freq
    if high > sr / 2.0 + 1e-9 or cfg.num_ceps >= cfg.num_filters:
        raise InvalidDataError(f"sample rate {sr} Hz does not support the configured analysis band")
    frame_len, hop = cfg.frame_length(sr), cfg.hop_length(sr)
    nfft = 1 << max(0, (frame_len - 1).bit_length())

    x = audio.samples
    emphasized = np.append(x[0], x[1:] - cfg.preemphasis * x[:-1])
    frames = frame_signal(emphasized, frame_len, hop) * np.hamming(frame_len)
    rate = 1000.0 / cfg.frame_shift_ms
    if frames.shape[0] == 0:
        return FeatureMatrix(np.zeros((0, cfg.num_ceps)), rate, audio.id)

    power = np.abs(np.fft.rfft(frames, nfft)) ** 2
    fbank = mel_filterbank(cfg.num_filters, nfft, sr, cfg.low_freq, high)
    log_mel = np.log(np.maximum(power @ fbank.T, cfg.log_floor))
    ceps = log_mel @ dct_matrix(cfg.num_filters).T
    return FeatureMatrix(ceps[:, 1:cfg.num_ceps + 1], rate, audio.id)


def frame_log_energy(audio: AudioBuffer, cfg: MfccConfig = MfccConfig()) -> np.ndarray:
    """Natural-log energy of the raw (un-emphasized, unwindowed) frames."""
    _check_audio(audio)
    sr = int(audio.sample_rate)
    frames = frame_signal(audio.samples, cfg.frame_length(sr), cfg.hop_length(sr))
    return np.log(np.maximum(np.sum(frames ** 2, axis=1), cfg.log_floor))


def _regress(x: np.ndarray, window: int) -> np.ndarray:
    padded = np.concatenate([np.repeat(x[:1], window, axis=0), x,
                             np.repeat(x[-1:], window, axis=0)])
    n = x.shape[0]
    out = np.zeros_like(x)
    for k in range(1, window + 1):
        out += k * (padded[window + k:window + k + n] - padded[window - k:window - k + n])
    return out / (2.0 * sum(k * k for k in range(1, window + 1)))


def append_deltas(feats: FeatureMatrix, window: int = 2) -> FeatureMatrix:
    """Stack [static, delta, delta-delta]; edges are handled by frame replication."""
    if window < 1:
        raise InvalidDataError("delta window must be >= 1")
    x = feats.frames
    if x.shape[0] == 0:
        return FeatureMatrix(np.zeros((0, 3 * x.shape[1])), feats.frame_rate_hz, feats.id)
    d1 = _regress(x, window)
    d2 = _regress(d1, window)
    return FeatureMatrix(np.hstack([x, d1, d2]), feats.frame_rate_hz, feats.id, feats.frame_index)


@dataclass(frozen=True)
class VadResult:
    mask: np.ndarray
    degenerate: bool
    means: tuple[float, float]
    variances: tuple[float, float]


def _log_normal(x, mean, var):
    return -0.5 * (math.log(2 * math.pi * var) + (x - mean) ** 2 / var)


def bigaussian_vad(feats: FeatureMatrix, energies, max_iters: int = 10) -> VadResult:
    """Two-component 1-D EM on log energies; keep frames the louder Gaussian explains better.

    Component likelihoods are compared without the mixture priors. When every
    energy is identical no split exists: all frames are kept and ``degenerate``
    is set.
    """
    e = np.asarray(energies, dtype=np.float64).ravel()
    if e.shape[0] != feats.num_frames:
        raise InvalidDataError(f"{e.shape[0]} energies for {feats.num_frames} frames")
    n = e.shape[0]
    if n == 0:
        return VadResult(np.zeros(0, dtype=bool), True, (0.0, 0.0), (0.0, 0.0))
    lo, hi = float(e.min()), float(e.max())
    total_var = float(e.var())
    if hi - lo <= 0.0 or total_var <= 0.0:
        warnings.warn(f"VAD fit degenerate for {feats.id}: constant energy; keeping all frames")
        return VadResult(np.ones(n, dtype=bool), True, (lo, hi), (0.0, 0.0))

    floor = max(1e-6 * total_var, 1e-12)
    mu = np.array([lo, hi])
    var = np.array([total_var, total_var])
    w = np.array([0.5, 0.5])
    for _ in range(max_iters):
        logp = np.stack([np.log(w[k]) + _log_normal(e, mu[k], var[k]) for k in range(2)], axis=1)
        logp -= logp.max(axis=1, keepdims=True)
        resp = np.exp(logp)
        resp /= resp.sum(axis=1, keepdims=True)
        nk = resp.sum(axis=0)
        if np.any(nk <= 0):
            break
        w = nk / n
        mu = (resp * e[:, None]).sum(axis=0) / nk
        var = np.maximum((resp * (e[:, None] - mu) ** 2).sum(axis=0) / nk, floor)

    order = np.argsort(mu)
    mu, var = mu[order], var[order]
    mask = _log_normal(e, mu[1], var[1]) > _log_normal(e, mu[0], var[0])
    return VadResult(mask, False, (float(mu[0]), float(mu[1])), (float(var[0]), float(var[1])))


def features_from_audio(audio: AudioBuffer, cfg: MfccConfig = MfccConfig(),
                        vad: bool = True) -> FeatureMatrix:
    """Full front end: static MFCCs, VAD on log energy, then deltas over retained frames."""
    static = extract_mfcc(audio, cfg)
    if vad and static.num_frames:
        static = static.select(bigaussian_vad(static, frame_log_energy(audio, cfg)).mask)
    return append_deltas(static, cfg.delta_window)


# --- file formats -----------------------------------------------------------

def read_wav(path) -> AudioBuffer:
    """Mono 16-bit PCM WAV, scaled to [-1, 1)."""
    if not os.path.exists(path):
        raise MissingFileError(f"no such file: {path}")
    try:
        with wave.open(str(path), "rb") as wf:
            if wf.getnchannels() != 1 or wf.getsampwidth() != 2:
                raise FormatError(f"{path}: expected mono 16-bit PCM")
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return AudioBuffer(samples, rate, os.path.splitext(os.path.basename(str(path)))[0])


def write_wav(path, audio: AudioBuffer):
    pcm = np.clip(np.round(audio.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(audio.sample_rate))
        wf.writeframes(pcm.tobytes())


def format_features(feats: FeatureMatrix) -> str:
    lines = [f"SSDFEAT v1 {feats.id} {feats.num_frames} {feats.dim} {feats.frame_rate_hz!r}"]
    # repr is the shortest string that parses back to the identical double.
    lines.extend(" ".join(map(repr, row)) for row in feats.frames.tolist())
    return "\n".join(lines) + "\n"


def parse_features(text: str, source: str = "<string>") -> FeatureMatrix:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{source}: empty feature file")
    head = lines[0].split()
    if len(head) != 6 or head[:2] != ["SSDFEAT", "v1"]:
        raise FormatError(f"{source}: bad SSDFEAT header")
    try:
        n, d, rate = int(head[3]), int(head[4]), float(head[5])
        rows = [[float(v) for v in ln.split()] for ln in lines[1:]]
    except ValueError as exc:
        raise FormatError(f"{source}: {exc}") from exc
    if len(rows) != n or any(len(r) != d for r in rows):
        raise FormatError(f"{source}: expected {n} rows of {d} values")
    frames = np.array(rows, dtype=np.float64).reshape(n, d)
    return FeatureMatrix(frames, rate, head[2])


def read_features(path) -> FeatureMatrix:
    if not os.path.exists(path):
        raise MissingFileError(f"no such file: {path}")
    with open(path) as fh:
        return parse_features(fh.read(), str(path))
