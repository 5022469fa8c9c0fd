"""Diagonal-covariance GMMs: k-means seeding, EM, mean-only MAP adaptation, scoring."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import (DimensionMismatchError, FormatError, InsufficientDataError,
                     InvalidDataError, MissingFileError, NumericalFailureError)

LOG_2PI = math.log(2.0 * math.pi)
_CHUNK = 4096


@dataclass(frozen=True, eq=False)
class DiagGmm:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        m = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        v = np.atleast_2d(np.asarray(self.variances, dtype=np.float64))
        if m.shape != v.shape or m.shape[0] != w.shape[0]:
            raise InvalidDataError(f"inconsistent GMM shapes {w.shape} {m.shape} {v.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(m)) and np.all(np.isfinite(v))):
            raise InvalidDataError("non-finite GMM parameters")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
            raise InvalidDataError("GMM weights must be positive and sum to 1")
        if np.any(v <= 0):
            raise InvalidDataError("GMM variances must be positive")
        for name, arr in (("weights", w), ("means", m), ("variances", v)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_components(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def __eq__(self, other):
        if not isinstance(other, DiagGmm):
            return NotImplemented
        return (np.array_equal(self.weights, other.weights)
                and np.array_equal(self.means, other.means)
                and np.array_equal(self.variances, other.variances))


@dataclass(frozen=True)
class TrainConfig:
    num_components: int = 64
    max_em_iters: int = 100
    rel_ll_tolerance: float = 1e-5
    variance_floor_factor: float = 1e-3
    kmeans_iters: int = 20
    seed: int = 0
    map_relevance_factor: float = 16.0

    def __post_init__(self):
        if self.num_components < 1:
            raise InvalidDataError("num_components must be >= 1")
        if self.rel_ll_tolerance <= 0 or self.variance_floor_factor <= 0:
            raise InvalidDataError("tolerances must be positive")
        if self.map_relevance_factor < 0:
            raise InvalidDataError("relevance factor must be >= 0")


def _as_data(data, dim=None) -> np.ndarray:
    x = np.asarray(getattr(data, "frames", data), dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if dim is not None and x.shape[1] != dim:
        raise DimensionMismatchError(f"data dim {x.shape[1]} != model dim {dim}")
    return x


def variance_floor(data, factor: float) -> np.ndarray:
    x = _as_data(data)
    g = x.var(axis=0)
    # Constant dimensions still need a strictly positive floor.
    return np.maximum(factor * g, np.finfo(np.float64).tiny * 1e10)


# --- evaluation -------------------------------------------------------------

def component_log_densities(gmm: DiagGmm, data) -> np.ndarray:
    """(N, K) matrix of ln w_k + ln N(x_i; m_k, diag v_k)."""
    x = _as_data(data, gmm.dim)
    const = np.log(gmm.weights) - 0.5 * (gmm.dim * LOG_2PI + np.log(gmm.variances).sum(axis=1))
    inv = 1.0 / gmm.variances
    out = np.empty((x.shape[0], gmm.num_components))
    for start in range(0, x.shape[0], _CHUNK):
        diff = x[start:start + _CHUNK, None, :] - gmm.means[None, :, :]
        out[start:start + _CHUNK] = const - 0.5 * np.einsum("nkd,kd->nk", diff * diff, inv)
    return out


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    top = a.max(axis=1)
    return top + np.log(np.exp(a - top[:, None]).sum(axis=1))


def frame_log_likelihoods(gmm: DiagGmm, data) -> np.ndarray:
    return _logsumexp_rows(component_log_densities(gmm, data))


def log_likelihood(gmm: DiagGmm, frame) -> float:
    frame = np.asarray(frame, dtype=np.float64).ravel()
    if frame.shape[0] != gmm.dim:
        raise DimensionMismatchError(f"frame dim {frame.shape[0]} != model dim {gmm.dim}")
    return float(frame_log_likelihoods(gmm, frame[None, :])[0])


def align(gmm: DiagGmm, feats) -> np.ndarray:
    """Hard alignment: index of the best weighted component per frame (lowest index on ties)."""
    return np.argmax(component_log_densities(gmm, feats), axis=1)


# --- k-means ----------------------------------------------------------------

def _sq_dists(x, c):
    d = np.empty((x.shape[0], c.shape[0]))
    for start in range(0, x.shape[0], _CHUNK):
        diff = x[start:start + _CHUNK, None, :] - c[None, :, :]
        d[start:start + _CHUNK] = np.einsum("nkd,nkd->nk", diff, diff)
    return d


def kmeans(data, k: int, seed: int = 0, max_iters: int = 20):
    """Lloyd's algorithm with a fixed, reproducible rule set.

    Initial centroids are ``k`` distinct rows picked by
    ``np.random.default_rng(seed).choice(n, k, replace=False)``. Each pass
    assigns points to the nearest centroid (lowest index wins ties); an empty
    cluster is re-seeded at the point farthest from its own centroid (lowest
    index on ties) and assignment is redone. Stops once assignments repeat.
    Returns ``(centroids, labels)``.
    """
    x = _as_data(data)
    n = x.shape[0]
    if n < k:
        raise InsufficientDataError(f"{n} frames cannot seed {k} clusters")
    rng = np.random.default_rng(seed)
    centroids = x[rng.choice(n, size=k, replace=False)].copy()
    labels = None
    for _ in range(max(1, max_iters)):
        d = _sq_dists(x, centroids)
        new = np.argmin(d, axis=1)
        for _guard in range(k):
            counts = np.bincount(new, minlength=k)
            empty = np.flatnonzero(counts == 0)
            if empty.size == 0:
                break
            own = d[np.arange(n), new]
            far = int(np.argmax(own))
            centroids[empty[0]] = x[far]
            d[:, empty[0]] = np.sum((x - x[far]) ** 2, axis=1)
            new = np.argmin(d, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, x)
        nz = counts > 0
        centroids[nz] = sums[nz] / counts[nz, None]
    return centroids, labels


def kmeans_init(data, k: int, seed: int = 0, max_iters: int = 20,
                variance_floor_factor: float = 1e-3) -> DiagGmm:
    x = _as_data(data)
    centroids, labels = kmeans(x, k, seed, max_iters)
    floor = variance_floor(x, variance_floor_factor)
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    means = np.zeros_like(centroids)
    variances = np.zeros_like(centroids)
    for j in range(k):
        members = x[labels == j]
        means[j] = members.mean(axis=0)
        variances[j] = members.var(axis=0)
    return DiagGmm(counts / counts.sum(), means, np.maximum(variances, floor))


# --- EM ---------------------------------------------------------------------

@dataclass
class SufficientStats:
    """Zeroth/first/second-order statistics; ``+`` merges partitions of the data."""

    n: np.ndarray
    f: np.ndarray
    s: np.ndarray
    loglik: float = 0.0
    count: int = 0

    def __add__(self, other: "SufficientStats") -> "SufficientStats":
        return SufficientStats(self.n + other.n, self.f + other.f, self.s + other.s,
                               self.loglik + other.loglik, self.count + other.count)


def posteriors(gmm: DiagGmm, data):
    """Responsibilities (N, K) and per-frame log likelihoods (N,)."""
    lp = component_log_densities(gmm, data)
    ll = _logsumexp_rows(lp)
    return np.exp(lp - ll[:, None]), ll


def accumulate(gmm: DiagGmm, data) -> SufficientStats:
    x = _as_data(data, gmm.dim)
    gamma, ll = posteriors(gmm, x)
    return SufficientStats(gamma.sum(axis=0), gamma.T @ x, gamma.T @ (x * x),
                           float(ll.sum()), x.shape[0])


def maximize(stats: SufficientStats, previous: DiagGmm, floor: np.ndarray) -> DiagGmm:
    n = stats.n
    live = n > 1e-10
    safe = np.where(live, n, 1.0)[:, None]
    means = np.where(live[:, None], stats.f / safe, previous.means)
    variances = np.where(live[:, None], stats.s / safe - means ** 2, previous.variances)
    variances = np.maximum(variances, floor)
    weights = np.where(live, n, 1e-10)
    return DiagGmm(weights / weights.sum(), means, variances)


def train_em(init: DiagGmm, data, cfg: TrainConfig = TrainConfig()):
    """EM from ``init``. Returns ``(model, trace)``.

    ``trace[t]`` is the total data log likelihood after ``t`` iterations, so
    ``trace[0]`` scores ``init`` and ``trace[-1]`` scores the returned model.
    """
    x = _as_data(data, init.dim)
    floor = variance_floor(x, cfg.variance_floor_factor)
    model = init
    trace = []
    for it in range(cfg.max_em_iters + 1):
        stats = accumulate(model, x)
        if not (np.isfinite(stats.loglik) and np.all(np.isfinite(stats.n))):
            raise NumericalFailureError(f"non-finite responsibilities at EM iteration {it}")
        trace.append(stats.loglik)
        if it > 0 and (trace[-1] - trace[-2]) <= cfg.rel_ll_tolerance * abs(trace[-2]):
            break
        if it == cfg.max_em_iters:
            break
        model = maximize(stats, model, floor)
    return model, np.array(trace)


def train_gmm(data, cfg: TrainConfig = TrainConfig()):
    """k-means seeded EM, the recipe for independently trained models."""
    init = kmeans_init(data, cfg.num_components, cfg.seed, cfg.kmeans_iters,
                       cfg.variance_floor_factor)
    return train_em(init, data, cfg)


def map_adapt(ubm: DiagGmm, data, relevance: float = 16.0) -> DiagGmm:
    """Mean-only MAP: m'_k = (sum_i g_ik x_i + r m_k) / (n_k + r)."""
    if relevance < 0:
        raise InvalidDataError("relevance factor must be >= 0")
    x = _as_data(data, ubm.dim)
    gamma, _ = posteriors(ubm, x)
    n = gamma.sum(axis=0)
    f = gamma.T @ x
    denom = n + relevance
    safe = np.where(denom > 0, denom, 1.0)[:, None]
    means = np.where(denom[:, None] > 0, (f + relevance * ubm.means) / safe, ubm.means)
    return DiagGmm(ubm.weights.copy(), means, ubm.variances.copy())


# --- file format ------------------------------------------------------------

def _fmt(row) -> str:
    return " ".join(format(float(v), ".17g") for v in row)


def format_gmm(gmm: DiagGmm) -> str:
    lines = [f"SSDGMM v1 {gmm.num_components} {gmm.dim}", _fmt(gmm.weights)]
    lines += [_fmt(r) for r in gmm.means]
    lines += [_fmt(r) for r in gmm.variances]
    return "\n".join(lines) + "\n"


def parse_gmm(text: str, source: str = "<string>") -> DiagGmm:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split() if lines else []
    if len(head) != 4 or head[:2] != ["SSDGMM", "v1"]:
        raise FormatError(f"{source}: bad SSDGMM header")
    try:
        k, d = int(head[2]), int(head[3])
        rows = [np.array(ln.split(), dtype=np.float64) for ln in lines[1:]]
    except ValueError as exc:
        raise FormatError(f"{source}: {exc}") from exc
    if len(rows) != 1 + 2 * k or rows[0].size != k or any(r.size != d for r in rows[1:]):
        raise FormatError(f"{source}: expected 1 + 2*{k} rows")
    try:
        return DiagGmm(rows[0], np.vstack(rows[1:1 + k]), np.vstack(rows[1 + k:]))
    except InvalidDataError as exc:
        raise FormatError(f"{source}: {exc}") from exc


def read_gmm(path) -> DiagGmm:
    if not os.path.exists(path):
        raise MissingFileError(f"no such file: {path}")
    with open(path) as fh:
        return parse_gmm(fh.read(), str(path))
