"""Likelihood-ratio scoring: whole-utterance baseline and per-group scores."""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

from .errors import (AlreadyWeightedError, DimensionMismatchError, FormatError,
                     MissingFileError, NoSpeechError)
from .features import FeatureMatrix
from .gmm import DiagGmm, frame_log_likelihoods
from .grouping import UNASSIGNED, GroupAssignment


@dataclass(frozen=True, eq=False)
class GroupScoreVector:
    scheme: str
    scores: np.ndarray
    counts: np.ndarray
    total_frames: int
    id: str = "utt"
    weighted: bool = False
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "scores", np.asarray(self.scores, dtype=np.float64))
        object.__setattr__(self, "counts", np.asarray(self.counts, dtype=np.int64))
        if self.scores.shape != self.counts.shape:
            raise DimensionMismatchError("scores and counts differ in length")

    @property
    def num_groups(self) -> int:
        return self.scores.shape[0]


def frame_llr(feats: FeatureMatrix, nat: DiagGmm, syn: DiagGmm) -> np.ndarray:
    x = getattr(feats, "frames", feats)
    if nat.dim != syn.dim or np.shape(x)[1] != nat.dim:
        raise DimensionMismatchError("feature and model dimensions disagree")
    return frame_log_likelihoods(nat, x) - frame_log_likelihoods(syn, x)


def baseline_llr(feats: FeatureMatrix, nat: DiagGmm, syn: DiagGmm) -> float:
    if feats.num_frames == 0:
        raise NoSpeechError(f"no frames to score in {feats.id}")
    return float(np.mean(frame_llr(feats, nat, syn)))


def scores_from_llr(llr: np.ndarray, assign: GroupAssignment, utt_id: str = "utt",
                    label: str | None = None) -> GroupScoreVector:
    """Group means of precomputed frame LLRs. Empty groups score 0."""
    llr = np.asarray(llr, dtype=np.float64)
    if llr.shape[0] != assign.index.shape[0]:
        raise DimensionMismatchError("assignment length differs from frame count")
    keep = assign.index != UNASSIGNED
    idx = assign.index[keep]
    counts = np.bincount(idx, minlength=assign.num_groups)
    sums = np.bincount(idx, weights=llr[keep], minlength=assign.num_groups)
    scores = np.zeros(assign.num_groups)
    nz = counts > 0
    scores[nz] = sums[nz] / counts[nz]
    return GroupScoreVector(assign.scheme, scores, counts, int(llr.shape[0]), utt_id,
                            False, label)


def group_scores(feats: FeatureMatrix, assign: GroupAssignment, nat: DiagGmm,
                 syn: DiagGmm, label: str | None = None) -> GroupScoreVector:
    return scores_from_llr(frame_llr(feats, nat, syn), assign, feats.id, label)


def duration_weight(scores: GroupScoreVector) -> GroupScoreVector:
    """Scale each group score by ln(N_j + 1)."""
    if scores.weighted:
        raise AlreadyWeightedError(f"scores for {scores.id} are already duration weighted")
    return replace(scores, scores=np.log(scores.counts + 1.0) * scores.scores, weighted=True)


# --- file format ------------------------------------------------------------

def _scheme_token(vec: GroupScoreVector) -> str:
    return vec.scheme + ("+dw" if vec.weighted else "")


def format_scores(vectors) -> str:
    """Lines of ``<id> <label?> S_1..S_J N_1..N_J`` under one header, sorted by id."""
    vectors = sorted(vectors, key=lambda v: v.id)
    if not vectors:
        raise FormatError("no score vectors to write")
    head = vectors[0]
    lines = [f"SSDSCORES v1 {_scheme_token(head)} {head.num_groups}"]
    for v in vectors:
        if v.num_groups != head.num_groups or _scheme_token(v) != _scheme_token(head):
            raise DimensionMismatchError("mixed schemes or group counts in one score file")
        fields = [v.id] + ([v.label] if v.label else [])
        fields += [format(float(s), ".17g") for s in v.scores]
        fields += [str(int(n)) for n in v.counts]
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


def parse_scores(text: str, source: str = "<string>") -> list:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split() if lines else []
    if len(head) != 4 or head[:2] != ["SSDSCORES", "v1"]:
        raise FormatError(f"{source}: bad SSDSCORES header")
    token, j = head[2], int(head[3])
    scheme, weighted = (token[:-3], True) if token.endswith("+dw") else (token, False)
    out = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) == 1 + 2 * j:
            uid, label, rest = parts[0], None, parts[1:]
        elif len(parts) == 2 + 2 * j:
            uid, label, rest = parts[0], parts[1], parts[2:]
        else:
            raise FormatError(f"{source}: expected {2 * j} values per line")
        try:
            scores = np.array(rest[:j], dtype=np.float64)
            counts = np.array(rest[j:], dtype=np.int64)
        except ValueError as exc:
            raise FormatError(f"{source}: {exc}") from exc
        out.append(GroupScoreVector(scheme, scores, counts, int(counts.sum()), uid,
                                    weighted, label))
    return out


def read_scores(path) -> list:
    if not os.path.exists(path):
        raise MissingFileError(f"no such file: {path}")
    with open(path) as fh:
        return parse_scores(fh.read(), str(path))
