"""Frame grouping by aligned Gaussian, by phoneme, or by broad sound class."""

from __future__ import annotations

import os
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import FormatError, InvalidDataError, MissingFileError, UnknownLabelError
from .features import FeatureMatrix
from .gmm import DiagGmm, align

UNASSIGNED = -1
SOUND_CLASSES = ("vowel", "nasal", "glide", "stop", "rest")
SCHEMES = ("gaussian", "phoneme", "class")


@dataclass(frozen=True, eq=False)
class GroupAssignment:
    scheme: str
    labels: tuple
    index: np.ndarray  # per frame, UNASSIGNED for alignment gaps

    def __post_init__(self):
        idx = np.asarray(self.index, dtype=np.int64)
        labels = tuple(self.labels)
        if len(set(labels)) != len(labels):
            raise InvalidDataError("group labels must be unique")
        if idx.size and (idx.max() >= len(labels) or idx.min() < UNASSIGNED):
            raise InvalidDataError("group index out of range")
        object.__setattr__(self, "index", idx)
        object.__setattr__(self, "labels", labels)

    @property
    def num_groups(self) -> int:
        return len(self.labels)

    def counts(self) -> np.ndarray:
        assigned = self.index[self.index != UNASSIGNED]
        return np.bincount(assigned, minlength=self.num_groups)


@dataclass(frozen=True)
class PhonemeAlignment:
    segments: tuple  # of (start_s, end_s, label)
    id: str = "utt"

    def __post_init__(self):
        segs = tuple((float(s), float(e), str(p)) for s, e, p in self.segments)
        prev_end = -np.inf
        for s, e, p in segs:
            if not (0.0 <= s < e):
                raise InvalidDataError(f"bad segment ({s}, {e}, {p}) in {self.id}")
            if s < prev_end:
                raise InvalidDataError(f"segments overlap or are out of order in {self.id}")
            prev_end = e
        object.__setattr__(self, "segments", segs)


@dataclass(frozen=True)
class ClassMap:
    mapping: dict

    def __post_init__(self):
        bad = {c for c in self.mapping.values() if c not in SOUND_CLASSES}
        if bad:
            raise InvalidDataError(f"unknown sound classes {sorted(bad)}")

    @property
    def phonemes(self) -> list:
        return list(self.mapping)

    def __getitem__(self, phoneme):
        try:
            return self.mapping[phoneme]
        except KeyError:
            raise UnknownLabelError(f"phoneme {phoneme!r} is not in the class map") from None


def group_by_gaussian(nat_gmm: DiagGmm, feats: FeatureMatrix) -> GroupAssignment:
    labels = tuple(f"g{k}" for k in range(nat_gmm.num_components))
    return GroupAssignment("gaussian", labels, align(nat_gmm, feats))


def frame_phonemes(alignment: PhonemeAlignment, feats: FeatureMatrix,
                   frame_length_s: float = 0.025) -> list:
    """Phoneme label under each frame's center time, or None inside gaps.

    Segments are half-open [start, end), so a center exactly on a boundary
    belongs to the later segment.
    """
    centers = feats.frame_index / feats.frame_rate_hz + frame_length_s / 2.0
    starts = np.array([s for s, _, _ in alignment.segments])
    ends = np.array([e for _, e, _ in alignment.segments])
    out = [None] * len(centers)
    if not alignment.segments:
        return out
    pos = np.searchsorted(starts, centers, side="right") - 1
    for i, (c, k) in enumerate(zip(centers, pos)):
        if k >= 0 and c < ends[k]:
            out[i] = alignment.segments[k][2]
    return out


def group_by_phoneme(alignment: PhonemeAlignment, feats: FeatureMatrix, phoneme_set,
                     frame_length_s: float = 0.025) -> GroupAssignment:
    labels = tuple(phoneme_set)
    lookup = {p: j for j, p in enumerate(labels)}
    for _, _, p in alignment.segments:
        if p not in lookup:
            raise UnknownLabelError(f"phoneme {p!r} in {alignment.id} is not in the phoneme set")
    per_frame = frame_phonemes(alignment, feats, frame_length_s)
    index = [UNASSIGNED if p is None else lookup[p] for p in per_frame]
    return GroupAssignment("phoneme", labels, np.array(index, dtype=np.int64))


def group_by_class(alignment: PhonemeAlignment, feats: FeatureMatrix, class_map: ClassMap,
                   frame_length_s: float = 0.025) -> GroupAssignment:
    lookup = {c: j for j, c in enumerate(SOUND_CLASSES)}
    for _, _, p in alignment.segments:
        class_map[p]
    per_frame = frame_phonemes(alignment, feats, frame_length_s)
    index = [UNASSIGNED if p is None else lookup[class_map[p]] for p in per_frame]
    return GroupAssignment("class", SOUND_CLASSES, np.array(index, dtype=np.int64))


# --- files ------------------------------------------------------------------

def _data_lines(text):
    for ln in text.splitlines():
        ln = ln.split("#", 1)[0].strip()
        if ln:
            yield ln.split()


def parse_class_map(text: str, source: str = "<string>") -> ClassMap:
    mapping = {}
    for parts in _data_lines(text):
        if len(parts) != 2:
            raise FormatError(f"{source}: expected '<phoneme> <class>' lines")
        mapping[parts[0]] = parts[1]
    try:
        return ClassMap(mapping)
    except InvalidDataError as exc:
        raise FormatError(f"{source}: {exc}") from exc


def read_class_map(path) -> ClassMap:
    if not os.path.exists(path):
        raise MissingFileError(f"no such file: {path}")
    with open(path) as fh:
        return parse_class_map(fh.read(), str(path))


def default_class_map() -> ClassMap:
    text = resources.files("ssdetect").joinpath("data/classmap.txt").read_text()
    return parse_class_map(text, "classmap.txt")


def parse_alignment(text: str, utt_id: str = "utt", source: str = "<string>") -> PhonemeAlignment:
    segs = []
    for parts in _data_lines(text):
        if len(parts) != 3:
            raise FormatError(f"{source}: expected 'start end phoneme' lines")
        try:
            segs.append((float(parts[0]), float(parts[1]), parts[2]))
        except ValueError as exc:
            raise FormatError(f"{source}: {exc}") from exc
    try:
        return PhonemeAlignment(tuple(segs), utt_id)
    except InvalidDataError as exc:
        raise FormatError(f"{source}: {exc}") from exc


def read_alignment(path, utt_id: str | None = None) -> PhonemeAlignment:
    if not os.path.exists(path):
        raise MissingFileError(f"no such file: {path}")
    if utt_id is None:
        utt_id = os.path.splitext(os.path.basename(str(path)))[0]
    with open(path) as fh:
        return parse_alignment(fh.read(), utt_id, str(path))


def format_alignment(alignment: PhonemeAlignment) -> str:
    return "".join(f"{s!r} {e!r} {p}\n" for s, e, p in alignment.segments)
