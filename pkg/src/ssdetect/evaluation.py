"""EER/DET computation and per-attack reporting.

Score polarity is fixed: higher means more natural. A trial is accepted as
natural at threshold t when ``score >= t``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLabelsError, FormatError, InvalidDataError, MissingFileError

NATURAL = "natural"
SPOOF = "spoof"


@dataclass(frozen=True)
class Trial:
    id: str
    label: str
    attack: str
    score: float

    def __post_init__(self):
        if self.label not in (NATURAL, SPOOF):
            raise InvalidDataError(f"trial label must be natural or spoof, got {self.label!r}")
        if not np.isfinite(self.score):
            raise InvalidDataError(f"non-finite score for {self.id}")


@dataclass
class TrialSet:
    trials: list
    known_attacks: frozenset = field(default_factory=frozenset)

    def scores(self, label: str) -> np.ndarray:
        return np.array([t.score for t in self.trials if t.label == label], dtype=np.float64)

    @property
    def attacks(self) -> list:
        return sorted({t.attack for t in self.trials if t.label == SPOOF})

    def subset(self, attacks) -> "TrialSet":
        """Natural trials plus spoofed trials from ``attacks``."""
        attacks = set(attacks)
        keep = [t for t in self.trials if t.label == NATURAL or t.attack in attacks]
        return TrialSet(keep, self.known_attacks)


def _split(trials_or_scores, spoof=None):
    if spoof is not None:
        return np.asarray(trials_or_scores, dtype=np.float64), np.asarray(spoof, dtype=np.float64)
    return trials_or_scores.scores(NATURAL), trials_or_scores.scores(SPOOF)


def det_points(trials, spoof=None):
    """(thresholds, far, frr) over the sorted unique scores plus a final +inf threshold.

    Either pass a TrialSet, or natural and spoof score arrays.
    """
    nat, spf = _split(trials, spoof)
    if nat.size == 0 or spf.size == 0:
        raise DegenerateLabelsError("EER needs both natural and spoofed trials")
    thresholds = np.append(np.unique(np.concatenate([nat, spf])), np.inf)
    nat_s, spf_s = np.sort(nat), np.sort(spf)
    far = 1.0 - np.searchsorted(spf_s, thresholds, side="left") / spf_s.size
    frr = np.searchsorted(nat_s, thresholds, side="left") / nat_s.size
    return thresholds, far, frr


def _crossing(thresholds, far, frr):
    d = far - frr
    k = int(np.argmax(d <= 0))  # d[-1] = -1, so a crossing always exists
    if d[k] == 0 or k == 0:
        return float(far[k]), float(thresholds[k])
    a = d[k - 1] / (d[k - 1] - d[k])
    eer = far[k - 1] + a * (far[k] - far[k - 1])
    upper = thresholds[k] if np.isfinite(thresholds[k]) else thresholds[k - 1]
    return float(eer), float(thresholds[k - 1] + a * (upper - thresholds[k - 1]))


def compute_eer(trials, spoof=None) -> float:
    """EER with linear interpolation between the DET points bracketing FAR = FRR."""
    return _crossing(*det_points(trials, spoof))[0]


def eer_threshold(trials, spoof=None) -> float:
    return _crossing(*det_points(trials, spoof))[1]


# --- reporting --------------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    label: str
    eer: float | None  # None when the row has no spoofed trials


def per_attack_report(trials: TrialSet) -> list:
    """One row per attack id, then Known / Unknown / All aggregates."""
    nat = trials.scores(NATURAL)
    if nat.size == 0:
        raise DegenerateLabelsError("report needs natural trials")
    rows = []
    attacks = trials.attacks
    for a in attacks:
        rows.append(ReportRow(a, compute_eer(trials.subset([a]))))
    known = [a for a in attacks if a in trials.known_attacks]
    unknown = [a for a in attacks if a not in trials.known_attacks]
    for name, group in (("Known", known), ("Unknown", unknown), ("All", attacks)):
        rows.append(ReportRow(name, compute_eer(trials.subset(group)) if group else None))
    return rows


def _pct(eer):
    return "-" if eer is None else f"{100.0 * eer:.2f}"


def format_report_rows(rows) -> str:
    """Machine-readable ``<row_label> <eer_percent>`` lines."""
    return "".join(f"{r.label} {_pct(r.eer)}\n" for r in rows)


def format_report_table(columns: dict) -> str:
    """Aligned text table, one column per detector, EER in percent."""
    names = list(columns)
    row_labels = [r.label for r in columns[names[0]]]
    width = max([len(n) for n in names] + [8])
    first = max(len(lbl) for lbl in row_labels + ["Attack"])
    lines = ["Attack".ljust(first) + "".join(n.rjust(width + 2) for n in names)]
    lines.append("-" * len(lines[0]))
    for i, lbl in enumerate(row_labels):
        if lbl == "Known":
            lines.append("-" * len(lines[0]))
        cells = [_pct(columns[n][i].eer) for n in names]
        lines.append(lbl.ljust(first) + "".join(c.rjust(width + 2) for c in cells))
    return "\n".join(lines) + "\n"


def format_trials(trials) -> str:
    items = trials.trials if isinstance(trials, TrialSet) else trials
    return "".join(f"{t.id} {t.label} {t.attack} {format(float(t.score), '.17g')}\n"
                   for t in sorted(items, key=lambda t: t.id))


def parse_trials(text: str, known_attacks=(), source: str = "<string>") -> TrialSet:
    out = []
    for ln in text.splitlines():
        parts = ln.split()
        if not parts:
            continue
        if len(parts) != 4:
            raise FormatError(f"{source}: expected '<id> <label> <attack> <score>' lines")
        try:
            out.append(Trial(parts[0], parts[1], parts[2], float(parts[3])))
        except (ValueError, InvalidDataError) as exc:
            raise FormatError(f"{source}: {exc}") from exc
    return TrialSet(out, frozenset(known_attacks))


def read_trials(path, known_attacks=()) -> TrialSet:
    if not os.path.exists(path):
        raise MissingFileError(f"no such file: {path}")
    with open(path) as fh:
        return parse_trials(fh.read(), known_attacks, str(path))
