"""File-level pipeline stages shared by the command line and the demo run.

Stages talk to each other only through the documented text formats:

    manifest  ``<feature_or_wav_path> <label> <attack>`` per line
    features  SSDFEAT v1, phoneme alignment in a sibling ``.lab`` file
    models    SSDGMM v1 (``nat.gmm``, ``syn_adapt.gmm``, ``syn_noadapt.gmm``)
    scores    SSDSCORES v1, one file per scheme
    fusion    SSDFUSE v1
    trials    ``<id> <label> <attack> <score>`` per line

Every writer goes through a temp file and a rename, and every output lists
utterances sorted by id.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .attacksim import generate_corpus, write_corpus
from .config import PipelineConfig
from .errors import (DimensionMismatchError, FormatError, InsufficientDataError,
                     InvalidDataError, MissingFileError, NoSpeechError,
                     UnknownLabelError)
from .evaluation import (NATURAL, SPOOF, Trial, TrialSet, format_report_rows,
                         format_report_table, format_trials, per_attack_report, read_trials)
from .features import features_from_audio, format_features, read_features, read_wav
from .fusion import (FusionModel, apply_fusion, format_fusion, read_fusion, train_fusion)
from .gmm import (DiagGmm, component_log_densities, format_gmm, frame_log_likelihoods, map_adapt,
                  read_gmm, train_gmm)
from .grouping import (GroupAssignment, default_class_map, format_alignment, group_by_class,
                       group_by_phoneme, read_alignment, read_class_map)
from .scoring import (GroupScoreVector, duration_weight, format_scores, read_scores,
                      scores_from_llr)

MODEL_FILES = {"nat": "nat.gmm", "syn_adapt": "syn_adapt.gmm", "syn_noadapt": "syn_noadapt.gmm"}
BASELINE = "baseline"


def atomic_write(path, text: str):
    path = str(path)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


# --- manifests --------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    path: str  # resolved against the manifest's directory
    label: str
    attack: str

    @property
    def stem(self) -> str:
        return os.path.splitext(os.path.basename(self.path))[0]


def parse_manifest(text: str, base_dir: str = ".", source: str = "<string>") -> list:
    out = []
    for n, ln in enumerate(text.splitlines(), 1):
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        parts = ln.split()
        if len(parts) != 3:
            raise FormatError(f"{source}:{n}: expected '<path> <label> <attack>'")
        path, label, attack = parts
        if label not in (NATURAL, SPOOF):
            raise FormatError(f"{source}:{n}: label must be natural or spoof, got {label!r}")
        out.append(ManifestEntry(os.path.join(base_dir, path), label, attack))
    if not out:
        raise InsufficientDataError(f"{source}: manifest lists no utterances")
    return out


def read_manifest(path) -> list:
    if not os.path.exists(path):
        raise MissingFileError(f"no such file: {path}")
    with open(path) as fh:
        return parse_manifest(fh.read(), os.path.dirname(os.path.abspath(path)), str(path))


def format_manifest(entries, base_dir: str) -> str:
    rows = sorted((os.path.relpath(e.path, base_dir), e.label, e.attack) for e in entries)
    return "".join(" ".join(r) + "\n" for r in rows)


def alignment_path(feature_path: str) -> str:
    return os.path.splitext(feature_path)[0] + ".lab"


def load_features(entries) -> list:
    """Feature matrices in manifest order, with the manifest label and attack attached."""
    return [(e, read_features(e.path)) for e in entries]


def class_map_for(cfg: PipelineConfig):
    return read_class_map(cfg.class_map) if cfg.class_map else default_class_map()


# --- extract ----------------------------------------------------------------

def cmd_extract(manifest_path, out_dir, cfg: PipelineConfig) -> str:
    """Audio manifest to feature files plus a feature manifest (returned path)."""
    entries = read_manifest(manifest_path)
    feat_dir = os.path.join(out_dir, "feats")
    written = []
    for e in entries:
        audio = read_wav(e.path)
        feats = features_from_audio(audio, cfg.mfcc(), vad=cfg.vad)
        out = os.path.join(feat_dir, e.stem + ".feat")
        atomic_write(out, format_features(feats))
        lab = alignment_path(e.path)
        if os.path.exists(lab):
            atomic_write(alignment_path(out), format_alignment(read_alignment(lab, e.stem)))
        written.append(ManifestEntry(out, e.label, e.attack))
    path = os.path.join(out_dir, "features.lst")
    atomic_write(path, format_manifest(written, out_dir))
    return path


# --- train ------------------------------------------------------------------

def train_models(nat_frames, syn_frames, cfg: PipelineConfig) -> dict:
    """Natural GMM, its MAP-adapted synthetic twin, and an independent synthetic GMM."""
    nat, _ = train_gmm(nat_frames, cfg.train())
    syn_adapt = map_adapt(nat, syn_frames, cfg.map_relevance)
    syn_noadapt, _ = train_gmm(syn_frames, cfg.train(offset=1))
    return {"nat": nat, "syn_adapt": syn_adapt, "syn_noadapt": syn_noadapt}


def training_entries(entries, cfg: PipelineConfig) -> list:
    """Drop spoofed utterances of attacks held out as unknown."""
    held = set(cfg.unknown_attacks)
    return [e for e in entries if e.label == NATURAL or e.attack not in held]


def cmd_train(manifest_path, out_dir, cfg: PipelineConfig) -> dict:
    entries = training_entries(read_manifest(manifest_path), cfg)
    data = load_features(entries)
    nat = [f.frames for e, f in data if e.label == NATURAL]
    syn = [f.frames for e, f in data if e.label == SPOOF]
    if not nat or not syn:
        raise InsufficientDataError("training needs both natural and spoofed utterances")
    dims = {f.dim for _, f in data}
    if len(dims) != 1:
        raise DimensionMismatchError(f"feature dimensions differ across utterances: {sorted(dims)}")
    models = train_models(np.vstack(nat), np.vstack(syn), cfg)
    paths = {}
    for name, g in models.items():
        paths[name] = os.path.join(out_dir, MODEL_FILES[name])
        atomic_write(paths[name], format_gmm(g))
    return paths


def load_models(models_dir, variant: str = "adapt"):
    nat = read_gmm(os.path.join(models_dir, MODEL_FILES["nat"]))
    syn = read_gmm(os.path.join(models_dir, MODEL_FILES["syn_" + variant]))
    if nat.dim != syn.dim:
        raise DimensionMismatchError("natural and synthetic models differ in dimension")
    return nat, syn


# --- score ------------------------------------------------------------------

def score_utterance(feats, nat: DiagGmm, syn: DiagGmm, schemes, alignment=None,
                    class_map=None, label=None) -> dict:
    """Group score vectors for each scheme, from one pass of frame LLRs.

    ``baseline`` yields a single group holding every frame, i.e. the plain
    average LLR.
    """
    if feats.dim != nat.dim:
        raise DimensionMismatchError(f"{feats.id}: feature dim {feats.dim} != model dim {nat.dim}")
    if feats.num_frames == 0:
        raise NoSpeechError(f"no frames to score in {feats.id}")
    dens = component_log_densities(nat, feats.frames)
    top = dens.max(axis=1)
    nat_ll = top + np.log(np.exp(dens - top[:, None]).sum(axis=1))
    llr = nat_ll - frame_log_likelihoods(syn, feats.frames)
    out = {}
    for scheme in schemes:
        if scheme == BASELINE:
            assign = GroupAssignment(BASELINE, ("all",), np.zeros(feats.num_frames, np.int64))
        elif scheme == "gaussian":
            assign = GroupAssignment("gaussian", tuple(f"g{k}" for k in range(nat.num_components)),
                                     np.argmax(dens, axis=1))
        elif scheme == "phoneme":
            assign = group_by_phoneme(alignment, feats, class_map.phonemes)
        elif scheme == "class":
            assign = group_by_class(alignment, feats, class_map)
        else:
            raise InvalidDataError(f"unknown scheme {scheme!r}")
        out[scheme] = scores_from_llr(llr, assign, feats.id, label)
    return out


def score_file_name(scheme: str, weighted: bool) -> str:
    return f"{scheme}{'_dw' if weighted else ''}.scores"


def score_entries(entries, nat, syn, schemes, cfg: PipelineConfig) -> dict:
    """{scheme: [GroupScoreVector]} over a manifest."""
    needs_alignment = any(s in ("phoneme", "class") for s in schemes)
    class_map = class_map_for(cfg) if needs_alignment else None
    out = {s: [] for s in schemes}
    for e, feats in load_features(entries):
        ali = read_alignment(alignment_path(e.path), feats.id) if needs_alignment else None
        for s, v in score_utterance(feats, nat, syn, schemes, ali, class_map, e.label).items():
            out[s].append(v)
    return out


def cmd_score(manifest_path, models_dir, out_dir, cfg: PipelineConfig, schemes=None,
              weighted=None, both=False) -> dict:
    """Write one SSDSCORES file per scheme (and weighting) into ``out_dir``."""
    schemes = tuple(schemes or cfg.schemes)
    weighted = cfg.weighted if weighted is None else weighted
    nat, syn = load_models(models_dir, cfg.variant)
    vectors = score_entries(read_manifest(manifest_path), nat, syn, schemes, cfg)
    modes = (False, True) if both else (weighted,)
    paths = {}
    for s, vs in vectors.items():
        for w in modes:
            if w and s == BASELINE:
                continue
            out = [duration_weight(v) for v in vs] if w else vs
            path = os.path.join(out_dir, score_file_name(s, w))
            atomic_write(path, format_scores(out))
            paths[(s, w)] = path
    return paths


# --- fuse -------------------------------------------------------------------

def _header(path) -> str:
    if not os.path.exists(path):
        raise MissingFileError(f"no such file: {path}")
    with open(path) as fh:
        return fh.readline()


def attack_lookup(manifest_path) -> dict:
    """utterance id -> attack, using the feature file stem as id."""
    return {e.stem: (e.label, e.attack) for e in read_manifest(manifest_path)}


def load_trials(path, manifest=None, known_attacks=()) -> TrialSet:
    """A trial file, or a single-group score file turned into trials."""
    if not _header(path).startswith("SSDSCORES"):
        return read_trials(path, known_attacks)
    vectors = read_scores(path)
    if vectors and vectors[0].num_groups != 1:
        raise DimensionMismatchError(f"{path}: only single-group score files are trials")
    lookup = attack_lookup(manifest) if manifest else {}
    return TrialSet([_trial(v, lookup, float(v.scores[0])) for v in vectors],
                    frozenset(known_attacks))


def _trial(vec: GroupScoreVector, lookup, score) -> Trial:
    label, attack = lookup.get(vec.id, (vec.label, None))
    if label is None:
        raise UnknownLabelError(f"no label for utterance {vec.id}")
    if attack is None:
        attack = "human" if label == NATURAL else SPOOF
    return Trial(vec.id, label, attack, score)


def join_trials(trial_sets) -> tuple:
    """Align several trial sets on utterance id -> (ids, labels, attacks, (n, m) scores)."""
    maps = [{t.id: t for t in ts.trials} for ts in trial_sets]
    ids = sorted(maps[0])
    if any(sorted(m) != ids for m in maps[1:]):
        raise DimensionMismatchError("trial files cover different utterances")
    first = maps[0]
    X = np.array([[m[i].score for m in maps] for i in ids], dtype=np.float64).reshape(len(ids), -1)
    return ids, [first[i].label for i in ids], [first[i].attack for i in ids], X


def cmd_fuse_train(inputs, out_path, cfg: PipelineConfig, manifest=None, names=None) -> FusionModel:
    """Stage one: a single SSDSCORES file. Stage two: two or more trial files."""
    held = set(cfg.unknown_attacks)
    if len(inputs) == 1 and _header(inputs[0]).startswith("SSDSCORES"):
        vectors = read_scores(inputs[0])
        if held:
            if manifest is None:
                raise InvalidDataError("withholding attacks from score files needs a manifest")
            lookup = attack_lookup(manifest)
            vectors = [v for v in vectors if lookup.get(v.id, (None, None))[1] not in held]
        labels = [_trial(v, {}, 0.0).label == NATURAL for v in vectors]
        names = names or _group_labels(vectors)
        model = train_fusion(vectors, labels, cfg.fusion_prior, cfg.fusion_l2, input_labels=names)
    else:
        if len(inputs) < 2:
            raise InvalidDataError("second-stage fusion needs at least two trial files")
        ids, labels, attacks, X = join_trials([read_trials(p) for p in inputs])
        keep = np.array([a not in held for a in attacks])
        y = np.array([lbl == NATURAL for lbl in labels])
        names = names or tuple(os.path.splitext(os.path.basename(p))[0] for p in inputs)
        model = train_fusion(X[keep], y[keep], cfg.fusion_prior, cfg.fusion_l2,
                             input_labels=tuple(names), scheme="detectors")
    atomic_write(out_path, format_fusion(model))
    return model


def _group_labels(vectors):
    j = vectors[0].num_groups if vectors else 0
    return tuple(f"j{k}" for k in range(j))


def cmd_fuse_apply(model_path, inputs, out_path, manifest=None) -> TrialSet:
    """Fused trial file from a score file (stage one) or trial files (stage two)."""
    model = read_fusion(model_path)
    if len(inputs) == 1 and _header(inputs[0]).startswith("SSDSCORES"):
        lookup = attack_lookup(manifest) if manifest else {}
        vectors = read_scores(inputs[0])
        trials = [_trial(v, lookup, apply_fusion(model, v)) for v in vectors]
    else:
        ids, labels, attacks, X = join_trials([read_trials(p) for p in inputs])
        fused = apply_fusion(model, X)
        trials = [Trial(i, lbl, a, float(s)) for i, lbl, a, s in zip(ids, labels, attacks, fused)]
    ts = TrialSet(trials)
    atomic_write(out_path, format_trials(ts))
    return ts


# --- eval -------------------------------------------------------------------

def build_report(columns: dict) -> str:
    """Aligned table followed by ``<row> <pct>`` lines per column."""
    parts = [format_report_table(columns)]
    for name, rows in columns.items():
        parts.append(f"\n[{name}]\n" + format_report_rows(rows))
    return "".join(parts)


def cmd_eval(trial_paths, known_attacks=None, out_path=None, names=None, manifest=None) -> str:
    columns = {}
    names = names or [os.path.splitext(os.path.basename(p))[0] for p in trial_paths]
    for name, path in zip(names, trial_paths):
        ts = load_trials(path, manifest)
        ts.known_attacks = frozenset(ts.attacks if known_attacks is None else known_attacks)
        columns[name] = per_attack_report(ts)
    text = build_report(columns)
    if out_path:
        atomic_write(out_path, text)
    return text


# --- simulate ---------------------------------------------------------------

def cmd_simulate(out_dir, cfg: PipelineConfig) -> dict:
    return write_corpus(generate_corpus(cfg.corpus(), class_map_for(cfg)), out_dir)


# --- demo -------------------------------------------------------------------

COLUMN_NAMES = {BASELINE: "LLR", "class": "Class", "phoneme": "Phoneme", "gaussian": "Gaussian"}


def run_demo(out_dir, cfg: PipelineConfig = PipelineConfig()) -> dict:
    """simulate -> train -> score -> fuse (two stages) -> eval, all through files.

    Models and stage-one fusion are fitted on the train split, the second
    stage on dev, and the report covers the eval split. Attacks listed in
    ``cfg.unknown_attacks`` never reach any training step.
    """
    corpus = os.path.join(out_dir, "corpus")
    manifests = cmd_simulate(corpus, cfg)
    models = os.path.join(out_dir, "models")
    cmd_train(manifests["train"], models, cfg)

    schemes = (BASELINE,) + tuple(cfg.schemes)
    score_paths = {split: cmd_score(manifests[split], models, os.path.join(out_dir, "scores", split),
                                    cfg, schemes, both=True)
                   for split in ("train", "dev", "eval")}

    fusion_dir = os.path.join(out_dir, "fusion")
    trial_dir = os.path.join(out_dir, "trials")
    detectors = {}  # detector name -> {split: trial path}
    for (scheme, w), _ in sorted(score_paths["train"].items()):
        name = scheme + ("_dw" if w else "")
        detectors[name] = {}
        if scheme == BASELINE:
            for split in ("dev", "eval"):
                path = os.path.join(trial_dir, split, name + ".trials")
                ts = load_trials(score_paths[split][(scheme, w)], manifests[split])
                atomic_write(path, format_trials(ts))
                detectors[name][split] = path
            continue
        model_path = os.path.join(fusion_dir, name + ".fuse")
        cmd_fuse_train([score_paths["train"][(scheme, w)]], model_path, cfg, manifests["train"])
        for split in ("dev", "eval"):
            path = os.path.join(trial_dir, split, name + ".trials")
            cmd_fuse_apply(model_path, [score_paths[split][(scheme, w)]], path, manifests[split])
            detectors[name][split] = path

    suffix = "_dw" if cfg.weighted else ""
    stage2 = [s + suffix for s in cfg.schemes]
    stage2_path = os.path.join(fusion_dir, "stage2.fuse")
    cmd_fuse_train([detectors[d]["dev"] for d in stage2], stage2_path, cfg, names=stage2)
    fused = os.path.join(trial_dir, "eval", "fusion.trials")
    cmd_fuse_apply(stage2_path, [detectors[d]["eval"] for d in stage2], fused)

    order = [BASELINE] + [s for s in cfg.schemes] + [s + "_dw" for s in cfg.schemes]
    paths = [detectors[d]["eval"] for d in order] + [fused]
    names = [COLUMN_NAMES[d.replace("_dw", "")] + ("+dw" if d.endswith("_dw") else "")
             for d in order] + ["Fusion"]
    known = [a for a in cfg.attacks if a not in cfg.unknown_attacks]
    report = os.path.join(out_dir, "report.txt")
    text = cmd_eval(paths, known, report, names)
    return {"report": report, "report_text": text, "manifests": manifests,
            "trials": {n: p for n, p in zip(names, paths)}}
