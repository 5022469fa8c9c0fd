import numpy as np
import pytest

from ssdetect.errors import InvalidDataError, UnknownLabelError
from ssdetect.features import FeatureMatrix
from ssdetect.gmm import DiagGmm
from ssdetect.grouping import (SOUND_CLASSES, UNASSIGNED, ClassMap, PhonemeAlignment,
                               default_class_map, format_alignment, group_by_class,
                               group_by_gaussian, group_by_phoneme, parse_alignment,
                               parse_class_map)


def feats(n, d=2, seed=0):
    return FeatureMatrix(np.random.default_rng(seed).normal(size=(n, d)), 100.0, "u")


class TestDefaults:
    def test_inventory_size(self):
        cm = default_class_map()
        assert len(cm.phonemes) == 37
        assert set(cm.mapping.values()) == set(SOUND_CLASSES)

    def test_class_map_file_parsing(self):
        cm = parse_class_map("# comment\naa vowel\nm nasal  # trailing\n")
        assert cm.mapping == {"aa": "vowel", "m": "nasal"}
        with pytest.raises(Exception):
            parse_class_map("aa fricative\n")


class TestGaussian:
    def test_group_count_follows_components(self):
        rng = np.random.default_rng(0)
        k = 512
        g = DiagGmm(np.full(k, 1.0 / k), rng.normal(size=(k, 2)), np.ones((k, 2)))
        a = group_by_gaussian(g, feats(30))
        assert a.num_groups == 512
        assert np.all(a.index != UNASSIGNED)

    def test_single_component(self):
        g = DiagGmm([1.0], [[0.0, 0.0]], [[1.0, 1.0]])
        assert np.all(group_by_gaussian(g, feats(10)).index == 0)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(2)
        g = DiagGmm([0.2, 0.3, 0.5], rng.normal(0, 2, (3, 2)), rng.uniform(0.5, 2, (3, 2)))
        f = feats(40, seed=3)
        dens = np.array([[np.log(g.weights[k]) - 0.5 * np.sum(np.log(2 * np.pi * g.variances[k])
                          + (x - g.means[k]) ** 2 / g.variances[k]) for k in range(3)]
                         for x in f.frames])
        np.testing.assert_array_equal(group_by_gaussian(g, f).index, dens.argmax(axis=1))


class TestPhoneme:
    def test_default_set_size(self):
        cm = default_class_map()
        ali = PhonemeAlignment(((0.0, 1.0, "aa"),))
        assert group_by_phoneme(ali, feats(20), cm.phonemes).num_groups == 37

    def test_single_segment(self):
        cm = default_class_map()
        ali = PhonemeAlignment(((0.0, 10.0, "aa"),))
        a = group_by_phoneme(ali, feats(50), cm.phonemes)
        assert np.all(a.index == cm.phonemes.index("aa"))

    def test_interval_lookup_against_enumeration(self):
        phonemes = ["a", "b", "c"]
        # Frame centers sit at i/100 + 0.0125.
        segs = ((0.0, 0.05, "a"), (0.05, 0.1325, "b"), (0.16, 0.3, "c"))
        ali = PhonemeAlignment(segs)
        f = feats(35)
        expected = []
        for i in range(35):
            c = i / 100 + 0.0125
            hit = UNASSIGNED
            for s, e, p in segs:
                if s <= c < e:
                    hit = phonemes.index(p)
            expected.append(hit)
        a = group_by_phoneme(ali, f, phonemes)
        np.testing.assert_array_equal(a.index, expected)
        # Frame 12 has center 0.1325: it sits exactly on b's end and lands in the gap.
        assert a.index[12] == UNASSIGNED

    def test_boundary_tie_goes_to_later_segment(self):
        ali = PhonemeAlignment(((0.0, 0.0125, "a"), (0.0125, 0.5, "b")))
        a = group_by_phoneme(ali, feats(3), ["a", "b"])
        assert a.index[0] == 1

    def test_uses_original_frame_positions(self):
        ali = PhonemeAlignment(((0.0, 0.1, "a"), (0.1, 0.5, "b")))
        f = FeatureMatrix(np.zeros((3, 1)), 100.0, "u", frame_index=[2, 20, 30])
        np.testing.assert_array_equal(group_by_phoneme(ali, f, ["a", "b"]).index, [0, 1, 1])

    def test_unknown_label(self):
        ali = PhonemeAlignment(((0.0, 1.0, "zz"),))
        with pytest.raises(UnknownLabelError, match="zz"):
            group_by_phoneme(ali, feats(5), ["aa"])

    def test_alignment_validation(self):
        with pytest.raises(InvalidDataError):
            PhonemeAlignment(((0.0, 0.5, "a"), (0.4, 0.6, "b")))
        with pytest.raises(InvalidDataError):
            PhonemeAlignment(((0.3, 0.3, "a"),))

    def test_file_round_trip(self):
        ali = PhonemeAlignment(((0.0, 0.12, "aa"), (0.15, 0.3, "m")), "u")
        assert parse_alignment(format_alignment(ali), "u") == ali


class TestClass:
    def test_five_groups_and_lookup(self):
        cm = default_class_map()
        ali = PhonemeAlignment(((0.0, 1.0, "m"),))
        a = group_by_class(ali, feats(10), cm)
        assert a.num_groups == 5
        assert np.all(a.index == SOUND_CLASSES.index("nasal"))

    def test_counts_aggregate_phoneme_counts(self):
        cm = default_class_map()
        rng = np.random.default_rng(5)
        segs, t = [], 0.0
        for _ in range(40):
            d = float(rng.integers(2, 12)) / 100
            gap = 0.02 if rng.random() < 0.2 else 0.0
            segs.append((t + gap, t + gap + d, cm.phonemes[rng.integers(37)]))
            t += gap + d
        ali = PhonemeAlignment(tuple(segs))
        f = feats(int(t * 100) + 5)
        ph = group_by_phoneme(ali, f, cm.phonemes)
        cl = group_by_class(ali, f, cm)
        expected = np.zeros(5, int)
        for j, n in enumerate(ph.counts()):
            expected[SOUND_CLASSES.index(cm[cm.phonemes[j]])] += n
        np.testing.assert_array_equal(cl.counts(), expected)
        assert cl.counts().sum() == np.sum(cl.index != UNASSIGNED)

    def test_unknown_phoneme(self):
        cm = ClassMap({"aa": "vowel"})
        with pytest.raises(UnknownLabelError):
            group_by_class(PhonemeAlignment(((0.0, 1.0, "xx"),)), feats(5), cm)
