"""
Group-wise likelihood-ratio scores
==================================

The utterance LLR is split into per-group averages S_j: by aligned Gaussian,
by phoneme, or by sound class. Weighting S_j by the group share N_j/N gives the
plain LLR back; duration weighting scales S_j by ln(N_j + 1) instead.
"""

import numpy as np

from ssdetect.attacksim import CorpusConfig, generate_corpus
from ssdetect.gmm import TrainConfig, map_adapt, train_gmm
from ssdetect.grouping import (SOUND_CLASSES, default_class_map, group_by_class,
                               group_by_gaussian, group_by_phoneme)
from ssdetect.scoring import baseline_llr, duration_weight, group_scores

utts = generate_corpus(CorpusConfig(num_natural=30, num_spoofed=30, seed=2))
nat_x = np.vstack([u.feats.frames for u in utts if u.label == "natural"])
spf_x = np.vstack([u.feats.frames for u in utts if u.label == "spoof"])
nat, _ = train_gmm(nat_x, TrainConfig(num_components=16, seed=0))
syn = map_adapt(nat, spf_x, 16.0)

u = utts[0]
cm = default_class_map()
by_class = group_scores(u.feats, group_by_class(u.alignment, u.feats, cm), nat, syn)
for name, s, n in zip(SOUND_CLASSES, by_class.scores, by_class.counts):
    print("%-6s N=%4d  S=%+.3f" % (name, n, s))

# Partition identity: the count-weighted group scores recover the baseline.
llr = baseline_llr(u.feats, nat, syn)
print("baseline LLR %.6f, recombined %.6f"
      % (llr, np.sum(by_class.counts / u.feats.num_frames * by_class.scores)))

print("duration weighted:", np.round(duration_weight(by_class).scores, 3))
print("groups per scheme: gaussian %d, phoneme %d, class %d"
      % (group_by_gaussian(nat, u.feats).num_groups,
         group_by_phoneme(u.alignment, u.feats, cm.phonemes).num_groups, by_class.num_groups))
