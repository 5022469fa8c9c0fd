"""
Simulated artifacts: smoothing, glitches, model shift
=====================================================

Natural utterances are phoneme sequences with AR(1) frame noise. Spoofed ones
receive a smoothing (long-duration) or glitch (short-duration) artifact, or
come from a mean-shifted source.
"""

import numpy as np

from ssdetect.attacksim import CorpusConfig, generate_corpus

utts = generate_corpus(CorpusConfig(num_natural=30, num_spoofed=60, seed=4))

def frame_jump(u):
    return float(np.mean(np.abs(np.diff(u.feats.frames, axis=0))))

for kind in ("human", "smooth", "glitch", "shift"):
    group = [u for u in utts if u.attack == kind]
    peak = np.mean([np.max(np.abs(u.feats.frames)) for u in group])
    print("%-7s n=%2d  mean |frame jump| %.3f  mean peak |x| %.2f"
          % (kind, len(group), np.mean([frame_jump(u) for u in group]), peak))

u = utts[0]
print("first segments of", u.id, u.alignment.segments[:4])
