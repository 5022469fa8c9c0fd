"""
MFCC front end with energy-based speech detection
==================================================

A synthetic "utterance" (silence, a vowel-like harmonic tone, silence) goes
through the full front end: 19 cepstra, a two-Gaussian VAD on frame log
energy, then deltas and double deltas over the retained frames.
"""

import numpy as np

from ssdetect.features import (AudioBuffer, MfccConfig, bigaussian_vad, extract_mfcc,
                               features_from_audio, frame_log_energy)

rate = 16000
t = np.arange(rate) / rate
rng = np.random.default_rng(0)
voiced = (t > 0.3) & (t < 0.7)
signal = 0.002 * rng.standard_normal(t.size)
signal += voiced * sum(0.2 / h * np.sin(2 * np.pi * 140 * h * t) for h in range(1, 8))
audio = AudioBuffer(signal, rate, "demo")

# Static cepstra: one row per 10 ms hop, 19 coefficients (c0 dropped).
static = extract_mfcc(audio)
print("static MFCCs:", static.frames.shape)

# The VAD fits two Gaussians to log energy and keeps frames the louder one explains.
vad = bigaussian_vad(static, frame_log_energy(audio))
print("speech frames kept: %d of %d" % (vad.mask.sum(), vad.mask.size))
print("first/last kept frame (s): %.2f / %.2f"
      % (np.flatnonzero(vad.mask)[0] / 100, np.flatnonzero(vad.mask)[-1] / 100))

# Full pipeline: static + delta + delta-delta = 57 dimensions.
feats = features_from_audio(audio, MfccConfig())
print("final features:", feats.frames.shape)
