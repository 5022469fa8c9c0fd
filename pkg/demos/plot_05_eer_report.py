"""
EER and the per-attack report
=============================

Equal error rate by threshold sweep, and the report layout: one row per
attack, then Known, Unknown and All.
"""

import numpy as np

from ssdetect.evaluation import (Trial, TrialSet, compute_eer, det_points, format_report_table,
                                 per_attack_report)

rng = np.random.default_rng(3)
trials = [Trial("n%03d" % i, "natural", "human", s) for i, s in enumerate(rng.normal(2, 1, 300))]
trials += [Trial("a%03d" % i, "spoof", "S1", s) for i, s in enumerate(rng.normal(-2, 1, 150))]
trials += [Trial("b%03d" % i, "spoof", "S2", s) for i, s in enumerate(rng.normal(1, 1, 150))]
ts = TrialSet(trials, known_attacks=frozenset({"S1"}))

thr, far, frr = det_points(ts)
print("%d thresholds, FAR falls from %.2f to %.2f" % (thr.size, far[0], far[-1]))
print("overall EER %.2f%%" % (100 * compute_eer(ts)))
print(format_report_table({"Detector": per_attack_report(ts)}))
