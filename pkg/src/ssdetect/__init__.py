"""Group-wise GMM likelihood-ratio scoring for synthetic speech detection."""

from .errors import SSDError
from .evaluation import Trial, TrialSet, compute_eer, per_attack_report
from .features import FeatureMatrix, MfccConfig, extract_mfcc, features_from_audio
from .fusion import FusionModel, apply_fusion, fuse_detectors, train_fusion
from .gmm import DiagGmm, TrainConfig, log_likelihood, map_adapt, train_gmm
from .grouping import group_by_class, group_by_gaussian, group_by_phoneme
from .scoring import GroupScoreVector, baseline_llr, duration_weight, group_scores

__version__ = "0.1.0"
