"""Certified robustness of bagging against training-data poisoning."""

from .bounds import ProbabilityBounds, beta_quantile, bonferroni_alpha, simuem
from .certifier import (
    ATTACKS,
    CertInputs,
    Certificate,
    argmax_nprime,
    certified_accuracy,
    certified_size,
    certified_size_general,
    certify_all,
    closed_form_delete,
    closed_form_insert,
    closed_form_modify,
    constraint_lhs,
    max_constraint,
    residuals,
)
from .dataset import Dataset, Example, Subsample, draw_subsample, load_csv, load_idx, save_csv
from .ensemble import VoteTable, train_votes
from .learners import BaseLearnerSpec, fit, predict

__version__ = "0.1.0"
