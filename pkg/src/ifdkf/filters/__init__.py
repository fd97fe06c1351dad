from .estimators import (AUTO, CKF_NODE, ExchangeMessage, FilterKind, FilterSpec,
                         ResolvedFilter, StepResult, broadcast, ckf_step, gkcf_update,
                         icf_update, ifdkf_consensus_form, ifdkf_update, kcf_update,
                         lkf_step, naive_fusion_update, step)
from .kernels import NodeBelief, information_update, kf_predict, kf_update, wls_estimate
from .oracle import JointErrorTracker, exact_joint_update

__all__ = [
    "AUTO", "CKF_NODE", "ExchangeMessage", "FilterKind", "FilterSpec", "JointErrorTracker",
    "NodeBelief", "ResolvedFilter", "StepResult", "broadcast", "ckf_step", "exact_joint_update",
    "gkcf_update", "icf_update", "ifdkf_consensus_form", "ifdkf_update", "information_update",
    "kcf_update", "kf_predict", "kf_update", "lkf_step", "naive_fusion_update", "step",
    "wls_estimate",
]
