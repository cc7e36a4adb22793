from .chain import (
    crf_log_partition,
    crf_marginals,
    crf_nll,
    crf_score,
    truncate_at_eos,
    viterbi_decode,
)
from .kernels import KERNEL_BACKEND
from .layer import CrfHead
from .transitions import (
    FORBIDDEN_SCORE,
    TransitionMatrix,
    exp_normalized,
    export_csv,
    forbidden_mask,
    init_transitions_precomputed,
    init_transitions_random,
    label_names,
    read_csv,
    row_argmax_agreement,
    transition_counts,
)

__all__ = [
    "CrfHead",
    "FORBIDDEN_SCORE",
    "KERNEL_BACKEND",
    "TransitionMatrix",
    "crf_log_partition",
    "crf_marginals",
    "crf_nll",
    "crf_score",
    "exp_normalized",
    "export_csv",
    "forbidden_mask",
    "init_transitions_precomputed",
    "init_transitions_random",
    "label_names",
    "read_csv",
    "row_argmax_agreement",
    "transition_counts",
    "truncate_at_eos",
    "viterbi_decode",
]
