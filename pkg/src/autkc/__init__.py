"""AUTKC: partial area under the top-k curve, surrogate losses, and oracles."""

__version__ = "0.1.0"

from .losses import LossSpec, make_loss_spec, parse_loss_spec, softmax
from .metrics import aerr_K, autkc_up, err_k, topk_curve, topk_up
from .ranking import kth_largest, kth_largest_excluding, top_m_indices, worst_case_rank

__all__ = [
    "__version__",
    "LossSpec",
    "make_loss_spec",
    "parse_loss_spec",
    "softmax",
    "aerr_K",
    "autkc_up",
    "err_k",
    "topk_curve",
    "topk_up",
    "kth_largest",
    "kth_largest_excluding",
    "top_m_indices",
    "worst_case_rank",
]
