"""Small shared helpers."""
from .validation import (
    check_fraction,
    check_option,
    check_positive_int,
    check_state_batch,
    check_state_vector,
)

__all__ = ["check_fraction", "check_option", "check_positive_int", "check_state_batch", "check_state_vector"]
