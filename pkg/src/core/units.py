"""
Unit conversion and loss aggregation.

Bits-per-byte makes losses comparable across tokenizers: the summed nats over an
evaluation set divided by its UTF-8 byte count and by ln 2.
"""

import math
from typing import TYPE_CHECKING, List

from src.core.errors import InvalidArgumentError, MissingDataError

if TYPE_CHECKING:
    from src.core.types import CheckpointRecord


def _check_counts(token_count: int, byte_count: int) -> None:
    if byte_count is None or byte_count < 1:
        raise InvalidArgumentError(f"byte_count must be a positive integer, got {byte_count}")
    if token_count is None or token_count < 1:
        raise InvalidArgumentError(f"token_count must be a positive integer, got {token_count}")


def nll_to_bpb(loss_nats_per_token: float, token_count: int, byte_count: int) -> float:
    """
    Convert a mean per-token loss in nats to bits per byte.

    Args:
        loss_nats_per_token: Mean negative log-likelihood per token, in nats
        token_count: Number of tokens the mean was taken over
        byte_count: UTF-8 bytes of the same text

    Returns:
        float: loss * token_count / (byte_count * ln 2)

    Raises:
        InvalidArgumentError: On a negative or non-finite loss or a count below 1
    """
    _check_counts(token_count, byte_count)
    if not math.isfinite(loss_nats_per_token) or loss_nats_per_token < 0:
        raise InvalidArgumentError(f"loss must be finite and >= 0, got {loss_nats_per_token}")
    return loss_nats_per_token * token_count / (byte_count * math.log(2))


def bpb_to_nll(loss_bits_per_byte: float, token_count: int, byte_count: int) -> float:
    """Inverse of nll_to_bpb."""
    _check_counts(token_count, byte_count)
    if not math.isfinite(loss_bits_per_byte) or loss_bits_per_byte < 0:
        raise InvalidArgumentError(f"loss must be finite and >= 0, got {loss_bits_per_byte}")
    return loss_bits_per_byte * byte_count * math.log(2) / token_count


def average_loss(record: "CheckpointRecord", datasets: List[str]) -> float:
    """
    Arithmetic mean of the record's losses on ``datasets``.

    The sum is exactly rounded, so the result does not depend on the order of
    ``datasets``.

    Raises:
        InvalidArgumentError: If ``datasets`` is empty
        MissingDataError: Listing every requested label the record lacks
    """
    if not datasets:
        raise InvalidArgumentError("average_loss needs at least one dataset")
    missing = [d for d in datasets if d not in record.losses]
    if missing:
        raise MissingDataError(missing, context=record.config.label)
    return math.fsum(record.losses[d].value for d in datasets) / len(datasets)
