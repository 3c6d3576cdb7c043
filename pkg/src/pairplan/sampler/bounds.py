"""Per-intention offset boxes and the squash that maps latents into them."""

from collections.abc import Sequence
import logging

import numpy as np

from pairplan.geometry import Intention
from pairplan.settings import OffsetBoundsConfig

from .exceptions import SamplerError

log = logging.getLogger(__name__)

INVERSE_SQUASH_LIMIT = 1.0 - 1e-9


def intention_boxes(
    reference_step: np.ndarray,
    intentions: Sequence[str],
    bounds: OffsetBoundsConfig,
    speed_limit: float,
    dt: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper (dx, dy, dh) corners per intention, each of shape (N, 3).

    Boxes are relative to the reference step; Keep is centred on it.
    """
    rx, ry, rh = (float(v) for v in reference_step)
    kw, khw = bounds.keep_half_width, bounds.keep_heading_half_width
    dx_max = bounds.dx_max_factor * speed_limit * dt
    keep_dx = (rx - kw, rx + kw)
    keep_dy = (ry - kw, ry + kw)
    keep_dh = (rh - khw, rh + khw)
    low = np.empty((len(intentions), 3))
    high = np.empty((len(intentions), 3))
    for i, name in enumerate(intentions):
        match Intention(name):
            case Intention.KEEP:
                box = (keep_dx, keep_dy, keep_dh)
            case Intention.LEFT:
                box = (keep_dx, (ry, ry + bounds.dy_max), (rh, rh + bounds.dh_max))
            case Intention.RIGHT:
                box = (keep_dx, (ry - bounds.dy_max, ry), (rh - bounds.dh_max, rh))
            case Intention.ACCELERATE:
                box = ((rx, max(rx + kw, dx_max)), keep_dy, keep_dh)
            case Intention.DECELERATE:
                lo = min(0.0, rx)
                box = ((lo, max(rx, lo + kw)), keep_dy, keep_dh)
        low[i] = [b[0] for b in box]
        high[i] = [b[1] for b in box]
    narrow = high - low < bounds.min_width
    if np.any(narrow):
        centre = (high + low) / 2
        low = np.where(narrow, centre - bounds.min_width / 2, low)
        high = np.where(narrow, centre + bounds.min_width / 2, high)
    return low, high


def validate_intentions(intentions: Sequence[str]) -> None:
    """Intentions must be known, unique and include Keep.

    Raises:
        SamplerError: Otherwise.

    """
    try:
        parsed = [Intention(name) for name in intentions]
    except ValueError as err:
        raise SamplerError(f"Unknown intention in {list(intentions)}") from err
    if len(set(parsed)) != len(parsed):
        raise SamplerError(f"Duplicate intentions in {list(intentions)}")
    if Intention.KEEP not in parsed:
        raise SamplerError("The intention set must contain Keep for the reference branch")


def squash(latent: np.ndarray, low: np.ndarray, high: np.ndarray) -> np.ndarray:
    """Map latents into the open box (low, high)."""
    centre = (high + low) / 2
    half = (high - low) / 2
    return centre + half * np.tanh(latent)


def unsquash(offset: np.ndarray, low: np.ndarray, high: np.ndarray) -> tuple[np.ndarray, bool]:
    """Latent of an offset; offsets on or outside the box are clamped and flagged."""
    centre = (high + low) / 2
    half = (high - low) / 2
    ratio = (np.asarray(offset) - centre) / half
    clamped = np.clip(ratio, -INVERSE_SQUASH_LIMIT, INVERSE_SQUASH_LIMIT)
    flagged = bool(np.any(clamped != ratio))
    if flagged:
        log.warning("Offset %s lies outside its box, inverse squash clamped", np.round(offset, 4))
    return np.arctanh(clamped), flagged
