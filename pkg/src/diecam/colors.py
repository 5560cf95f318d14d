"""Color scales for indicator maps and feature overlays.

The canonical definition lives in ``data/colorscale.json`` and is served
verbatim to UI clients so core exports and remote rendering agree byte for
byte on every stop.
"""

from __future__ import annotations

import json
from importlib import resources

import numpy as np

from .errors import DiecamError


def scale_definition() -> dict:
    """Return the parsed scale definition document."""
    with resources.files("diecam.data").joinpath("colorscale.json").open("rb") as fh:
        return json.load(fh)


_DEFINITION = scale_definition()

OUT_OF_RANGE = tuple(_DEFINITION["out_of_range"])
FEATURE_PALETTE = [tuple(c) for c in _DEFINITION["feature_palette"]]


def scalar_to_rgb(values, scale: str = "rainbow") -> np.ndarray:
    """Map scalars in [0, 1] onto a named scale.

    Parameters
    ----------
    values : array-like
        Scalars; entries outside [0, 1] are clamped. NaN maps to the
        out-of-range color.
    scale : str
        Name of a scale in the definition file.

    Returns
    -------
    (n, 3) uint8 array.
    """
    if scale not in _DEFINITION["scales"]:
        raise DiecamError(f"unknown color scale {scale!r}", code_hint="scale")
    stops = _DEFINITION["scales"][scale]["stops"]
    positions = np.array([s[0] for s in stops], dtype=np.float64)
    channels = np.array([s[1] for s in stops], dtype=np.float64)

    vals = np.asarray(values, dtype=np.float64)
    nan_mask = ~np.isfinite(vals)
    clamped = np.clip(np.nan_to_num(vals, nan=0.0), 0.0, 1.0)

    rgb = np.empty(vals.shape + (3,), dtype=np.float64)
    for c in range(3):
        rgb[..., c] = np.interp(clamped, positions, channels[:, c])
    # floor(x + 0.5): deterministic rounding, no banker's ties
    out = np.floor(rgb + 0.5).astype(np.uint8)
    out[nan_mask] = OUT_OF_RANGE
    return out


def feature_color(feature_id: int) -> tuple[int, int, int]:
    """Qualitative palette color for a feature id (cycled)."""
    return FEATURE_PALETTE[feature_id % len(FEATURE_PALETTE)]
