"""Finite stopping rule shared by the contraction and Morse classifiers.

An asymptotic "uniformly bounded" statement is tested on a geometric ladder
of scales.  A measured quantity is *flat* when its top-tier value is less
than ``flat_ratio`` times its mid-tier value (the mid value is floored, so
quantities that are zero up to discretization count as flat).  It *grows*
when it is not flat and its least-squares slope against the scale is at
least ``min_slope``, i.e. it behaves like ``slope * scale - const``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cat0probe.errors import InputError

FLAT_RATIO = 1.2
MIN_SLOPE = 0.25

FLAT, GROWING, UNCLEAR = "flat", "growing", "unclear"


@dataclass(frozen=True)
class LadderFit:
    ratio: float
    slope: float
    shape: str


def mid_index(n: int) -> int:
    return (n - 1) // 2


def ladder_shape(scales, values, floor: float, flat_ratio: float = FLAT_RATIO,
                 min_slope: float = MIN_SLOPE) -> LadderFit:
    """Classify ``values`` measured at increasing ``scales`` as flat, growing or unclear."""
    x = np.asarray(scales, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.size < 2 or x.size != y.size:
        raise InputError("a ladder needs at least two tiers with one value each")
    if np.any(np.diff(x) <= 0):
        raise InputError("ladder scales must be strictly increasing")
    ratio = float(y[-1] / max(y[mid_index(y.size)], floor))
    slope = float(np.polyfit(x, y, 1)[0])
    if ratio < flat_ratio:
        shape = FLAT
    elif slope >= min_slope:
        shape = GROWING
    else:
        shape = UNCLEAR
    return LadderFit(ratio, slope, shape)
