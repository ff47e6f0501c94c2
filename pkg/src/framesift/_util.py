"""Small numeric helpers shared across modules."""
from __future__ import annotations

import math

# Slack for ratio arithmetic on frame counts.  Products like 0.3 * 10 land a
# few ulps away from the intended integer; a fixed nudge keeps floor/ceil on
# the mathematically intended side without affecting genuine fractions.
_EPS = 1e-9


def int_floor(x: float) -> int:
    """Floor robust to float representation error (floor(2.9999999999) == 3)."""
    return math.floor(x + _EPS)


def int_ceil(x: float) -> int:
    """Ceil robust to float representation error (ceil(7.0000000001) == 7)."""
    return math.ceil(x - _EPS)
