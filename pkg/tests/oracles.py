"""Independent reference computations used by the tests."""

from __future__ import annotations

import bisect


def brute_objective(energies, f, delta, direction):
    """|S+| - |S-| by explicit set membership."""
    plus = minus = 0
    for e in energies:
        above = 0 < e - f < delta
        below = 0 < f - e < delta
        if direction == "up":
            plus += above
            minus += below
        else:
            plus += below
            minus += above
    return plus - minus


def _sorted_objective(sorted_e, f, delta, direction):
    # count of E in the open intervals (f, f + delta) and (f - delta, f)
    above = bisect.bisect_left(sorted_e, f + delta) - bisect.bisect_right(sorted_e, f)
    below = bisect.bisect_left(sorted_e, f) - bisect.bisect_right(sorted_e, f - delta)
    return above - below if direction == "up" else below - above


def breakpoint_oracle_max(energies, delta, res, lower=0.0):
    """Maximum objective over points just either side of every breakpoint.

    The objective is piecewise constant with jumps only at E and E +/- delta,
    so probing each breakpoint at +/- res/2 visits every open piece as long
    as pieces are wider than res.  Only candidates above ``lower`` count.
    """
    out = {}
    sorted_e = sorted(float(e) for e in energies)
    cands = {b + s * res / 2 for e in sorted_e for b in (e - delta, e, e + delta) for s in (-1, 1)}
    cands = [c for c in cands if c > lower]
    for direction in ("up", "down"):
        out[direction] = max(_sorted_objective(sorted_e, c, delta, direction) for c in cands)
    return out
