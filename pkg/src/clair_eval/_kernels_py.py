"""Pure-Python kernels; the fallback when the compiled extension is absent.

Must stay behaviorally identical to _ckernels.pyx (tests compare them).
"""

from __future__ import annotations

from typing import Sequence


def lcs_length(a: Sequence[int], b: Sequence[int]) -> int:
    """Length of the longest common subsequence of two id sequences."""
    if not a or not b:
        return 0
    if len(b) > len(a):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    curr = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        ai = a[i - 1]
        for j in range(1, len(b) + 1):
            if ai == b[j - 1]:
                curr[j] = prev[j - 1] + 1
            else:
                curr[j] = curr[j - 1] if curr[j - 1] >= prev[j] else prev[j]
        prev, curr = curr, prev
    return prev[len(b)]


def kendall_pair_counts(
    x: Sequence[float], y: Sequence[float]
) -> tuple[int, int, int, int, int]:
    """Count (concordant, discordant, tied-x-only, tied-y-only, tied-both) pairs."""
    n = len(x)
    concordant = discordant = tied_x = tied_y = tied_both = 0
    for i in range(n):
        xi = x[i]
        yi = y[i]
        for j in range(i + 1, n):
            dx = xi - x[j]
            dy = yi - y[j]
            if dx == 0.0 and dy == 0.0:
                tied_both += 1
            elif dx == 0.0:
                tied_x += 1
            elif dy == 0.0:
                tied_y += 1
            elif (dx > 0.0) == (dy > 0.0):
                concordant += 1
            else:
                discordant += 1
    return concordant, discordant, tied_x, tied_y, tied_both
