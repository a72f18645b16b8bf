"""Minimum set cover over rule candidates: exact search for small inputs, greedy otherwise."""

from __future__ import annotations

from typing import Sequence

EXACT_LIMIT = 20


class UncoverableError(ValueError):
    def __init__(self, offenders):
        self.offenders = sorted(offenders, key=str)
        super().__init__(f"no candidate covers: {', '.join(map(str, self.offenders))}")


def _check(covers: Sequence[set], universe: set):
    reachable = set().union(*covers) if covers else set()
    missing = set(universe) - reachable
    if missing:
        raise UncoverableError(missing)


def greedy_cover(covers: Sequence[set], universe: set) -> list[int]:
    """Repeatedly take the candidate with the largest uncovered gain.

    Candidates are expected in tie-break order already; on equal gain the
    lowest index wins.
    """
    _check(covers, universe)
    left = set(universe)
    chosen: list[int] = []
    while left:
        best, gain = -1, 0
        for i, c in enumerate(covers):
            g = len(left & c)
            if g > gain:
                best, gain = i, g
        chosen.append(best)
        left -= covers[best]
    return chosen


def exact_cover(covers: Sequence[set], universe: set) -> list[int]:
    """Minimum-size cover by iterative deepening with bound pruning.

    Branches on the uncovered element with the fewest covering candidates and
    tries candidates in index order, which keeps the result deterministic.
    """
    _check(covers, universe)
    elements = sorted(universe, key=str)
    bit = {e: 1 << i for i, e in enumerate(elements)}
    masks = [sum(bit[e] for e in c if e in bit) for c in covers]
    full = (1 << len(elements)) - 1
    if not full:
        return []
    by_element = [[i for i, m in enumerate(masks) if m >> j & 1] for j in range(len(elements))]
    widest = max(bin(m).count("1") for m in masks)

    def search(covered: int, budget: int, picked: list) -> list | None:
        if covered == full:
            return list(picked)
        missing = full & ~covered
        if budget == 0 or -(-bin(missing).count("1") // widest) > budget:
            return None
        # most constrained uncovered element
        j = min((j for j in range(len(elements)) if missing >> j & 1), key=lambda j: len(by_element[j]))
        for i in by_element[j]:
            picked.append(i)
            found = search(covered | masks[i], budget - 1, picked)
            picked.pop()
            if found is not None:
                return found
        return None

    for size in range(1, len(covers) + 1):
        found = search(0, size, [])
        if found is not None:
            return sorted(found)
    raise AssertionError("unreachable: universe is coverable")


def solve_set_cover(covers: Sequence[set], universe: set, exact_limit: int = EXACT_LIMIT):
    """(chosen indices, method) with method "exact" or "greedy"."""
    usable = [i for i, c in enumerate(covers) if c & set(universe)]
    sub = [covers[i] for i in usable]
    if len(sub) <= exact_limit:
        picked, method = exact_cover(sub, universe), "exact"
    else:
        picked, method = greedy_cover(sub, universe), "greedy"
    return [usable[i] for i in picked], method
