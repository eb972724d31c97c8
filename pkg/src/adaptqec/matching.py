"""Exact minimum-weight perfect matching.

General instances go through the blossom algorithm in networkx. The
defect-or-boundary problem that surface-code decoding produces has a small
exact dynamic program, used when there are only a few defects.
"""

from __future__ import annotations

import math
import networkx as nx
import numpy as np

from adaptqec.errors import InputError, InvariantError

# Largest defect count handled by the subset dynamic program.
DP_MAX_DEFECTS = 12


def min_weight_perfect_matching(costs) -> list[tuple[int, int]]:
    """Minimum-cost perfect matching of nodes ``0..N-1``.

    ``costs`` is a symmetric (N, N) array; entries equal to ``inf`` mark
    missing edges. Returns sorted ``(i, j)`` pairs with ``i < j``.
    """
    costs = np.asarray(costs, dtype=float)
    n = costs.shape[0]
    if costs.shape != (n, n):
        raise InputError("cost matrix must be square")
    if n % 2:
        raise InvariantError(f"perfect matching needs an even node count, got {n}")
    if n == 0:
        return []
    finite = np.isfinite(costs)
    if not np.allclose(np.where(finite, costs, 0), np.where(finite, costs, 0).T):
        raise InputError("cost matrix must be symmetric")
    g = nx.Graph()
    g.add_nodes_from(range(n))
    for i in range(n):
        for j in range(i + 1, n):
            if finite[i, j]:
                # Maximum cardinality first, then maximum (negated) weight.
                g.add_edge(i, j, weight=-float(costs[i, j]))
    matching = nx.max_weight_matching(g, maxcardinality=True)
    pairs = sorted((min(a, b), max(a, b)) for a, b in matching)
    if len(pairs) != n // 2:
        raise InvariantError("graph has no perfect matching")
    return pairs


def matching_cost(costs, pairs) -> float:
    costs = np.asarray(costs, dtype=float)
    return math.fsum(costs[i, j] for i, j in pairs)


def match_defects(pair_cost: np.ndarray, boundary_cost: np.ndarray) -> list[tuple[int, int]]:
    """Pair defects with each other or send them to the boundary.

    Returns pairs ``(i, j)`` of defect indices, with ``j = -1`` meaning that
    defect ``i`` is matched to the boundary. Equivalent to a perfect matching
    on the graph with one boundary copy per defect and free copy-copy edges.
    """
    m = len(boundary_cost)
    if m == 0:
        return []
    if m <= DP_MAX_DEFECTS:
        return _match_defects_dp(pair_cost, boundary_cost)
    return _match_defects_blossom(pair_cost, boundary_cost)


def augmented_costs(pair_cost: np.ndarray, boundary_cost: np.ndarray) -> np.ndarray:
    m = len(boundary_cost)
    big = np.full((2 * m, 2 * m), np.inf)
    big[:m, :m] = pair_cost
    np.fill_diagonal(big[:m, :m], np.inf)
    idx = np.arange(m)
    big[idx, m + idx] = boundary_cost
    big[m + idx, idx] = boundary_cost
    big[m:, m:] = 0.0
    np.fill_diagonal(big[m:, m:], np.inf)
    return big


def _match_defects_blossom(pair_cost, boundary_cost):
    m = len(boundary_cost)
    pairs = min_weight_perfect_matching(augmented_costs(pair_cost, boundary_cost))
    out = []
    for i, j in pairs:
        if j < m:
            out.append((i, j))
        elif i < m:
            out.append((i, -1))
    return sorted(out)


def _match_defects_dp(pair_cost, boundary_cost):
    m = len(boundary_cost)
    pc = np.asarray(pair_cost, dtype=float).tolist()
    bc = np.asarray(boundary_cost, dtype=float).tolist()
    memo: dict[int, tuple[float, tuple]] = {0: (0.0, ())}

    def best(mask: int) -> tuple[float, tuple]:
        hit = memo.get(mask)
        if hit is not None:
            return hit
        # The lowest remaining defect goes to the boundary or to a partner.
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        sub_cost, sub_pairs = best(rest)
        choice = (bc[i] + sub_cost, ((i, -1),) + sub_pairs)
        row = pc[i]
        j_mask = rest
        while j_mask:
            low = j_mask & -j_mask
            j_mask ^= low
            sub_cost, sub_pairs = best(rest ^ low)
            cand = row[low.bit_length() - 1] + sub_cost
            if cand < choice[0]:
                choice = (cand, ((i, low.bit_length() - 1),) + sub_pairs)
        memo[mask] = choice
        return choice

    cost, pairs = best((1 << m) - 1)
    if not math.isfinite(cost):
        raise InvariantError("defects admit no finite matching")
    return sorted(pairs)
