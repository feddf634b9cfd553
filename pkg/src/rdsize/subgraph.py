"""Mutable estimate of the recruitment-induced subgraph with cached statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .data import (
    ObservedData,
    check_compatibility,
    compute_du,
    compute_s_full,
    recruitment_adjacency,
)


@dataclass(eq=False)
class SubgraphState:
    """Compatible subgraph estimate plus everything the sampler updates in place.

    Scalars live in small arrays (``sw`` has one slot, ``counts`` holds D^u,
    |E_S|, addable and removable move counts) so compiled kernels can mutate
    them.
    """

    A: np.ndarray
    u: np.ndarray
    du: np.ndarray
    s: np.ndarray
    sw_cell: np.ndarray
    counts: np.ndarray

    @classmethod
    def from_adjacency(cls, A, obs: ObservedData) -> "SubgraphState":
        A = np.ascontiguousarray(A, dtype=np.uint8)
        ok, cond = check_compatibility(A, obs)
        if not ok:
            raise ValueError(f"adjacency violates compatibility condition {cond}")
        u = obs.degrees - A.sum(axis=1, dtype=np.int64)
        du, Du = compute_du(A, obs.degrees)
        s, sw = compute_s_full(A, obs.coupon_matrix, u, obs.waiting_times)
        edges = int(A.sum()) // 2
        counts = np.array([Du, edges, count_addable(A, u), edges - (obs.n - obs.m)],
                          dtype=np.int64)
        return cls(A, u.astype(np.int64), du, s.astype(np.int64),
                   np.array([sw], dtype=np.float64), counts)

    @property
    def n(self) -> int:
        return int(self.u.shape[0])

    @property
    def Du(self) -> int:
        return int(self.counts[K.DU])

    @property
    def sw(self) -> float:
        return float(self.sw_cell[0])

    @property
    def edge_count(self) -> int:
        return int(self.counts[K.EDGES])

    @property
    def addable(self) -> int:
        return int(self.counts[K.ADDABLE])

    @property
    def removable(self) -> int:
        return int(self.counts[K.REMOVABLE])

    def copy(self) -> "SubgraphState":
        return SubgraphState(self.A.copy(), self.u.copy(), self.du.copy(), self.s.copy(),
                             self.sw_cell.copy(), self.counts.copy())

    def edges(self) -> np.ndarray:
        i, j = np.nonzero(np.triu(self.A))
        return np.column_stack([i, j])

    def valid_moves(self, obs: ObservedData) -> tuple[list, list]:
        """Explicit lists of addable and removable pairs (for small n)."""
        adds, removes = [], []
        for j in range(1, self.n):
            for i in range(j):
                kind = K.is_valid_move(i, j, self.A, self.u, obs.recruiter_of)
                if kind == 1:
                    adds.append((i, j))
                elif kind == 2:
                    removes.append((i, j))
        return adds, removes


def count_addable(A, u) -> int:
    free = np.asarray(u) > 0
    ok = np.triu((A == 0) & free[:, None] & free[None, :], 1)
    return int(ok.sum())


def init_subgraph(obs: ObservedData) -> SubgraphState:
    """Minimal compatible subgraph: the undirected recruitment edges only."""
    return SubgraphState.from_adjacency(recruitment_adjacency(obs), obs)


def toggle_edge(state: SubgraphState, i: int, j: int, obs: ObservedData) -> None:
    """Apply a valid add/remove move on ``{i, j}`` in place."""
    i, j = min(i, j), max(i, j)
    kind = K.is_valid_move(i, j, state.A, state.u, obs.recruiter_of)
    if kind == 0:
        raise ValueError(f"({i}, {j}) is not a valid move")
    K.apply_toggle(i, j, kind == 1, state.A, state.u, state.du, state.s, state.sw_cell,
                   state.counts, obs.exhaust_index, obs.times, obs.coupon_exhaust_time)


def recompute(state: SubgraphState, obs: ObservedData) -> SubgraphState:
    """Fresh state built from the adjacency alone, for consistency checks."""
    return SubgraphState.from_adjacency(state.A.copy(), obs)
