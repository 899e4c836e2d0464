"""Exact s-t minimum cut for binary pairwise energies.

Dinic's blocking-flow algorithm on float capacities. Terminal arcs are not
stored in the arc list: each node keeps its remaining source and sink
capacity, which is all the residual information Dinic needs on them.
"""

from __future__ import annotations

from collections import deque

import numpy as np


def _check_nonneg(name, a):
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    if np.any(a < 0):
        raise ValueError(f"{name} must be nonnegative")


class PairwiseNetwork:
    """Arc structure for a fixed node/edge set, reusable across capacities.

    Arc ``2k`` runs ``u -> v`` for edge ``k = (u, v)``, arc ``2k + 1`` the
    reverse; both start with the edge capacity.
    """

    def __init__(self, n: int, edges):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ValueError(f"edge endpoint outside [0, {n})")
        self.n = int(n)
        self.m = len(edges)
        self.edges = edges
        head: list[list[int]] = [[] for _ in range(n)]
        to: list[int] = []
        for k, (u, v) in enumerate(edges.tolist()):
            head[u].append(2 * k)
            head[v].append(2 * k + 1)
            to.append(v)
            to.append(u)
        self._head = head
        self._to = to

    def min_cut(self, source_caps, sink_caps, edge_caps):
        """Return ``(labels, flow)``; ``labels`` marks the source side.

        The source side is the set reachable from the source in the final
        residual network, i.e. the smallest minimum cut.
        """
        n = self.n
        cs = np.asarray(source_caps, dtype=float).reshape(n)
        ct = np.asarray(sink_caps, dtype=float).reshape(n)
        w = np.broadcast_to(np.asarray(edge_caps, dtype=float), (self.m,))
        _check_nonneg("terminal capacities", cs)
        _check_nonneg("terminal capacities", ct)
        _check_nonneg("pairwise capacities", w)

        head, to = self._head, self._to
        cap = np.repeat(w, 2).tolist()
        rs = cs.tolist()
        rt = ct.tolist()
        flow = 0.0

        # flow that can go straight s -> i -> t
        for i in range(n):
            if rs[i] > 0 and rt[i] > 0:
                f = min(rs[i], rt[i])
                rs[i] -= f
                rt[i] -= f
                flow += f

        while True:
            level = [-1] * n
            q = deque()
            for i in range(n):
                if rs[i] > 0:
                    level[i] = 0
                    q.append(i)
            lt = -1  # level of the sink, counted from the first real node
            while q:
                u = q.popleft()
                lu = level[u]
                if lt >= 0 and lu >= lt:
                    break
                if rt[u] > 0 and lt < 0:
                    lt = lu
                    continue
                for a in head[u]:
                    v = to[a]
                    if level[v] < 0 and cap[a] > 0:
                        level[v] = lu + 1
                        q.append(v)
            if lt < 0:
                break

            it = [0] * n
            for s in range(n):
                if level[s] != 0:
                    continue
                # DFS from s along the level graph, one augmenting path at a time
                path: list[int] = []
                u = s
                while rs[s] > 0:
                    if level[u] == lt and rt[u] > 0:
                        f = min(rs[s], rt[u])
                        for a in path:
                            if cap[a] < f:
                                f = cap[a]
                        for a in path:
                            cap[a] -= f
                            cap[a ^ 1] += f
                        rs[s] -= f
                        rt[u] -= f
                        flow += f
                        path.clear()
                        u = s
                        continue
                    hu = head[u]
                    k = it[u]
                    nxt = level[u] + 1
                    if nxt <= lt:
                        while k < len(hu):
                            a = hu[k]
                            if cap[a] > 0 and level[to[a]] == nxt:
                                break
                            k += 1
                    else:
                        k = len(hu)
                    it[u] = k
                    if k < len(hu):
                        path.append(hu[k])
                        u = to[hu[k]]
                    else:
                        level[u] = -2  # dead end for this phase
                        if u == s:
                            break
                        a = path.pop()
                        u = to[a ^ 1]
                        it[u] += 1

        seen = [False] * n
        q = deque()
        for i in range(n):
            if rs[i] > 0:
                seen[i] = True
                q.append(i)
        while q:
            u = q.popleft()
            for a in head[u]:
                v = to[a]
                if not seen[v] and cap[a] > 0:
                    seen[v] = True
                    q.append(v)
        return np.array(seen, dtype=bool), flow


def min_st_cut(n: int, terminal_capacities, edges, pairwise_capacities):
    """Minimum s-t cut with one undirected pairwise arc per edge.

    Args:
        n: number of non-terminal nodes.
        terminal_capacities: ``(n, 2)`` array; column 0 is the source arc
            capacity of each node, column 1 the sink arc capacity.
        edges: ``(M, 2)`` node pairs.
        pairwise_capacities: ``(M,)`` capacity used in both directions.

    Returns:
        ``(labels, value)`` with ``labels[i]`` True on the source side.
    """
    tc = np.asarray(terminal_capacities, dtype=float).reshape(n, 2)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    w = np.asarray(pairwise_capacities, dtype=float).reshape(-1)
    if len(w) != len(edges):
        raise ValueError("one pairwise capacity per edge is required")
    return PairwiseNetwork(n, edges).min_cut(tc[:, 0], tc[:, 1], w)


def minimize_binary_energy(unary0, unary1, edges, weights, network: PairwiseNetwork | None = None):
    """Minimize ``sum_i u_i(t_i) + sum_e w_e [t_u != t_v]`` over ``t in {0,1}^n``.

    Node ``i`` is tied to the source with capacity ``u_i(0)`` and to the sink
    with capacity ``u_i(1)``, both reduced by ``min(u_i(0), u_i(1))``. Label 1
    is the source side. ``weights`` may be a scalar.

    Returns:
        ``(labels, energy)`` with ``labels`` an int8 vector.
    """
    u0 = np.asarray(unary0, dtype=float)
    u1 = np.asarray(unary1, dtype=float)
    if network is None:
        network = PairwiseNetwork(len(u0), edges)
    base = np.minimum(u0, u1)
    labels, _ = network.min_cut(u0 - base, u1 - base, weights)
    t = labels.astype(np.int8)
    return t, binary_energy(t, u0, u1, network.edges, weights)


def binary_energy(t, unary0, unary1, edges, weights) -> float:
    t = np.asarray(t).astype(bool)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    unary = np.where(t, unary1, unary0).sum()
    if len(edges) == 0:
        return float(unary)
    diff = t[edges[:, 0]] != t[edges[:, 1]]
    w = np.broadcast_to(np.asarray(weights, dtype=float), (len(edges),))
    return float(unary + w[diff].sum())
