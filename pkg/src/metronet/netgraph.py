"""Line-induced network graph: construction, connectivity, all-pairs shortest paths."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import LineTooShort, LoopInLine
from .geomodel import PlanarPoint


@dataclass(frozen=True)
class LineNetwork:
    """Undirected graph induced by a line layout.

    Edges join consecutive stations within each line; an edge shared by
    several lines is stored once with its Euclidean length.
    """

    station_count: int
    lines: tuple[tuple[int, ...], ...]
    edges: tuple[tuple[int, int, float], ...]  # (a, b, length) with a < b


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Symmetric shortest-path distances in meters.

    Unreachable pairs hold inf and flip ``reachable`` to False.
    """

    d: np.ndarray
    reachable: bool


def _station_xy(stations: Sequence[PlanarPoint] | np.ndarray) -> np.ndarray:
    if isinstance(stations, np.ndarray):
        return stations.reshape(-1, 2)
    return np.array([(p.x, p.y) for p in stations], dtype=float).reshape(-1, 2)


def build(lines: Sequence[Sequence[int]], stations: Sequence[PlanarPoint]) -> LineNetwork:
    """Validate a line layout and derive its edge set."""
    sxy = _station_xy(stations)
    n = len(sxy)
    edge_set: dict[tuple[int, int], float] = {}
    for li, line in enumerate(lines):
        if len(line) < 2:
            raise LineTooShort(li, len(line))
        seen: set[int] = set()
        for s in line:
            if not (0 <= s < n):
                raise ValueError(f"line {li}: station index {s} out of range [0, {n})")
            if s in seen:
                raise LoopInLine(li, s)
            seen.add(s)
        for a, b in zip(line, line[1:]):
            key = (a, b) if a < b else (b, a)
            if key not in edge_set:
                edge_set[key] = float(np.hypot(*(sxy[a] - sxy[b])))
    edges = tuple((a, b, length) for (a, b), length in sorted(edge_set.items()))
    return LineNetwork(n, tuple(tuple(line) for line in lines), edges)


def _adjacency(net: LineNetwork) -> list[list[tuple[int, float]]]:
    adj: list[list[tuple[int, float]]] = [[] for _ in range(net.station_count)]
    for a, b, length in net.edges:
        adj[a].append((b, length))
        adj[b].append((a, length))
    return adj


def is_connected(net: LineNetwork) -> bool:
    """True iff every station is reachable from every other (isolated stations count)."""
    if net.station_count == 0:
        return True
    adj = _adjacency(net)
    seen = [False] * net.station_count
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        u = stack.pop()
        for v, _ in adj[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                stack.append(v)
    return count == net.station_count


def _dijkstra(adj: list[list[tuple[int, float]]], source: int, n: int) -> list[float]:
    dist = [math.inf] * n
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        du, u = heapq.heappop(heap)
        if du > dist[u]:
            continue
        for v, w in adj[u]:
            dv = du + w
            if dv < dist[v]:
                dist[v] = dv
                heapq.heappush(heap, (dv, v))
    return dist


def all_pairs_distances(net: LineNetwork, transfer_penalty_m: float = 0.0) -> DistanceMatrix:
    """Dijkstra from every source over the line-induced graph.

    With a positive ``transfer_penalty_m``, runs on a line-expanded graph in
    which switching lines at a shared station costs a fixed equivalent length.
    """
    n = net.station_count
    if transfer_penalty_m > 0.0:
        return _all_pairs_with_transfers(net, transfer_penalty_m)
    adj = _adjacency(net)
    d = np.empty((n, n))
    for s in range(n):
        d[s] = _dijkstra(adj, s, n)
    reachable = bool(np.isfinite(d).all())
    return DistanceMatrix(d, reachable)


def _all_pairs_with_transfers(net: LineNetwork, penalty: float) -> DistanceMatrix:
    """Shortest paths over (station, line) nodes with per-line-change penalties.

    Boarding at the origin is free; every subsequent line change at a shared
    station adds ``penalty`` meters of equivalent length.
    """
    n = net.station_count
    lengths = {(a, b): w for a, b, w in net.edges}
    lengths.update({(b, a): w for a, b, w in net.edges})

    # expanded node = (station, line index); plus transfer edges at shared stations
    nodes: list[tuple[int, int]] = []
    node_id: dict[tuple[int, int], int] = {}
    for li, line in enumerate(net.lines):
        for s in line:
            node_id[(s, li)] = len(nodes)
            nodes.append((s, li))
    adj: list[list[tuple[int, float]]] = [[] for _ in nodes]
    for li, line in enumerate(net.lines):
        for a, b in zip(line, line[1:]):
            u, v = node_id[(a, li)], node_id[(b, li)]
            w = lengths[(a, b)]
            adj[u].append((v, w))
            adj[v].append((u, w))
    by_station: dict[int, list[int]] = {}
    for idx, (s, _) in enumerate(nodes):
        by_station.setdefault(s, []).append(idx)
    for idxs in by_station.values():
        for i in idxs:
            for j in idxs:
                if i != j:
                    adj[i].append((j, penalty))

    d = np.full((n, n), math.inf)
    np.fill_diagonal(d, 0.0)
    for s, sources in by_station.items():
        # multi-source Dijkstra: board any line at the origin for free
        dist = [math.inf] * len(nodes)
        heap = []
        for src in sources:
            dist[src] = 0.0
            heap.append((0.0, src))
        heapq.heapify(heap)
        while heap:
            du, u = heapq.heappop(heap)
            if du > dist[u]:
                continue
            for v, w in adj[u]:
                dv = du + w
                if dv < dist[v]:
                    dist[v] = dv
                    heapq.heappush(heap, (dv, v))
        for idx, (t, _) in enumerate(nodes):
            if dist[idx] < d[s, t]:
                d[s, t] = dist[idx]
    d = np.minimum(d, d.T)  # symmetric by construction; guard float asymmetry
    reachable = bool(np.isfinite(d).all())
    return DistanceMatrix(d, reachable)
