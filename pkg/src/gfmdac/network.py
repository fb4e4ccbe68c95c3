"""Lossless linear (DC) network coupling with breaker-driven islanding.

Grid-forming inverters and generators are angle sources at their buses;
loads and grid-following injections are netted into bus demand.  Per island
the load buses are eliminated (Kron reduction) so that source injections are
an affine function of source angles::

    p_src = K @ theta_src + c0 + G @ p_gfl

:class:`NetworkOperator` holds ``K``, ``c0`` and ``G`` already converted to
each device's own per-unit base, which is what the integration kernel uses.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .events import Event, EventKind


class NetworkConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Line:
    id: str
    from_bus: int
    to_bus: int
    b: float  # susceptance, pu on system base
    closed: bool = True


@dataclass
class NetworkModel:
    buses: tuple
    lines: tuple
    placements: dict  # device id -> bus
    sources: tuple  # ids of angle-source devices, kernel order
    loads: dict = field(default_factory=dict)  # bus -> (p, q), system pu
    s_base: float = 1000.0  # kVA

    def __post_init__(self):
        bus_set = set(self.buses)
        if len(bus_set) != len(self.buses):
            raise NetworkConfigError("duplicate bus ids")
        seen = set()
        for ln in self.lines:
            if ln.id in seen:
                raise NetworkConfigError(f"duplicate line id {ln.id!r}")
            seen.add(ln.id)
            if ln.from_bus not in bus_set or ln.to_bus not in bus_set:
                raise NetworkConfigError(f"line {ln.id!r} references an unknown bus")
            if not ln.b > 0:
                raise NetworkConfigError(f"line {ln.id!r}: susceptance must be > 0")
        for dev, bus in self.placements.items():
            if bus not in bus_set:
                raise NetworkConfigError(f"device {dev!r} placed on unknown bus {bus}")
        src_buses = [self.placements[s] for s in self.sources]
        if len(set(src_buses)) != len(src_buses):
            raise NetworkConfigError("at most one angle source per bus")
        for bus in self.loads:
            if bus not in bus_set:
                raise NetworkConfigError(f"load on unknown bus {bus}")

    def bus_index(self):
        return {b: i for i, b in enumerate(self.buses)}

    def load_p(self, bus) -> float:
        return self.loads.get(bus, (0.0, 0.0))[0]

    def line(self, line_id) -> Line:
        for ln in self.lines:
            if ln.id == line_id:
                return ln
        raise NetworkConfigError(f"unknown line {line_id!r}")


@dataclass(frozen=True)
class Island:
    buses: tuple
    devices: tuple
    has_source: bool


def partition_islands(model: NetworkModel) -> list[Island]:
    """Connected components over closed breakers, ordered by smallest bus id."""
    parent = {b: b for b in model.buses}

    def find(b):
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        return b

    for ln in model.lines:
        if ln.closed:
            ra, rb = find(ln.from_bus), find(ln.to_bus)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)

    groups: dict = {}
    for b in model.buses:
        groups.setdefault(find(b), []).append(b)
    sources = set(model.sources)
    islands = []
    for members in groups.values():
        members = tuple(sorted(members))
        mset = set(members)
        devs = tuple(d for d, bus in model.placements.items() if bus in mset)
        islands.append(Island(members, devs, any(d in sources for d in devs)))
    islands.sort(key=lambda isl: isl.buses[0])
    return islands


def island_frequency(island: Island, freqs: dict, ratings: dict) -> float:
    """Rating-weighted mean frequency of the island's sources."""
    members = [d for d in island.devices if d in freqs]
    if not members:
        raise ValueError("island has no frequency source (de-energized)")
    total = sum(ratings[d] for d in members)
    return sum(ratings[d] * freqs[d] for d in members) / total


def _laplacian(model: NetworkModel, buses) -> np.ndarray:
    idx = {b: i for i, b in enumerate(buses)}
    B = np.zeros((len(buses), len(buses)))
    for ln in model.lines:
        if ln.closed and ln.from_bus in idx and ln.to_bus in idx:
            i, j = idx[ln.from_bus], idx[ln.to_bus]
            B[i, i] += ln.b
            B[j, j] += ln.b
            B[i, j] -= ln.b
            B[j, i] -= ln.b
    return B


@dataclass
class FlowResult:
    injections: np.ndarray  # per source, system pu, model.sources order
    bus_angles: dict
    dead_islands: list  # islands carrying load with no source


def dc_injections(angles, model: NetworkModel, gfl_injections=None) -> FlowResult:
    """Source injections (system pu) for the given source angles.

    Solves the full bus-angle problem per island: load-bus angles from the
    grounded Laplacian, then each source's injection as its bus flow plus
    local net demand.  ``gfl_injections`` maps GFL ids to system-pu output.
    """
    angles = np.asarray(angles, dtype=float)
    gfl_injections = gfl_injections or {}
    demand = {b: model.load_p(b) for b in model.buses}
    for dev, p in gfl_injections.items():
        demand[model.placements[dev]] -= p
    src_bus = {model.placements[s]: k for k, s in enumerate(model.sources)}
    inj = np.zeros(len(model.sources))
    bus_angles = {}
    dead = []
    for isl in partition_islands(model):
        if not isl.has_source:
            if any(abs(demand[b]) > 0 for b in isl.buses):
                dead.append(isl)
            continue
        buses = list(isl.buses)
        B = _laplacian(model, buses)
        s_idx = [i for i, b in enumerate(buses) if b in src_bus]
        l_idx = [i for i, b in enumerate(buses) if b not in src_bus]
        theta = np.zeros(len(buses))
        for i in s_idx:
            theta[i] = angles[src_bus[buses[i]]]
        d = np.array([demand[b] for b in buses])
        if l_idx:
            rhs = -d[l_idx] - B[np.ix_(l_idx, s_idx)] @ theta[s_idx]
            theta[l_idx] = np.linalg.solve(B[np.ix_(l_idx, l_idx)], rhs)
        flow_out = B @ theta
        for i in s_idx:
            inj[src_bus[buses[i]]] = flow_out[i] + d[i]
        bus_angles.update(zip(buses, theta))
    return FlowResult(inj, bus_angles, dead)


@dataclass
class NetworkOperator:
    """Affine angle-to-injection map for the current topology, device pu."""

    K: np.ndarray  # (n_src, n_src)
    c0: np.ndarray  # (n_src,)
    G: np.ndarray  # (n_src, n_gfl)
    W: np.ndarray  # (n_energized_islands, n_src) rating weights, rows sum to 1
    bus_island: np.ndarray  # per bus: energized island row in W or -1
    gfl_island: np.ndarray  # per GFL: energized island row in W or -1
    islands: list  # energized islands, W row order
    dead_islands: list  # source-less islands that carry load


def build_operator(model: NetworkModel, src_ratings, gfl_ids, gfl_ratings) -> NetworkOperator:
    src_ratings = np.asarray(src_ratings, dtype=float)
    n_src, n_gfl = len(model.sources), len(gfl_ids)
    src_pos = {model.placements[s]: k for k, s in enumerate(model.sources)}
    K = np.zeros((n_src, n_src))
    c = np.zeros(n_src)
    G = np.zeros((n_src, n_gfl))
    bus_island = np.full(len(model.buses), -1, dtype=np.int64)
    gfl_island = np.full(n_gfl, -1, dtype=np.int64)
    bidx = model.bus_index()
    energized, dead = [], []
    for isl in partition_islands(model):
        if not isl.has_source:
            if any(abs(model.load_p(b)) > 0 for b in isl.buses):
                dead.append(isl)
            continue
        row = len(energized)
        energized.append(isl)
        for b in isl.buses:
            bus_island[bidx[b]] = row
        buses = list(isl.buses)
        B = _laplacian(model, buses)
        s_idx = [i for i, b in enumerate(buses) if b in src_pos]
        l_idx = [i for i, b in enumerate(buses) if b not in src_pos]
        glob = [src_pos[buses[i]] for i in s_idx]
        d = np.array([model.load_p(b) for b in buses])
        # H maps bus demand to source injection: identity on source buses,
        # -B_SL B_LL^-1 on load buses
        H = np.zeros((len(s_idx), len(buses)))
        H[np.arange(len(s_idx)), s_idx] = 1.0
        Kred = B[np.ix_(s_idx, s_idx)].copy()
        if l_idx:
            X = np.linalg.solve(B[np.ix_(l_idx, l_idx)], B[np.ix_(l_idx, s_idx)])
            Kred -= B[np.ix_(s_idx, l_idx)] @ X
            Y = np.linalg.solve(B[np.ix_(l_idx, l_idx)], np.eye(len(l_idx)))
            H[:, l_idx] = -B[np.ix_(s_idx, l_idx)] @ Y
        K[np.ix_(glob, glob)] = Kred
        c[glob] = H @ d
        local = {b: i for i, b in enumerate(buses)}
        for g, gid in enumerate(gfl_ids):
            gb = model.placements[gid]
            if gb in local:
                gfl_island[g] = row
                # GFL output lowers demand at its bus
                G[glob, g] = -H[:, local[gb]]
    scale = model.s_base / src_ratings
    W = np.zeros((len(energized), n_src))
    for row, isl in enumerate(energized):
        members = [k for k, s in enumerate(model.sources) if s in isl.devices]
        W[row, members] = src_ratings[members] / src_ratings[members].sum()
    gfl_ratings = np.asarray(gfl_ratings, dtype=float)
    return NetworkOperator(
        K=np.ascontiguousarray(K * scale[:, None]),
        c0=np.ascontiguousarray(c * scale),
        G=np.ascontiguousarray(G * (gfl_ratings[None, :] / src_ratings[:, None])) if n_gfl else np.zeros((n_src, 0)),
        W=np.ascontiguousarray(W),
        bus_island=bus_island,
        gfl_island=gfl_island,
        islands=energized,
        dead_islands=dead,
    )


def apply_switch_event(model: NetworkModel, event: Event) -> NetworkModel:
    """Return the model with a breaker or load event applied.

    Events that do not touch the network (redispatch, attack window) return
    the model unchanged.
    """
    if event.kind in (EventKind.BREAKER_OPEN, EventKind.BREAKER_CLOSE):
        target = model.line(event.target)
        closed = event.kind is EventKind.BREAKER_CLOSE
        lines = tuple(replace(ln, closed=closed) if ln.id == target.id else ln for ln in model.lines)
        return replace(model, lines=lines)
    if event.kind is EventKind.LOAD_STEP:
        if event.target not in set(model.buses):
            raise NetworkConfigError(f"load step on unknown bus {event.target!r}")
        loads = dict(model.loads)
        p, q = loads.get(event.target, (0.0, 0.0))
        loads[event.target] = (p + event.value, q + event.dq)
        return replace(model, loads=loads)
    return model
