"""Road network model: lanes, reversal masks, reversal-policy constraints.

A network is a directed multigraph of roads; each road carries one or more
lanes sharing its direction and length. A subset of lanes is reversible, and
the ordered ``reversible_lanes`` list fixes the chromosome bit positions: bit
i set means "move lane i onto the opposite-direction road".

All types are immutable after construction and ``apply_reversal`` is pure, so
everything here is safe to share across threads.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path


class InfeasibleMaskError(ValueError):
    """A reversal mask has the wrong length or violates the constraints."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Lane:
    id: str
    vmax: float  # m/s, > 0
    reversible: bool = False


@dataclass(frozen=True)
class Road:
    id: str
    from_node: str
    to_node: str
    length: float  # meters, > 0; shared by all lanes of the road
    lanes: tuple[Lane, ...]


@dataclass(frozen=True)
class LaneRef:
    """Location of one reversible lane and where it goes when reversed.

    ``reverse_to`` is the (from_node, to_node) pair of the opposite-direction
    road the lane joins when its bit is set; for a lane on road A->B that is
    (B, A). The target road is created on demand if it does not exist.
    """
    road_id: str
    lane_id: str
    reverse_to: tuple[str, str]


@dataclass(frozen=True)
class Network:
    nodes: tuple[str, ...]
    roads: tuple[Road, ...]
    reversible_lanes: tuple[LaneRef, ...] = ()

    @property
    def num_reversible(self) -> int:
        return len(self.reversible_lanes)

    def roads_by_id(self) -> dict[str, Road]:
        return {road.id: road for road in self.roads}


@dataclass(frozen=True)
class ReversalMask:
    """Fixed-length bit vector; position i maps to ``reversible_lanes[i]``."""
    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("mask bits must be 0 or 1")

    def __len__(self) -> int:
        return len(self.bits)

    @classmethod
    def zeros(cls, n: int) -> "ReversalMask":
        return cls((0,) * n)

    @classmethod
    def from_string(cls, s: str) -> "ReversalMask":
        if any(c not in "01" for c in s):
            raise ValueError(f"mask string must be over alphabet {{0,1}}, got {s!r}")
        return cls(tuple(int(c) for c in s))

    def to_string(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    def popcount(self) -> int:
        return sum(self.bits)


@dataclass(frozen=True)
class ReversalConstraints:
    """Reversal-policy constraints over bit indices.

    ``mutual_exclusions``: unordered pairs {i, j} that may not both be set.
    ``dependencies``: ordered pairs (i, j) meaning bit i may be 1 only if
    bit j is 1. The dependency graph must be acyclic.
    """
    mutual_exclusions: tuple[tuple[int, int], ...] = ()
    dependencies: tuple[tuple[int, int], ...] = ()

    def validate(self, n_bits: int) -> None:
        """Raise ValueError on out-of-range indices, self-pairs or cycles."""
        for i, j in self.mutual_exclusions:
            if i == j:
                raise ValueError(f"mutual exclusion with identical indices {{{i}, {j}}}")
            if not (0 <= i < n_bits and 0 <= j < n_bits):
                raise ValueError(f"mutual exclusion {{{i}, {j}}} out of range for N={n_bits}")
        adjacency: dict[int, list[int]] = {}
        for i, j in self.dependencies:
            if i == j:
                raise ValueError(f"dependency with identical indices ({i}, {j})")
            if not (0 <= i < n_bits and 0 <= j < n_bits):
                raise ValueError(f"dependency ({i}, {j}) out of range for N={n_bits}")
            adjacency.setdefault(i, []).append(j)
        # cycle check: iterative DFS with colors
        WHITE, GRAY, BLACK = 0, 1, 2
        color = {node: WHITE for node in adjacency}
        for start in adjacency:
            if color[start] != WHITE:
                continue
            stack: list[tuple[int, int]] = [(start, 0)]
            color[start] = GRAY
            while stack:
                node, pos = stack[-1]
                children = adjacency.get(node, ())
                if pos < len(children):
                    stack[-1] = (node, pos + 1)
                    child = children[pos]
                    state = color.get(child, WHITE)
                    if state == GRAY:
                        raise ValueError("dependency graph has a cycle")
                    if state == WHITE:
                        color[child] = GRAY
                        stack.append((child, 0))
                else:
                    color[node] = BLACK
                    stack.pop()


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def validate_network(net: Network) -> list[str]:
    """Check all structural invariants; returns one message per violation.

    Violations are data, not failures: an empty list means the network is
    well formed.
    """
    violations: list[str] = []
    node_set = set(net.nodes)
    if len(node_set) != len(net.nodes):
        violations.append("duplicate node ids")

    seen_roads: set[str] = set()
    for road in net.roads:
        if road.id in seen_roads:
            violations.append(f"road {road.id}: duplicate road id")
        seen_roads.add(road.id)
        if road.from_node not in node_set:
            violations.append(f"road {road.id}: unknown from_node {road.from_node}")
        if road.to_node not in node_set:
            violations.append(f"road {road.id}: unknown to_node {road.to_node}")
        if road.from_node == road.to_node:
            violations.append(f"road {road.id}: from_node equals to_node")
        if not road.length > 0:
            violations.append(f"road {road.id}: length must be > 0")
        if not road.lanes:
            violations.append(f"road {road.id}: no lanes")
        lane_ids: set[str] = set()
        for lane in road.lanes:
            if lane.id in lane_ids:
                violations.append(f"road {road.id}: duplicate lane id {lane.id}")
            lane_ids.add(lane.id)
            if not lane.vmax > 0:
                violations.append(f"lane {lane.id} on road {road.id}: vmax must be > 0")

    roads = net.roads_by_id()
    seen_refs: set[tuple[str, str]] = set()
    for pos, ref in enumerate(net.reversible_lanes):
        key = (ref.road_id, ref.lane_id)
        if key in seen_refs:
            violations.append(f"reversible lane {pos}: duplicate reference to {key}")
        seen_refs.add(key)
        road = roads.get(ref.road_id)
        if road is None:
            violations.append(f"reversible lane {pos}: unknown road {ref.road_id}")
            continue
        lane = next((l for l in road.lanes if l.id == ref.lane_id), None)
        if lane is None:
            violations.append(
                f"reversible lane {pos}: lane {ref.lane_id} not on road {ref.road_id}"
            )
        elif not lane.reversible:
            violations.append(
                f"reversible lane {pos}: lane {ref.lane_id} is not marked reversible"
            )
        for node in ref.reverse_to:
            if node not in node_set:
                violations.append(f"reversible lane {pos}: unknown reverse_to node {node}")
    return violations


def check_constraints(
    mask: ReversalMask, cons: ReversalConstraints
) -> list[tuple[str, int, int]]:
    """List every violated constraint for a mask.

    Returns ("mutex", i, j) for each exclusion with both bits set and
    ("implies", i, j) for each dependency with bit i set and bit j clear,
    sorted by (i, j, kind). Raises IndexError if the constraints reference
    bits >= len(mask).
    """
    bits = mask.bits
    n = len(bits)
    out: list[tuple[str, int, int]] = []
    for i, j in cons.mutual_exclusions:
        if i >= n or j >= n:
            raise IndexError(f"mutual exclusion {{{i}, {j}}} references bits >= N={n}")
        lo, hi = (i, j) if i < j else (j, i)
        if bits[lo] and bits[hi]:
            out.append(("mutex", lo, hi))
    for i, j in cons.dependencies:
        if i >= n or j >= n:
            raise IndexError(f"dependency ({i}, {j}) references bits >= N={n}")
        if bits[i] and not bits[j]:
            out.append(("implies", i, j))
    out.sort(key=lambda v: (v[1], v[2], v[0] != "mutex"))
    return out


def repair(mask: ReversalMask, cons: ReversalConstraints) -> ReversalMask:
    """Clear bits until the mask satisfies all constraints.

    Deterministic: the first violation in ascending (i, j) order is fixed per
    iteration — the higher index of an exclusion pair, the antecedent of a
    dependency — then violations are recomputed, until a fixpoint. Only ever
    clears bits, so popcount never increases; idempotent by construction.
    """
    bits = list(mask.bits)
    while True:
        violations = check_constraints(ReversalMask(tuple(bits)), cons)
        if not violations:
            return ReversalMask(tuple(bits))
        kind, i, j = violations[0]
        bits[j if kind == "mutex" else i] = 0


def apply_reversal(
    net: Network, mask: ReversalMask, cons: ReversalConstraints | None = None
) -> Network:
    """Return a new network with every set-bit lane moved to its opposite road.

    For each set bit the referenced lane leaves its road and is appended to
    the road named by ``reverse_to`` (created with the source road's length if
    absent); roads left without lanes are dropped. The input is not mutated.
    When ``cons`` is given the mask is verified first.
    """
    n = len(net.reversible_lanes)
    if len(mask) != n:
        raise InfeasibleMaskError(f"mask length {len(mask)} != N={n}")
    if cons is not None:
        violations = check_constraints(mask, cons)
        if violations:
            raise InfeasibleMaskError(
                "infeasible mask: " + ", ".join(_format_violation(v) for v in violations)
            )

    # mutable shadow of the road list, in original order; created roads append
    order: list[str] = []
    shadow: dict[str, dict] = {}
    for road in net.roads:
        order.append(road.id)
        shadow[road.id] = {
            "from": road.from_node,
            "to": road.to_node,
            "length": road.length,
            "lanes": list(road.lanes),
        }
    pair_to_road: dict[tuple[str, str], str] = {}
    for road in net.roads:
        pair_to_road.setdefault((road.from_node, road.to_node), road.id)

    new_refs = list(net.reversible_lanes)
    for pos, bit in enumerate(mask.bits):
        if not bit:
            continue
        ref = net.reversible_lanes[pos]
        src = shadow.get(ref.road_id)
        if src is None:
            raise ValueError(f"reversible lane {pos}: unknown road {ref.road_id}")
        lane_idx = next(
            (k for k, lane in enumerate(src["lanes"]) if lane.id == ref.lane_id), None
        )
        if lane_idx is None:
            raise ValueError(
                f"reversible lane {pos}: lane {ref.lane_id} not on road {ref.road_id}"
            )
        lane = src["lanes"].pop(lane_idx)

        target_id = pair_to_road.get(ref.reverse_to)
        if target_id is None:
            target_id = f"{ref.reverse_to[0]}>{ref.reverse_to[1]}"
            while target_id in shadow:
                target_id += "+"
            shadow[target_id] = {
                "from": ref.reverse_to[0],
                "to": ref.reverse_to[1],
                "length": src["length"],
                "lanes": [],
            }
            order.append(target_id)
            pair_to_road[ref.reverse_to] = target_id
        target = shadow[target_id]
        taken = {l.id for l in target["lanes"]}
        lane_id = lane.id
        while lane_id in taken:
            lane_id += "~r"
        if lane_id != lane.id:
            lane = replace(lane, id=lane_id)
        target["lanes"].append(lane)
        new_refs[pos] = LaneRef(
            road_id=target_id,
            lane_id=lane_id,
            reverse_to=(src["from"], src["to"]),
        )

    roads = tuple(
        Road(
            id=rid,
            from_node=shadow[rid]["from"],
            to_node=shadow[rid]["to"],
            length=shadow[rid]["length"],
            lanes=tuple(shadow[rid]["lanes"]),
        )
        for rid in order
        if shadow[rid]["lanes"]
    )
    return Network(nodes=net.nodes, roads=roads, reversible_lanes=tuple(new_refs))


def _format_violation(v: tuple[str, int, int]) -> str:
    kind, i, j = v
    return f"mutex{{{i},{j}}}" if kind == "mutex" else f"implies({i}=>{j})"


# ---------------------------------------------------------------------------
# File format
# ---------------------------------------------------------------------------

def network_to_dict(net: Network, cons: ReversalConstraints) -> dict:
    return {
        "nodes": list(net.nodes),
        "roads": [
            {
                "id": road.id,
                "from": road.from_node,
                "to": road.to_node,
                "length_m": road.length,
                "lanes": [
                    {"id": lane.id, "vmax_ms": lane.vmax, "reversible": lane.reversible}
                    for lane in road.lanes
                ],
            }
            for road in net.roads
        ],
        "reversible_order": [
            {
                "road_id": ref.road_id,
                "lane_id": ref.lane_id,
                "reverse_to": list(ref.reverse_to),
            }
            for ref in net.reversible_lanes
        ],
        "constraints": {
            "mutex": [list(p) for p in cons.mutual_exclusions],
            "implies": [list(p) for p in cons.dependencies],
        },
    }


def network_from_dict(data: dict) -> tuple[Network, ReversalConstraints]:
    net = Network(
        nodes=tuple(data["nodes"]),
        roads=tuple(
            Road(
                id=r["id"],
                from_node=r["from"],
                to_node=r["to"],
                length=float(r["length_m"]),
                lanes=tuple(
                    Lane(id=l["id"], vmax=float(l["vmax_ms"]), reversible=bool(l["reversible"]))
                    for l in r["lanes"]
                ),
            )
            for r in data["roads"]
        ),
        reversible_lanes=tuple(
            LaneRef(
                road_id=ref["road_id"],
                lane_id=ref["lane_id"],
                reverse_to=(ref["reverse_to"][0], ref["reverse_to"][1]),
            )
            for ref in data.get("reversible_order", ())
        ),
    )
    raw = data.get("constraints", {})
    cons = ReversalConstraints(
        mutual_exclusions=tuple((int(i), int(j)) for i, j in raw.get("mutex", ())),
        dependencies=tuple((int(i), int(j)) for i, j in raw.get("implies", ())),
    )
    violations = validate_network(net)
    if violations:
        raise ValueError("invalid network file: " + "; ".join(violations))
    cons.validate(net.num_reversible)
    return net, cons


def save_network(net: Network, cons: ReversalConstraints, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(network_to_dict(net, cons), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def load_network(path: str | Path) -> tuple[Network, ReversalConstraints]:
    return network_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
