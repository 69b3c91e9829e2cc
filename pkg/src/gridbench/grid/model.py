"""Electrical network data model.

All quantities are stored in per-unit on the case's MVA base. Values are
immutable after construction: every mutation helper returns a new
:class:`GridCase`, so cases can be shared freely across concurrent runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

BUS_KINDS = ("slack", "pv", "pq")
BRANCH_STATUS = ("closed", "open")
GEN_STATUS = ("on", "off")
LOAD_STYLES = ("constant", "smooth", "oscillating", "abrupt")
EVENT_KINDS = ("line_open", "line_close", "bus_split", "bus_merge", "gen_on", "gen_off")
EVENT_LABELS = ("known", "anomaly")


class GridModelError(ValueError):
    """Violated structural invariant of a grid case."""


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str  # slack | pv | pq
    vm: float = 1.0
    va: float = 0.0
    v_min: float = 0.94
    v_max: float = 1.06
    gs: float = 0.0
    bs: float = 0.0

    def __post_init__(self):
        if self.kind not in BUS_KINDS:
            raise GridModelError(f"bus {self.id}: unknown kind {self.kind!r}")
        if not self.v_min < self.v_max:
            raise GridModelError(f"bus {self.id}: v_min must be < v_max")
        if self.vm <= 0:
            raise GridModelError(f"bus {self.id}: vm must be positive")


@dataclass(frozen=True)
class Branch:
    id: int
    from_bus: int
    to_bus: int
    r: float
    x: float
    b: float = 0.0
    tap: float = 1.0
    shift: float = 0.0
    rate_a: float = 0.0  # 0 = unlimited
    status: str = "closed"

    def __post_init__(self):
        if self.r == 0.0 and self.x == 0.0:
            raise GridModelError(f"branch {self.id}: r and x cannot both be zero")
        if self.tap <= 0:
            raise GridModelError(f"branch {self.id}: tap must be positive")
        if self.status not in BRANCH_STATUS:
            raise GridModelError(f"branch {self.id}: unknown status {self.status!r}")

    @property
    def closed(self) -> bool:
        return self.status == "closed"


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    pg: float = 0.0
    qg: float = 0.0
    p_min: float = 0.0
    p_max: float = 0.0
    q_min: float = 0.0
    q_max: float = 0.0
    v_set: float = 1.0
    status: str = "on"
    cost_c2: float = 0.0
    cost_c1: float = 0.0
    cost_c0: float = 0.0

    def __post_init__(self):
        if self.p_min > self.p_max:
            raise GridModelError(f"gen {self.id}: p_min > p_max")
        if self.q_min > self.q_max:
            raise GridModelError(f"gen {self.id}: q_min > q_max")
        if self.status not in GEN_STATUS:
            raise GridModelError(f"gen {self.id}: unknown status {self.status!r}")

    @property
    def online(self) -> bool:
        return self.status == "on"


@dataclass(frozen=True)
class Load:
    id: int
    bus: int
    pd: float
    qd: float
    group: str = "g1"
    style: str = "constant"

    def __post_init__(self):
        if self.style not in LOAD_STYLES:
            raise GridModelError(f"load {self.id}: unknown style {self.style!r}")


@dataclass(frozen=True)
class SwitchLink:
    """Zero-impedance switching device between two bus sections."""

    id: int
    bus_a: int
    bus_b: int
    status: str = "open"

    def __post_init__(self):
        if self.bus_a == self.bus_b:
            raise GridModelError(f"switch {self.id}: endpoints must differ")
        if self.status not in BRANCH_STATUS:
            raise GridModelError(f"switch {self.id}: unknown status {self.status!r}")


@dataclass(frozen=True)
class TopologyEvent:
    tick: int
    kind: str  # line_open | line_close | bus_split | bus_merge | gen_on | gen_off
    target: int  # branch id, switch id, or generator id depending on kind
    label: str = "known"

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise GridModelError(f"event at tick {self.tick}: unknown kind {self.kind!r}")
        if self.label not in EVENT_LABELS:
            raise GridModelError(f"event at tick {self.tick}: unknown label {self.label!r}")

    @property
    def changes_graph(self) -> bool:
        return self.kind in ("line_open", "line_close", "bus_split", "bus_merge")


@dataclass(frozen=True)
class MergeRecord:
    """Pre-merge state recorded when a switch closure contracts two buses.

    A later ``bus_split`` restores exactly this partition instead of trying
    to re-derive one. The merged switch itself lives here while contracted
    (it has no representable endpoints in the bus-branch model). Merge
    records are runtime state and are not serialized into case documents.
    """

    switch: "SwitchLink"
    kept: Bus          # original bus object that remained (possibly modified)
    removed: Bus       # original bus object that was absorbed
    branch_from: tuple[int, ...]  # branches whose from_bus pointed at removed
    branch_to: tuple[int, ...]
    gens: tuple[int, ...]
    loads: tuple[int, ...]
    switch_a: tuple[int, ...]  # other switches whose bus_a pointed at removed
    switch_b: tuple[int, ...]

    @property
    def switch_id(self) -> int:
        return self.switch.id


@dataclass(frozen=True)
class GridCase:
    name: str
    base_mva: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    loads: tuple[Load, ...]
    switches: tuple[SwitchLink, ...] = ()
    merge_records: tuple[MergeRecord, ...] = field(default=(), compare=False)

    def __post_init__(self):
        validate_case(self)

    # -- lookup helpers ---------------------------------------------------

    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]

    def bus(self, bus_id: int) -> Bus:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise GridModelError(f"unknown bus {bus_id}")

    def branch(self, branch_id: int) -> Branch:
        for br in self.branches:
            if br.id == branch_id:
                return br
        raise GridModelError(f"unknown branch {branch_id}")

    def generator(self, gen_id: int) -> Generator:
        for g in self.generators:
            if g.id == gen_id:
                return g
        raise GridModelError(f"unknown generator {gen_id}")

    def switch(self, switch_id: int) -> SwitchLink:
        for s in self.switches:
            if s.id == switch_id:
                return s
        raise GridModelError(f"unknown switch {switch_id}")

    def loads_at(self, bus_id: int) -> list[Load]:
        return [l for l in self.loads if l.bus == bus_id]

    def gens_at(self, bus_id: int) -> list[Generator]:
        return [g for g in self.generators if g.bus == bus_id]

    def closed_branch_key(self) -> frozenset[tuple[int, int, int]]:
        """Identity of the electrical topology: closed branches with endpoints.

        Including endpoints makes bus merges/splits visible, not just status
        flips.
        """
        return frozenset((br.id, br.from_bus, br.to_bus) for br in self.branches if br.closed)

    # -- functional updates -----------------------------------------------

    def with_branch(self, branch: Branch) -> "GridCase":
        return replace(self, branches=tuple(branch if br.id == branch.id else br for br in self.branches))

    def with_generator(self, gen: Generator) -> "GridCase":
        return replace(self, generators=tuple(gen if g.id == gen.id else g for g in self.generators))

    def with_loads(self, loads: tuple[Load, ...]) -> "GridCase":
        return replace(self, loads=loads)


def validate_case(case: GridCase) -> None:
    """Check referential integrity and per-island slack uniqueness."""
    if case.base_mva <= 0:
        raise GridModelError("base_mva must be positive")
    bus_ids = [b.id for b in case.buses]
    bus_set = set(bus_ids)
    if len(bus_set) != len(bus_ids):
        dup = sorted(i for i in bus_set if bus_ids.count(i) > 1)
        raise GridModelError(f"duplicate bus ids {dup}")
    for coll, label in ((case.branches, "branch"), (case.generators, "gen"),
                        (case.loads, "load"), (case.switches, "switch")):
        ids = [c.id for c in coll]
        if len(set(ids)) != len(ids):
            raise GridModelError(f"duplicate {label} ids")
    for br in case.branches:
        for end in (br.from_bus, br.to_bus):
            if end not in bus_set:
                raise GridModelError(f"branch {br.id}: unknown bus {end}")
    for g in case.generators:
        if g.bus not in bus_set:
            raise GridModelError(f"gen {g.id}: unknown bus {g.bus}")
    for l in case.loads:
        if l.bus not in bus_set:
            raise GridModelError(f"load {l.id}: unknown bus {l.bus}")
    for s in case.switches:
        for end in (s.bus_a, s.bus_b):
            if end not in bus_set:
                raise GridModelError(f"switch {s.id}: unknown bus {end}")
    _check_island_slacks(case)


def _check_island_slacks(case: GridCase) -> None:
    """No bus-branch island may hold more than one slack bus.

    Closed switches are deliberately excluded here: two slack buses joined
    only by a closed switch are a node-breaker artifact that the topology
    processor rejects ("conflicting slack") when it contracts them. A
    load-bearing island *without* a slack is legal at the model level
    (topology events can create one); it is reported by connectivity_check
    and rejected by the power-flow solver, not here.
    """
    for members in islands_of(case, include_switches=False):
        slacks = [b for b in members if case.bus(b).kind == "slack"]
        if len(slacks) > 1:
            raise GridModelError(f"island with buses {sorted(members)} has multiple slack buses {slacks}")


def require_slack_per_active_island(case: GridCase) -> None:
    """Strict check used when loading fresh case documents: every island
    containing any generator or load must have exactly one slack bus."""
    active_buses = {g.bus for g in case.generators} | {l.bus for l in case.loads}
    for members in islands_of(case):
        slacks = [b for b in members if case.bus(b).kind == "slack"]
        if not slacks and any(b in active_buses for b in members):
            raise GridModelError(
                f"island with buses {sorted(members)} has load/generation but no slack bus")


def islands_of(case: GridCase, include_switches: bool = True) -> list[list[int]]:
    """Bus ids grouped into islands, each sorted, ordered by smallest member."""
    comp = island_membership(case, include_switches=include_switches)
    groups: dict[int, list[int]] = {}
    for bus_id, root in comp.items():
        groups.setdefault(root, []).append(bus_id)
    return [sorted(v) for _, v in sorted(groups.items())]


def island_membership(case: GridCase, include_switches: bool = True) -> dict[int, int]:
    """Map bus id -> island root over closed branches (and closed switches)."""
    parent = {b.id: b.id for b in case.buses}

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for br in case.branches:
        if br.closed:
            union(br.from_bus, br.to_bus)
    if include_switches:
        for s in case.switches:
            if s.status == "closed":
                union(s.bus_a, s.bus_b)
    return {b.id: find(b.id) for b in case.buses}
