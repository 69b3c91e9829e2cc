"""Timed experiment scenarios: profiles + event schedules -> labeled streams.

A scenario couples a grid case with per-load style profiles and a schedule
of topology/generator events, some announced ("known") and some not
("anomaly"). Running it walks the tick loop: apply due events, set loads,
dispatch generation to follow demand, solve the power flow warm-started
from the previous tick, and emit noisy sensor readings.

Announced topology ids track *known* events only; anomalies change the
physics but not the announced id, which is exactly the blind spot the
detector benchmark probes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .grid.model import GridCase, Load, TopologyEvent, islands_of
from .grid.topology import apply_event, connectivity_check
from .loadsynth import StyleParams, profiles_matrix, sample_population
from .powerflow import PFSolution, branch_flows, solve_pf
from .rng import Rng, derive_seed

# paper-observed daily event rates per component (operations per 24h per unit)
RATE_BUS_OPS_PER_BUS = 46.0 / 20000.0
RATE_LINE_CHANGES_PER_LINE = 137.0 / 17000.0
RATE_GEN_SWITCHES_PER_GEN = 300.0 / 2000.0

_LOAD_SEED_KEY = 101
_NOISE_SEED_KEY = 202

SENSOR_TYPES = ("vmag", "pinj", "qinj", "pflow", "qflow", "imag")


class ScenarioError(RuntimeError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    case: GridCase
    horizon: int
    load_styles: tuple[StyleParams, ...]
    known_events: tuple[TopologyEvent, ...] = ()
    anomaly_events: tuple[TopologyEvent, ...] = ()
    tick_interval_min: float = 30.0
    topology_count: int | None = None
    noise_sigma_rel: float = 0.01
    noise_floor: float = 0.01
    seed: int = 0
    train_topologies: int = 10
    dispatch_loss_frac: float = 0.02

    @property
    def ticks_per_day(self) -> int:
        return max(2, int(round(24 * 60 / self.tick_interval_min)))


@dataclass(frozen=True)
class Reading:
    sensor: str
    type: str
    value: float
    sigma: float


@dataclass(frozen=True)
class MeasurementFrame:
    tick: int
    readings: tuple[Reading, ...]


@dataclass(frozen=True)
class LabeledStream:
    frames: list[MeasurementFrame]
    anomaly_ticks: frozenset[int]
    known_change_ticks: frozenset[int]
    topology_id_per_tick: tuple[int, ...]
    sensor_ids: tuple[str, ...]
    sensor_types: tuple[str, ...]
    values: np.ndarray  # ticks x sensors, noisy
    topology_registry: dict[int, frozenset] = field(default_factory=dict)
    train_ticks: tuple[int, ...] = ()
    test_ticks: tuple[int, ...] = ()


@dataclass(frozen=True)
class Scenario:
    config: ScenarioConfig
    multipliers: np.ndarray  # horizon x n_loads
    events: tuple[TopologyEvent, ...]  # merged, sorted by tick
    topology_id_per_tick: tuple[int, ...]
    topology_registry: dict[int, frozenset]
    train_ticks: tuple[int, ...]
    test_ticks: tuple[int, ...]


def build_scenario(config: ScenarioConfig) -> Scenario:
    """Materialize profiles, order events, and derive the topology sequence.

    Fails fast if any event leaves a load island without an online
    generator, naming the offending event.
    """
    horizon = config.horizon
    case = config.case
    if len(config.load_styles) != len(case.loads):
        raise ScenarioError(
            f"need one StyleParams per load ({len(case.loads)}), got {len(config.load_styles)}")
    for ev in config.known_events + config.anomaly_events:
        if not (0 <= ev.tick < horizon):
            raise ScenarioError(f"event at tick {ev.tick} outside horizon {horizon}")
    known_ticks = {ev.tick for ev in config.known_events}
    anomaly_ticks = {ev.tick for ev in config.anomaly_events}
    overlap = known_ticks & anomaly_ticks
    if overlap:
        raise ScenarioError(f"known and anomaly events share ticks {sorted(overlap)}")

    events = tuple(sorted(
        [ev if ev.label == "known" else ev for ev in config.known_events] +
        list(config.anomaly_events),
        key=lambda e: (e.tick, e.label, e.kind, e.target)))

    # daily multiplier patterns tiled over the horizon
    day = config.ticks_per_day
    daily = profiles_matrix(list(config.load_styles), day,
                            derive_seed(config.seed, _LOAD_SEED_KEY))
    reps = int(np.ceil(horizon / day))
    multipliers = np.tile(daily, (reps, 1))[:horizon]

    # walk the schedule once to validate and to assign announced topology ids
    true_case = case
    announced_case = case
    topo_id = 1
    registry = {1: announced_case.closed_branch_key()}
    topo_per_tick = []
    by_tick: dict[int, list[TopologyEvent]] = {}
    for ev in events:
        by_tick.setdefault(ev.tick, []).append(ev)
    for t in range(horizon):
        announced_graph_change = False
        for ev in by_tick.get(t, ()):
            true_case = apply_event(true_case, ev)
            for rep in connectivity_check(true_case):
                if rep.unservable:
                    raise ScenarioError(
                        f"{ev.label} event {ev.kind} on {ev.target} at tick {t} "
                        f"leaves island {rep.buses} unservable")
            if ev.label == "known":
                announced_case = apply_event(announced_case, ev)
                if ev.changes_graph:
                    announced_graph_change = True
        if announced_graph_change:
            topo_id += 1
            registry[topo_id] = announced_case.closed_branch_key()
        topo_per_tick.append(topo_id)

    distinct = len(set(registry.values()))
    if distinct != len(registry):
        raise ScenarioError("announced topology sequence revisits an earlier topology")
    if config.topology_count is not None and len(registry) != config.topology_count:
        raise ScenarioError(
            f"schedule produces {len(registry)} topologies, expected {config.topology_count}")

    train_ticks = tuple(t for t in range(horizon)
                        if topo_per_tick[t] <= config.train_topologies)
    test_ticks = tuple(t for t in range(horizon)
                       if topo_per_tick[t] > config.train_topologies)
    return Scenario(config=config, multipliers=multipliers, events=events,
                    topology_id_per_tick=tuple(topo_per_tick),
                    topology_registry=registry,
                    train_ticks=train_ticks, test_ticks=test_ticks)


def generation_dispatch(case: GridCase, total_demand: float) -> dict[int, float]:
    """Proportional-to-capacity dispatch of online generators.

    Each online generator receives a share of the demand proportional to its
    p_max, clipped into its limits; the slack bus balances any residual
    during the solve.
    """
    online = [g for g in case.generators if g.online]
    if not online:
        raise ScenarioError("no online generators to dispatch")
    cap = sum(g.p_max for g in online)
    if total_demand > cap:
        raise ScenarioError(
            f"demand {total_demand:.4f} pu exceeds online capacity {cap:.4f} pu")
    out = {}
    for g in online:
        share = total_demand * g.p_max / cap if cap > 0 else 0.0
        out[g.id] = min(max(share, g.p_min), g.p_max)
    return out


def _sensor_roster(case: GridCase) -> tuple[tuple[str, ...], tuple[str, ...]]:
    ids, types = [], []
    for b in case.buses:
        ids += [f"vm:{b.id}", f"pinj:{b.id}", f"qinj:{b.id}"]
        types += ["vmag", "pinj", "qinj"]
    for br in case.branches:
        ids += [f"pf:{br.id}", f"qf:{br.id}", f"if:{br.id}"]
        types += ["pflow", "qflow", "imag"]
    return tuple(ids), tuple(types)


def _truth_vector(case: GridCase, sol: PFSolution) -> np.ndarray:
    flows = branch_flows(case, sol)
    pos = {b: i for i, b in enumerate(sol.bus_ids)}
    vals = []
    p_spec = np.zeros(len(sol.bus_ids))
    q_spec = np.zeros(len(sol.bus_ids))
    for l in case.loads:
        p_spec[pos[l.bus]] -= l.pd
        q_spec[pos[l.bus]] -= l.qd
    p_inj = sol.pg + p_spec
    q_inj = sol.qg + q_spec
    for b in case.buses:
        i = pos[b.id]
        vals += [sol.vm[i], p_inj[i], q_inj[i]]
    for k, _ in enumerate(case.branches):
        vals += [flows.p_from[k], flows.q_from[k], flows.i_from_mag[k]]
    return np.array(vals)


def run_scenario(scenario: Scenario) -> LabeledStream:
    """Execute the tick loop and emit the noisy labeled stream.

    Aborts with the tick index if the power flow fails to converge; ticks
    are never silently skipped.
    """
    cfg = scenario.config
    case = cfg.case
    base_pd = np.array([l.pd for l in case.loads])
    base_qd = np.array([l.qd for l in case.loads])
    sensor_ids, sensor_types = _sensor_roster(case)
    noise_rng = Rng(cfg.seed).spawn(_NOISE_SEED_KEY)

    by_tick: dict[int, list[TopologyEvent]] = {}
    for ev in scenario.events:
        by_tick.setdefault(ev.tick, []).append(ev)

    frames: list[MeasurementFrame] = []
    values = np.empty((cfg.horizon, len(sensor_ids)))
    current = case
    prev: PFSolution | None = None
    # fixed loss allowance keeps the dispatch a pure function of the tick's
    # loads; the slack bus balances the actual losses
    loss_frac = cfg.dispatch_loss_frac
    for t in range(cfg.horizon):
        for ev in by_tick.get(t, ()):
            current = apply_event(current, ev)
        mult = scenario.multipliers[t]
        loads = tuple(
            Load(id=l.id, bus=l.bus, pd=base_pd[j] * mult[j],
                 qd=base_qd[j] * mult[j], group=l.group, style=l.style)
            for j, l in enumerate(current.loads))
        current = current.with_loads(loads)
        total_pd = float(base_pd @ mult)
        dispatch = generation_dispatch(current, total_pd * (1.0 + loss_frac))
        gens = tuple(
            replace(g, pg=dispatch[g.id]) if g.online else g
            for g in current.generators)
        current = replace(current, generators=gens)

        if prev is not None and prev.bus_ids == tuple(b.id for b in current.buses):
            start = (prev.vm, prev.va)
        else:
            start = "flat"
        sol = solve_pf(current, start=start)
        if not sol.converged:
            raise ScenarioError(
                f"power flow diverged at tick {t} (max mismatch {sol.max_mismatch:.2e})")
        prev = sol

        truth = _truth_vector(current, sol)
        sigmas = cfg.noise_sigma_rel * np.maximum(np.abs(truth), cfg.noise_floor)
        if cfg.noise_sigma_rel > 0:
            noisy = truth + np.array([noise_rng.normal(0.0, s) for s in sigmas])
        else:
            noisy = truth
        values[t] = noisy
        frames.append(MeasurementFrame(
            tick=t,
            readings=tuple(Reading(sensor_ids[k], sensor_types[k],
                                   float(noisy[k]), float(sigmas[k]))
                           for k in range(len(sensor_ids)))))

    return LabeledStream(
        frames=frames,
        anomaly_ticks=frozenset(ev.tick for ev in scenario.events if ev.label == "anomaly"),
        known_change_ticks=frozenset(ev.tick for ev in scenario.events if ev.label == "known"),
        topology_id_per_tick=scenario.topology_id_per_tick,
        sensor_ids=sensor_ids,
        sensor_types=sensor_types,
        values=values,
        topology_registry=scenario.topology_registry,
        train_ticks=scenario.train_ticks,
        test_ticks=scenario.test_ticks,
    )


# ----------------------------------------------------------- event rates

def expected_event_counts(case: GridCase, hours: float = 24.0) -> dict[str, float]:
    """Expected event counts from the observed per-component daily rates."""
    scale = hours / 24.0
    return {
        "bus_ops": RATE_BUS_OPS_PER_BUS * len(case.buses) * scale,
        "line_changes": RATE_LINE_CHANGES_PER_LINE * len(case.branches) * scale,
        "gen_switches": RATE_GEN_SWITCHES_PER_GEN * len(case.generators) * scale,
    }


def sample_event_schedule(case: GridCase, horizon: int, tick_interval_min: float,
                          seed: int) -> list[TopologyEvent]:
    """Poisson-sampled known-event schedule at the observed rates.

    Line toggles flip the tracked status; gen switches likewise. Events
    that would leave a load island unservable are skipped.
    """
    hours = horizon * tick_interval_min / 60.0
    rates = expected_event_counts(case, hours)
    rng = Rng(seed)
    n_line = rng.poisson(rates["line_changes"])
    n_gen = rng.poisson(rates["gen_switches"])
    events: list[TopologyEvent] = []
    sim = case
    used_ticks: set[int] = set()
    for kind_count, pool in (("line", n_line), ("gen", n_gen)):
        for _ in range(pool):
            tick = rng.randrange(horizon)
            while tick in used_ticks:
                tick = rng.randrange(horizon)
            if kind_count == "line":
                br = rng.choice(sim.branches)
                kind = "line_open" if br.closed else "line_close"
                ev = TopologyEvent(tick=tick, kind=kind, target=br.id, label="known")
            else:
                g = rng.choice(sim.generators)
                kind = "gen_off" if g.online else "gen_on"
                ev = TopologyEvent(tick=tick, kind=kind, target=g.id, label="known")
            candidate = apply_event(sim, ev)
            if any(rep.unservable for rep in connectivity_check(candidate)):
                continue
            if len(islands_of(candidate)) > len(islands_of(sim)):
                continue  # keep the benchmark single-island
            sim = candidate
            used_ticks.add(tick)
            events.append(ev)
    return sorted(events, key=lambda e: e.tick)


# ------------------------------------------------------ benchmark builder

def _outage_ok(case: GridCase, branch_ids: tuple[int, ...]) -> bool:
    """True if removing the given branches keeps the case connected and solvable."""
    trial = case
    for b in branch_ids:
        trial = apply_event(trial, TopologyEvent(0, "line_open", b))
    if any(rep.unservable for rep in connectivity_check(trial)):
        return False
    if len(islands_of(trial)) > len(islands_of(case)):
        return False
    try:
        return solve_pf(trial).converged
    except Exception:
        return False


def _toggle_plan(case: GridCase, n_topologies: int) -> list[tuple[str, int]]:
    """Deterministic line-toggle sequence visiting distinct topologies.

    Produces open/close steps whose outage sets run
    {}, {1}, {1,2}, {2}, {2,3}, {3}, ... so at most two lines are out at
    once. Lines are picked by descending base-case flow, subject to each
    single and consecutive-pair outage staying connected and solvable.
    """
    n_lines = (n_topologies + 1) // 2
    sol = solve_pf(case)
    flows = branch_flows(case, sol)
    order = [int(k) for k in np.argsort(-np.abs(flows.p_from))]
    chain: list[int] = []
    for k in order:
        cand = case.branches[k].id
        if not _outage_ok(case, (cand,)):
            continue
        if chain and not _outage_ok(case, (chain[-1], cand)):
            continue
        chain.append(cand)
        if len(chain) >= n_lines:
            break
    if len(chain) < n_lines:
        raise ScenarioError(
            f"only {len(chain)} of {n_lines} removable lines found for the plan")
    plan: list[tuple[str, int]] = [("line_open", chain[0])]
    for m in range(1, n_lines):
        plan.append(("line_open", chain[m]))
        plan.append(("line_close", chain[m - 1]))
    return plan[:n_topologies - 1]


def benchmark_config(case: GridCase, variant: str = "small", seed: int = 0,
                     n_topologies: int = 13, segment: int = 50,
                     noise_sigma_rel: float = 0.01) -> ScenarioConfig:
    """The seeded regression scenario: 13 announced topologies, 10/3 split,
    unannounced trip/reclose anomaly pairs, and a load variant.

    variant "small": every load follows one shared low-amplitude smooth
    pattern (no spatial differences). variant "realistic": per-load styles,
    peaks, and amplitudes from the default population.
    """
    if variant not in ("small", "realistic"):
        raise ScenarioError(f"unknown variant {variant!r}")
    horizon = segment * n_topologies
    day = max(2, int(round(24 * 60 / 30.0)))
    n_loads = len(case.loads)
    if variant == "small":
        shared = StyleParams(style="smooth", peak_tick=day // 3, amplitude=0.05)
        styles = tuple(shared for _ in range(n_loads))
    else:
        styles = tuple(sample_population(n_loads, day, derive_seed(seed, 7)))

    plan = _toggle_plan(case, n_topologies)
    known = []
    for i, (kind, target) in enumerate(plan):
        known.append(TopologyEvent(tick=segment * (i + 1), kind=kind,
                                   target=target, label="known"))

    test_start = segment * (n_topologies - 3)
    anomaly_base_ticks = (int(segment * 4.6),
                          test_start + segment // 2 + 5,
                          test_start + segment + segment // 2 + 5,
                          test_start + 2 * segment + segment // 2)

    def announced_outages(tick: int) -> tuple[int, ...]:
        out: set[int] = set()
        for i, (kind, target) in enumerate(plan):
            if segment * (i + 1) > tick:
                break
            if kind == "line_open":
                out.add(target)
            else:
                out.discard(target)
        return tuple(sorted(out))

    toggled = {t for _, t in plan}
    sol = solve_pf(case)
    flows = branch_flows(case, sol)
    spare = [int(k) for k in np.argsort(-np.abs(flows.p_from))
             if case.branches[int(k)].id not in toggled]
    anomaly_lines = []
    for k in spare:
        cand = case.branches[k].id
        # the trip must stay solvable inside every topology it lands in
        if all(_outage_ok(case, announced_outages(t) + (cand,))
               for t in anomaly_base_ticks):
            anomaly_lines.append(cand)
        if len(anomaly_lines) >= 2:
            break
    if len(anomaly_lines) < 2:
        raise ScenarioError("could not find anomaly candidate lines")
    ax, ay = anomaly_lines
    anomalies = []
    for base_tick, line in zip(anomaly_base_ticks, (ay, ax, ay, ax)):
        anomalies.append(TopologyEvent(tick=base_tick, kind="line_open",
                                       target=line, label="anomaly"))
        anomalies.append(TopologyEvent(tick=base_tick + 3, kind="line_close",
                                       target=line, label="anomaly"))

    return ScenarioConfig(
        case=case, horizon=horizon, load_styles=styles,
        known_events=tuple(known), anomaly_events=tuple(anomalies),
        topology_count=n_topologies, noise_sigma_rel=noise_sigma_rel,
        seed=seed, train_topologies=n_topologies - 3)


# ------------------------------------------------------------ CSV export

def write_stream_csv(stream: LabeledStream, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("tick,sensor,type,value\n")
        for t, frame in enumerate(stream.frames):
            for r in frame.readings:
                fh.write(f"{t},{r.sensor},{r.type},{repr(r.value)}\n")


def write_labels_csv(stream: LabeledStream, path: str) -> None:
    rows = sorted([(t, "anomaly") for t in stream.anomaly_ticks] +
                  [(t, "known_change") for t in stream.known_change_ticks])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("tick,label\n")
        for t, label in rows:
            fh.write(f"{t},{label}\n")


def write_topology_csv(stream: LabeledStream, case: GridCase, path: str) -> None:
    """Announced topology per tick with line-status context.

    Each registry entry is rendered as the set of open branch ids relative
    to the full branch list; endpoint-level changes (bus splits) are not
    representable in this export and keep the base rendering.
    """
    all_ids = {br.id for br in case.branches}
    open_of = {}
    for topo_id, key in stream.topology_registry.items():
        closed_ids = {b for (b, _, _) in key}
        open_of[topo_id] = sorted(all_ids - closed_ids)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("tick,topology_id,open_branches\n")
        for t, topo in enumerate(stream.topology_id_per_tick):
            branches = "|".join(str(b) for b in open_of[topo])
            fh.write(f"{t},{topo},{branches}\n")
