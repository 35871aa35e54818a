"""Exhaustive reference optimum for tiny instances.

Enumerates truck tours over customer subsets, then all ways to cover the
remaining customers with non-overlapping drone/robot sortie chains anchored
on the tour.  Timing never prunes a candidate because trucks may wait at
recovery nodes for free (the makespan counts travel only); battery
chronology with en-route charging, payload, range and per-node docking
rules do.  Every improving candidate is confirmed by the validator before
it becomes the incumbent.

Scope: one truck, at most one drone and one robot; larger fleets belong to
the LP-export path.
"""

from __future__ import annotations

import itertools
import time as time_mod
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from . import energy as energy_mod
from . import validator as validator_mod
from .core import (
    DRONE,
    ROBOT,
    BudgetExceededError,
    ConfigurationError,
    FleetSpec,
    InfeasibleError,
    Instance,
    ModelOptions,
    Plan,
    Sortie,
    enumerate_sequences,
)
from .milp import objective_value

_EPS = 1e-12


@dataclass(frozen=True)
class SearchBudget:
    max_customers: int = 8
    max_candidates: int = 5_000_000
    time_limit: float = 600.0

    def __post_init__(self):
        if self.max_customers <= 0 or self.max_candidates <= 0 or self.time_limit <= 0:
            raise ConfigurationError("search budget fields must be positive")


@dataclass(frozen=True)
class _ChainSortie:
    launch_pos: int
    recovery_pos: int
    sequence: tuple
    distance: float
    energy: float
    charge_legs: tuple  # (leg_start_pos, amount) pairs absorbed before launch


class _Search:
    def __init__(self, inst, fleet, options, budget):
        self.inst = inst
        self.fleet = fleet
        self.options = options
        self.budget = budget
        self.t0 = time_mod.monotonic()
        self.candidates_seen = 0
        self.best_obj: Optional[float] = None
        self.best_key = None
        self.best_plan: Optional[Plan] = None

    def tick(self, amount: int = 1) -> None:
        self.candidates_seen += amount
        if self.candidates_seen > self.budget.max_candidates:
            raise BudgetExceededError(
                f"candidate budget of {self.budget.max_candidates} exhausted"
            )
        if self.candidates_seen % 4096 == 0:
            if time_mod.monotonic() - self.t0 > self.budget.time_limit:
                raise BudgetExceededError(
                    f"time limit of {self.budget.time_limit}s exhausted"
                )


def _vehicle_chains(search: _Search, kind: str, route, leg_times, remaining):
    """All sortie chains for one vehicle, left to right along the route.

    Yields (chain, served) pairs; a chain is a tuple of _ChainSortie.  The
    battery starts full, drains by sortie energy at each launch, and
    recharges (clamped) on carried legs between recovery and next launch.
    Charging on the leg out of the depot is not allowed.
    """
    inst, fleet, options = search.inst, search.fleet, search.options
    m_eff = options.effective_m(fleet)
    cap = fleet.battery(kind)
    rate = fleet.charge_rate(kind) if options.charging else 0.0
    payload_cap = fleet.payload_cap(kind)
    range_cap = fleet.range_cap(kind)
    speed = fleet.speed(kind)
    metric_kind = kind
    last_pos = len(route) - 1

    def charge_between(start_pos, launch_pos, level):
        """Per-leg clamped charge amounts for legs [start_pos, launch_pos)."""
        legs = []
        for p in range(start_pos, launch_pos):
            if route[p] == 0 and p == 0:
                continue  # no charging on the depot departure leg
            amt = min(rate * leg_times[p], cap - level)
            if amt > 1e-12:
                legs.append((p, amt))
                level += amt
        return tuple(legs), level

    def rec(start_pos, level, remaining, acc):
        yield tuple(acc), frozenset(set(remaining_all) - set(remaining))
        if not remaining or start_pos > last_pos:
            return
        for seq in enumerate_sequences(remaining, m_eff):
            payload = sum(inst.node(c).weight for c in seq)
            if payload > payload_cap + 1e-9:
                continue
            for launch_pos in range(start_pos, last_pos):
                charge_legs, level_at_launch = charge_between(start_pos, launch_pos, level)
                launch_node = route[launch_pos]
                if launch_pos != 0 and launch_node == 0:
                    continue
                for recovery_pos in range(launch_pos + 1, last_pos + 1):
                    recovery_node = route[recovery_pos]
                    s = Sortie(kind, 0, launch_node, recovery_node, seq, 0, 0)
                    dist = 0.0
                    for a, b in s.legs():
                        dist += inst.distance(metric_kind, a, b)
                    if dist > range_cap + 1e-9:
                        continue
                    e = energy_mod.sortie_energy(s, inst, fleet)
                    if e > level_at_launch + 1e-9:
                        continue
                    search.tick()
                    entry = _ChainSortie(
                        launch_pos, recovery_pos, seq, dist, e, charge_legs
                    )
                    rest = tuple(c for c in remaining if c not in seq)
                    if recovery_pos == last_pos:
                        # recovered at the depot: the vehicle is retired
                        yield tuple(acc) + (entry,), frozenset(
                            set(remaining_all) - set(rest)
                        )
                    else:
                        yield from rec(
                            recovery_pos,
                            level_at_launch - e,
                            rest,
                            acc + [entry],
                        )

    remaining_all = tuple(remaining)
    yield from rec(0, cap, tuple(remaining), [])


def _assemble_plan(search: _Search, route, leg_times, assignment) -> Plan:
    """Replay with waiting and build a full plan from vehicle chains."""
    inst, fleet = search.inst, search.fleet
    arrivals = [0.0] * len(route)
    sortie_rows: List[Tuple[int, str, int, _ChainSortie]] = []
    for (kind, vid), chain in assignment.items():
        for cs in chain:
            sortie_rows.append((cs.recovery_pos, kind, vid, cs))
    clock = 0.0
    for pos in range(1, len(route)):
        clock += leg_times[pos - 1]
        if pos != len(route) - 1:
            for rpos, kind, vid, cs in sortie_rows:
                if rpos == pos:
                    launch_at = arrivals[cs.launch_pos] if cs.launch_pos != 0 else 0.0
                    clock = max(clock, launch_at + cs.distance / fleet.speed(kind))
        arrivals[pos] = clock
    # the declared depot return also covers sorties flying home on their own
    for rpos, kind, vid, cs in sortie_rows:
        if rpos == len(route) - 1:
            launch_at = arrivals[cs.launch_pos] if cs.launch_pos != 0 else 0.0
            arrivals[-1] = max(arrivals[-1], launch_at + cs.distance / fleet.speed(kind))

    sorties = []
    events = []
    for (kind, vid), chain in sorted(assignment.items()):
        for cs in chain:
            launch_time = arrivals[cs.launch_pos] if cs.launch_pos != 0 else 0.0
            sorties.append(
                Sortie(
                    vehicle_kind=kind,
                    vehicle_id=vid,
                    launch_node=route[cs.launch_pos],
                    recovery_node=route[cs.recovery_pos],
                    sequence=cs.sequence,
                    launch_truck=0,
                    recovery_truck=0,
                    launch_time=launch_time,
                )
            )
            for leg_pos, amount in cs.charge_legs:
                events.append(
                    energy_mod.ChargingEvent(
                        vehicle_kind=kind,
                        vehicle_id=vid,
                        truck_id=0,
                        node=route[leg_pos],
                        duration=leg_times[leg_pos],
                        amount=amount,
                    )
                )
    arrivals_map = {route[pos]: arrivals[pos] for pos in range(1, len(route))}
    plan = Plan(
        truck_routes=(route,),
        sorties=tuple(sorties),
        truck_arrivals=(arrivals_map,),
        charging_events=tuple(events),
    )
    ledgers = validator_mod.build_ledgers(plan, inst, fleet)
    breakdown = objective_value(plan, inst, fleet)
    return Plan(
        truck_routes=plan.truck_routes,
        sorties=plan.sorties,
        truck_arrivals=plan.truck_arrivals,
        charging_events=plan.charging_events,
        ledgers=ledgers,
        objective_breakdown=breakdown,
    )


def _plan_key(route, assignment) -> tuple:
    rows = []
    for (kind, vid), chain in sorted(assignment.items()):
        for cs in chain:
            rows.append((kind, vid, cs.launch_pos, cs.recovery_pos, cs.sequence))
    return (route, tuple(rows))


def solve_exact(
    inst: Instance,
    fleet: FleetSpec,
    options: ModelOptions = ModelOptions(),
    budget: SearchBudget = SearchBudget(),
) -> Plan:
    """Minimum weighted-objective plan by exhaustive enumeration."""
    if fleet.num_trucks != 1:
        raise ConfigurationError("exact search supports exactly one truck")
    if fleet.num_drones > 1 or fleet.num_robots > 1:
        raise ConfigurationError("exact search supports at most one drone and one robot")
    customers = [c.id for c in inst.customers]
    if len(customers) > budget.max_customers:
        raise BudgetExceededError(
            f"{len(customers)} customers exceed the budget cap of {budget.max_customers}"
        )
    if not customers:
        raise InfeasibleError("no customers: a truck cannot make its mandatory tour")
    reachable = [c for c in customers if inst.node(c).truck_reachable]
    unreachable = [c for c in customers if not inst.node(c).truck_reachable]
    vehicles = [(DRONE, d) for d in range(fleet.num_drones)]
    vehicles += [(ROBOT, r) for r in range(fleet.num_robots)]
    if unreachable and not vehicles:
        raise InfeasibleError(
            "truck-unreachable customers with no drone or robot in the fleet",
            offending_ids=unreachable,
        )
    if not reachable:
        raise InfeasibleError(
            "the truck must visit at least one customer but none are reachable",
            offending_ids=unreachable,
        )

    search = _Search(inst, fleet, options, budget)
    alpha = fleet.alpha

    max_trips = 1 if options.single_trip else None

    def chains_for(kind, route, leg_times, remaining):
        for chain, served in _vehicle_chains(search, kind, route, leg_times, remaining):
            if max_trips is not None and len(chain) > max_trips:
                continue
            yield chain, served

    for size in range(1, len(reachable) + 1):
        for subset in itertools.combinations(sorted(reachable), size):
            rest = [c for c in customers if c not in subset]
            if rest and not vehicles:
                continue
            for perm in itertools.permutations(subset):
                route = (0,) + perm + (0,)
                leg_times = [
                    inst.truck_distance(a, b) / fleet.s_t
                    for a, b in zip(route[:-1], route[1:])
                ]
                route_dist = sum(
                    inst.truck_distance(a, b) for a, b in zip(route[:-1], route[1:])
                )
                route_time = route_dist / fleet.s_t
                base_cost = fleet.C_t * route_dist + fleet.f_t
                bound = alpha * base_cost + (1.0 - alpha) * route_time
                if search.best_obj is not None and bound >= search.best_obj - _EPS:
                    search.tick()
                    continue

                def assign(vidx, remaining, acc):
                    if not remaining and vidx == len(vehicles):
                        _consider(route, leg_times, dict(acc))
                        return
                    if vidx == len(vehicles):
                        return
                    kind, vid = vehicles[vidx]
                    for chain, served in chains_for(kind, route, leg_times, remaining):
                        acc[(kind, vid)] = chain
                        assign(vidx + 1, tuple(c for c in remaining if c not in served), acc)
                        del acc[(kind, vid)]

                def _consider(route, leg_times, assignment):
                    search.tick()
                    cost = base_cost
                    flight: Dict[tuple, float] = {}
                    for (kind, vid), chain in assignment.items():
                        for cs in chain:
                            cost += fleet.unit_cost(kind) * cs.distance + fleet.fixed_cost(kind)
                            key = (kind, vid)
                            flight[key] = flight.get(key, 0.0) + cs.distance / fleet.speed(kind)
                    gamma = max([route_time] + list(flight.values()))
                    obj = alpha * cost + (1.0 - alpha) * gamma
                    if search.best_obj is not None and obj >= search.best_obj - _EPS:
                        if (
                            abs(obj - (search.best_obj or 0.0)) > _EPS
                            or _plan_key(route, assignment) >= search.best_key
                        ):
                            return
                    plan = _assemble_plan(search, route, leg_times, assignment)
                    report = validator_mod.validate(plan, inst, fleet, options)
                    if not report.feasible:
                        raise VrpdrInternalError(plan, report)
                    search.best_obj = plan.objective_breakdown.weighted_objective
                    search.best_key = _plan_key(route, assignment)
                    search.best_plan = plan

                assign(0, tuple(rest), {})

    if search.best_plan is None:
        raise InfeasibleError(
            "no feasible plan: leftover customers cannot be covered by any sortie",
            offending_ids=unreachable or customers,
        )
    return search.best_plan


class VrpdrInternalError(AssertionError):
    """An exact candidate passed static screening but failed validation."""

    def __init__(self, plan, report):
        details = "; ".join(v.detail for v in report.violations[:5])
        super().__init__(f"exact candidate failed validation: {details}")
        self.plan = plan
        self.report = report
