"""Mixed-integer model builder, LP text export and plan scoring.

The model is sortie-indexed: every candidate sortie (launch node, ordered
customer sequence, recovery node) gets one binary per vehicle and per
(launch truck, recovery truck) pair.  Drone sortie energy is a constant
coefficient; robot sortie energy keeps the big-M linearization variables so
battery constraints stay linear in the selection binaries.

Constraint group names are shared with :mod:`vrpdr.validator`, which
reports violations under the same families.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from . import energy as energy_mod
from .core import (
    DRONE,
    ROBOT,
    ConfigurationError,
    FleetSpec,
    Instance,
    ModelOptions,
    ModelSizeError,
    ObjectiveBreakdown,
    Plan,
    Sortie,
    VrpdrError,
    enumerate_sequences,
    sortie_distance,
)

BINARY = "binary"
CONTINUOUS = "continuous"

# constraint family names (the validator reports violations under these)
MAKESPAN = "makespan_bound"
VISIT_ONCE = "visit_exactly_once"
DEPOT = "depot_start_end"
FLOW = "flow_conservation"
MTZ = "mtz_subtour"
DOCKING = "docking_truck_presence"
PRECEDENCE = "sortie_precedence"
PAYLOAD = "payload_capacity"
RANGE = "sortie_range"
ROBOT_ENERGY_LIN = "robot_energy_linearization"
SORTIE_BATTERY = "sortie_energy_capacity"
UNREACHABLE = "truck_unreachable_arc"
DEPOT_BATTERY = "depot_launch_battery"
NO_DEPOT_CHARGE = "no_depot_charging"
CHARGE_PRESENCE = "charging_truck_presence"
BATTERY_BALANCE = "battery_balance"
CHARGE_TIME = "charging_time_bound"
CHARGE_RATE = "charging_rate_limit"
OVERCHARGE = "overcharge_prevention"
ARRIVAL_SEQ = "truck_arrival_sequence"
LAUNCH_SYNC = "launch_after_arrival"
RETURN_SYNC = "return_before_departure"
SINGLE_TRIP = "single_trip_cap"

CHARGING_FAMILIES = (
    DEPOT_BATTERY,
    NO_DEPOT_CHARGE,
    CHARGE_PRESENCE,
    BATTERY_BALANCE,
    CHARGE_TIME,
    CHARGE_RATE,
    OVERCHARGE,
)


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str
    lower: float = 0.0
    upper: float = float("inf")


@dataclass(frozen=True)
class Constraint:
    name: str
    family: str
    terms: Tuple[Tuple[float, str], ...]
    sense: str  # '<=', '=', '>='
    rhs: float


@dataclass
class MilpModel:
    variables: List[Variable] = field(default_factory=list)
    constraints: List[Constraint] = field(default_factory=list)
    objective_terms: List[Tuple[float, str]] = field(default_factory=list)
    objective_sense: str = "minimize"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self._by_name: Dict[str, Variable] = {}
        for v in self.variables:
            self._register(v)

    def _register(self, v: Variable) -> None:
        if v.name in self._by_name:
            raise VrpdrError(f"duplicate variable name {v.name}")
        self._by_name[v.name] = v

    def add_var(self, name: str, kind: str, lower: float = 0.0, upper: float = float("inf")) -> str:
        if kind == BINARY:
            lower, upper = 0.0, 1.0
        v = Variable(name, kind, lower, upper)
        self.variables.append(v)
        self._register(v)
        return name

    def add_constraint(self, name, family, terms, sense, rhs) -> None:
        terms = tuple((float(c), v) for c, v in terms if c != 0.0)
        for _, v in terms:
            if v not in self._by_name:
                raise VrpdrError(f"constraint {name} references undeclared variable {v}")
        self.constraints.append(Constraint(name, family, terms, sense, float(rhs)))

    def families(self) -> set:
        return {c.family for c in self.constraints}

    def group(self, family: str) -> list:
        return [c for c in self.constraints if c.family == family]

    def variable(self, name: str) -> Variable:
        return self._by_name[name]


@dataclass(frozen=True)
class SortieCandidate:
    """One (launch, sequence, recovery) template with its constants."""

    sid: int
    i: int
    sequence: tuple
    k: int
    dist_drone: float
    dist_robot: float
    payload: float
    energy_drone: float
    energy_robot: float


def _seq_tag(seq) -> str:
    return "_".join(str(c) for c in seq)


def enumerate_sortie_candidates(inst: Instance, fleet: FleetSpec, options: ModelOptions) -> list:
    """All (i, l, k) triples; launch may equal recovery only at the depot.

    A cyclic sortie at a customer node can never satisfy the precedence
    constraints, so those triples are not generated.
    """
    node_ids = [n.id for n in inst.nodes]
    customers = [n.id for n in inst.customers]
    sequences = enumerate_sequences(customers, options.effective_m(fleet))
    out = []
    sid = 0
    for seq in sequences:
        inside = set(seq)
        anchors = [v for v in node_ids if v not in inside]
        payload = sum(inst.node(c).weight for c in seq)
        for i in anchors:
            for k in anchors:
                if i == k and i != 0:
                    continue
                drone_sortie = Sortie(DRONE, 0, i, k, seq, 0, 0)
                robot_sortie = Sortie(ROBOT, 0, i, k, seq, 0, 0)
                d_d = sortie_distance(drone_sortie, inst)
                d_r = sortie_distance(robot_sortie, inst)
                out.append(
                    SortieCandidate(
                        sid=sid,
                        i=i,
                        sequence=seq,
                        k=k,
                        dist_drone=d_d,
                        dist_robot=d_r,
                        payload=payload,
                        energy_drone=energy_mod.drone_sortie_energy(drone_sortie, inst, fleet),
                        energy_robot=energy_mod.robot_sortie_energy(robot_sortie, inst, fleet),
                    )
                )
                sid += 1
    return out


def build_model(inst: Instance, fleet: FleetSpec, options: ModelOptions = ModelOptions()) -> MilpModel:
    """Assemble the full model with one named constraint group per family."""
    if inst.num_customers < 1:
        raise ConfigurationError("the model needs at least one customer")
    if fleet.num_trucks < 1:
        raise ConfigurationError("the model needs at least one truck")
    V = [n.id for n in inst.nodes]
    C = [n.id for n in inst.customers]
    nC = len(C)
    nV = len(V)
    T = list(range(fleet.num_trucks))
    drones = list(range(fleet.num_drones))
    robots = list(range(fleet.num_robots))
    M = fleet.big_M

    candidates = enumerate_sortie_candidates(inst, fleet, options)
    n_sortie_vars = len(candidates) * len(T) * len(T) * (len(drones) + len(robots))
    if n_sortie_vars > options.max_sorties:
        raise ModelSizeError(
            f"{n_sortie_vars} sortie variables exceed the budget of {options.max_sorties}; "
            "raise ModelOptions.max_sorties or shrink the instance"
        )

    model = MilpModel()
    model.info["candidates"] = candidates
    model.info["options"] = options

    # --- variables ---------------------------------------------------------
    x = {}
    for t in T:
        for i in V:
            for j in V:
                if i != j:
                    x[t, i, j] = model.add_var(f"x_t{t}_{i}_{j}", BINARY)
    u = {i: model.add_var(f"u_{i}", CONTINUOUS, 1.0, float(max(nC, 1))) for i in C}
    gamma = model.add_var("Gamma", CONTINUOUS)
    A = {(t, i): model.add_var(f"A_t{t}_{i}", CONTINUOUS) for t in T for i in V}

    # selection, launch-time and (robots) linearized-energy variables
    sel = {}     # (kind, veh, ti, tk, sid) -> var
    launch = {}  # same key -> launch-time var
    elin = {}    # robot keys -> linearization var
    fleet_kinds = [(DRONE, d) for d in drones] + [(ROBOT, r) for r in robots]
    for kind, veh in fleet_kinds:
        letter = "y" if kind == DRONE else "z"
        for ti in T:
            for tk in T:
                if not options.flexible_docking and ti != tk:
                    continue
                for cand in candidates:
                    key = (kind, veh, ti, tk, cand.sid)
                    tag = f"{letter}_{kind[0]}{veh}_t{ti}_t{tk}_s{cand.sid}"
                    sel[key] = model.add_var(tag, BINARY)
                    launch[key] = model.add_var(f"G_{tag}", CONTINUOUS)
                    if kind == ROBOT:
                        elin[key] = model.add_var(f"lin_{tag}", CONTINUOUS)
    model.info["sel"] = sel
    model.info["x"] = x
    model.info["u"] = u
    model.info["A"] = A
    model.info["gamma"] = gamma
    model.info["launch"] = launch
    model.info["elin"] = elin

    charge = {}
    ctime = {}
    if options.charging and fleet_kinds:
        for kind, veh in fleet_kinds:
            for t in T:
                for v in V:
                    charge[kind, veh, v, t] = model.add_var(
                        f"C_{kind[0]}{veh}_v{v}_t{t}", CONTINUOUS
                    )
        for t in T:
            for v in V:
                ctime[v, t] = model.add_var(f"Ct_v{v}_t{t}", CONTINUOUS)
    model.info["charge"] = charge
    model.info["ctime"] = ctime

    def cand_dist(kind, cand):
        return cand.dist_drone if kind == DRONE else cand.dist_robot

    def cand_energy(kind, cand):
        return cand.energy_drone if kind == DRONE else cand.energy_robot

    # --- makespan bounds ----------------------------------------------------
    for t in T:
        terms = [(1.0, gamma)] + [
            (-inst.truck_distance(i, j) / fleet.s_t, x[t, i, j]) for i in V for j in V if i != j
        ]
        model.add_constraint(f"{MAKESPAN}_truck{t}", MAKESPAN, terms, ">=", 0.0)
    for kind, veh in fleet_kinds:
        for ti in T:
            for tk in T:
                keyset = [
                    (kind, veh, ti, tk, c.sid) for c in candidates if (kind, veh, ti, tk, c.sid) in sel
                ]
                if not keyset:
                    continue
                terms = [(1.0, gamma)] + [
                    (-cand_dist(kind, candidates[key[4]]) / fleet.speed(kind), sel[key])
                    for key in keyset
                ]
                model.add_constraint(
                    f"{MAKESPAN}_{kind[0]}{veh}_t{ti}_t{tk}", MAKESPAN, terms, ">=", 0.0
                )

    # --- visit exactly once -------------------------------------------------
    for j in C:
        terms = [(1.0, x[t, i, j]) for t in T for i in V if i != j]
        for key, var in sel.items():
            if j in candidates[key[4]].sequence:
                terms.append((1.0, var))
        model.add_constraint(f"{VISIT_ONCE}_{j}", VISIT_ONCE, terms, "=", 1.0)

    # --- depot start / end --------------------------------------------------
    for t in T:
        model.add_constraint(
            f"{DEPOT}_out_t{t}", DEPOT, [(1.0, x[t, 0, j]) for j in C], "=", 1.0
        )
        model.add_constraint(
            f"{DEPOT}_in_t{t}", DEPOT, [(1.0, x[t, i, 0]) for i in C], "=", 1.0
        )

    # --- flow conservation ---------------------------------------------------
    for t in T:
        for j in V:
            terms = [(1.0, x[t, i, j]) for i in V if i != j]
            terms += [(-1.0, x[t, j, i]) for i in V if i != j]
            model.add_constraint(f"{FLOW}_t{t}_{j}", FLOW, terms, "=", 0.0)

    # --- MTZ subtour elimination ---------------------------------------------
    for t in T:
        for i in C:
            for j in C:
                if i != j:
                    model.add_constraint(
                        f"{MTZ}_t{t}_{i}_{j}",
                        MTZ,
                        [(1.0, u[i]), (-1.0, u[j]), (float(nC), x[t, i, j])],
                        "<=",
                        float(nC - 1),
                    )

    # --- launch / recovery truck presence (and per-node sortie cardinality) ---
    for kind_letter, kind in (("d", DRONE), ("r", ROBOT)):
        vehs = drones if kind == DRONE else robots
        if not vehs:
            continue
        for ti in T:
            for tk in T:
                if not options.flexible_docking and ti != tk:
                    continue
                for i in V:
                    terms = [
                        (1.0, sel[kind, veh, ti, tk, c.sid])
                        for veh in vehs
                        for c in candidates
                        if c.i == i
                    ]
                    if terms:
                        terms += [(-1.0, x[ti, j, i]) for j in V if j != i]
                        model.add_constraint(
                            f"{DOCKING}_launch_{kind_letter}_t{ti}_t{tk}_{i}",
                            DOCKING,
                            terms,
                            "<=",
                            0.0,
                        )
                for k in V:
                    terms = [
                        (1.0, sel[kind, veh, ti, tk, c.sid])
                        for veh in vehs
                        for c in candidates
                        if c.k == k
                    ]
                    if terms:
                        terms += [(-1.0, x[tk, k, j]) for j in V if j != k]
                        model.add_constraint(
                            f"{DOCKING}_recover_{kind_letter}_t{ti}_t{tk}_{k}",
                            DOCKING,
                            terms,
                            "<=",
                            0.0,
                        )

    # --- acyclic precedence (customer-to-customer sorties only) --------------
    for key, var in sel.items():
        cand = candidates[key[4]]
        if cand.i in u and cand.k in u:
            model.add_constraint(
                f"{PRECEDENCE}_{var}",
                PRECEDENCE,
                [(1.0, u[cand.i]), (-1.0, u[cand.k]), (float(nV), var)],
                "<=",
                float(nV - 1),
            )

    # --- payload and range caps ----------------------------------------------
    for key, var in sel.items():
        kind = key[0]
        cand = candidates[key[4]]
        model.add_constraint(
            f"{PAYLOAD}_{var}", PAYLOAD, [(cand.payload, var)], "<=", fleet.payload_cap(kind)
        )
        model.add_constraint(
            f"{RANGE}_{var}", RANGE, [(cand_dist(kind, cand), var)], "<=", fleet.range_cap(kind)
        )

    # --- robot energy linearization -------------------------------------------
    for key, var in sel.items():
        if key[0] != ROBOT:
            continue
        cand = candidates[key[4]]
        e_const = cand.energy_robot
        ev = elin[key]
        model.add_constraint(
            f"{ROBOT_ENERGY_LIN}_ub_{var}", ROBOT_ENERGY_LIN, [(1.0, ev)], "<=", e_const
        )
        model.add_constraint(
            f"{ROBOT_ENERGY_LIN}_sel_{var}", ROBOT_ENERGY_LIN, [(1.0, ev), (-M, var)], "<=", 0.0
        )
        model.add_constraint(
            f"{ROBOT_ENERGY_LIN}_lb_{var}",
            ROBOT_ENERGY_LIN,
            [(-1.0, ev), (M, var)],
            "<=",
            M - e_const,
        )

    # --- per-sortie battery cut ------------------------------------------------
    # One sortie can never draw more than a full battery: the running level
    # starts at or below capacity and charging only happens aboard a truck.
    for key, var in sel.items():
        kind = key[0]
        cand = candidates[key[4]]
        model.add_constraint(
            f"{SORTIE_BATTERY}_{var}",
            SORTIE_BATTERY,
            [(cand_energy(kind, cand), var)],
            "<=",
            fleet.battery(kind),
        )

    # --- truck-unreachable arcs fixed to zero -----------------------------------
    for t in T:
        for i in V:
            for j in V:
                if i != j and inst.truck_distance(i, j) >= M:
                    model.add_constraint(
                        f"{UNREACHABLE}_t{t}_{i}_{j}", UNREACHABLE, [(1.0, x[t, i, j])], "=", 0.0
                    )

    # --- charging block ---------------------------------------------------------
    if options.charging and fleet_kinds:
        for kind, veh in fleet_kinds:
            # depot-launched sorties must fit in the initial full battery
            terms = []
            for ti in T:
                for tk in T:
                    for cand in candidates:
                        key = (kind, veh, ti, tk, cand.sid)
                        if key not in sel or cand.i != 0:
                            continue
                        if kind == DRONE:
                            terms.append((cand.energy_drone, sel[key]))
                        else:
                            terms.append((1.0, elin[key]))
            if terms:
                model.add_constraint(
                    f"{DEPOT_BATTERY}_{kind[0]}{veh}",
                    DEPOT_BATTERY,
                    terms,
                    "<=",
                    fleet.battery(kind),
                )
            for t in T:
                model.add_constraint(
                    f"{NO_DEPOT_CHARGE}_{kind[0]}{veh}_t{t}",
                    NO_DEPOT_CHARGE,
                    [(1.0, charge[kind, veh, 0, t])],
                    "=",
                    0.0,
                )
            for t in T:
                for v in V:
                    if v == 0:
                        continue
                    terms = [(1.0, charge[kind, veh, v, t])]
                    terms += [(-fleet.charge_rate(kind), x[t, i, v]) for i in V if i != v]
                    terms += [(-fleet.charge_rate(kind), x[t, v, i]) for i in V if i != v]
                    model.add_constraint(
                        f"{CHARGE_PRESENCE}_{kind[0]}{veh}_v{v}_t{t}",
                        CHARGE_PRESENCE,
                        terms,
                        "<=",
                        0.0,
                    )
            # total consumption within battery plus charged energy
            terms = []
            for key, var in sel.items():
                if key[0] != kind or key[1] != veh:
                    continue
                if kind == DRONE:
                    terms.append((candidates[key[4]].energy_drone, var))
                else:
                    terms.append((1.0, elin[key]))
            charge_terms = [
                (-1.0, charge[kind, veh, v, t]) for t in T for v in V if v != 0
            ]
            if terms:
                model.add_constraint(
                    f"{BATTERY_BALANCE}_{kind[0]}{veh}",
                    BATTERY_BALANCE,
                    terms + charge_terms,
                    "<=",
                    fleet.battery(kind),
                )
                # charged energy can never exceed consumed energy (aggregate
                # view of the running-level cap; see module notes)
                model.add_constraint(
                    f"{OVERCHARGE}_{kind[0]}{veh}",
                    OVERCHARGE,
                    [(-c, v) for c, v in terms] + [(-c, v) for c, v in charge_terms],
                    "<=",
                    0.0,
                )
        for t in T:
            for v in V:
                terms = [(1.0, ctime[v, t])]
                terms += [
                    (-inst.truck_distance(v, i) / fleet.s_t, x[t, v, i]) for i in V if i != v
                ]
                model.add_constraint(
                    f"{CHARGE_TIME}_v{v}_t{t}", CHARGE_TIME, terms, "<=", 0.0
                )
        for kind, veh in fleet_kinds:
            for t in T:
                for v in V:
                    model.add_constraint(
                        f"{CHARGE_RATE}_{kind[0]}{veh}_v{v}_t{t}",
                        CHARGE_RATE,
                        [(1.0, charge[kind, veh, v, t]), (-fleet.charge_rate(kind), ctime[v, t])],
                        "<=",
                        0.0,
                    )

    # --- truck arrival sequencing -------------------------------------------------
    # Arcs out of the depot anchor at departure time zero; A_t0 therefore
    # reads as the return time once the closing arc propagates through.
    for t in T:
        for i in V:
            for j in V:
                if i == j:
                    continue
                travel = inst.truck_distance(i, j) / fleet.s_t
                if i == 0:
                    terms = [(-1.0, A[t, j]), (travel + M, x[t, i, j])]
                else:
                    terms = [(1.0, A[t, i]), (-1.0, A[t, j]), (travel + M, x[t, i, j])]
                model.add_constraint(
                    f"{ARRIVAL_SEQ}_t{t}_{i}_{j}", ARRIVAL_SEQ, terms, "<=", M
                )

    # --- sortie launch / return synchronization ------------------------------------
    for key, var in sel.items():
        kind, veh, ti, tk, sid = key
        cand = candidates[sid]
        gvar = launch[key]
        if cand.i != 0:
            # launch only after the carrier truck reaches the launch node
            model.add_constraint(
                f"{LAUNCH_SYNC}_{var}",
                LAUNCH_SYNC,
                [(1.0, A[ti, cand.i]), (-1.0, gvar), (M, var)],
                "<=",
                M,
            )
        travel = cand_dist(kind, cand) / fleet.speed(kind)
        model.add_constraint(
            f"{RETURN_SYNC}_{var}",
            RETURN_SYNC,
            [(1.0, gvar), (-1.0, A[tk, cand.k]), (M, var)],
            "<=",
            M - travel,
        )

    # --- optional single-trip cap ----------------------------------------------------
    if options.single_trip:
        for kind, veh in fleet_kinds:
            terms = [
                (1.0, var) for key, var in sel.items() if key[0] == kind and key[1] == veh
            ]
            if terms:
                model.add_constraint(
                    f"{SINGLE_TRIP}_{kind[0]}{veh}", SINGLE_TRIP, terms, "<=", 1.0
                )

    # --- objective --------------------------------------------------------------------
    alpha = fleet.alpha
    obj = []
    for t in T:
        for i in V:
            for j in V:
                if i != j:
                    obj.append((alpha * fleet.C_t * inst.truck_distance(i, j), x[t, i, j]))
    for key, var in sel.items():
        kind = key[0]
        cand = candidates[key[4]]
        obj.append((alpha * (fleet.unit_cost(kind) * cand_dist(kind, cand) + fleet.fixed_cost(kind)), var))
    for t in T:
        for j in C:
            obj.append((alpha * fleet.f_t, x[t, 0, j]))
    obj.append((1.0 - alpha, gamma))
    # merge duplicate variables (x_t_0j carries both travel and fixed cost)
    merged: Dict[str, float] = {}
    order: List[str] = []
    for coef, var in obj:
        if var not in merged:
            merged[var] = 0.0
            order.append(var)
        merged[var] += coef
    model.objective_terms = [(merged[v], v) for v in order if merged[v] != 0.0]
    return model


# ---------------------------------------------------------------------------
# plan scoring
# ---------------------------------------------------------------------------

def objective_value(plan: Plan, inst: Instance, fleet: FleetSpec) -> ObjectiveBreakdown:
    """Score a plan: weighted cost plus makespan, mirroring the model objective.

    The makespan is the maximum summed travel time over all vehicles; truck
    waiting is deliberately not counted here (the validator's simulated
    makespan reports it separately).
    """
    from .core import sortie_distance

    variable_cost = 0.0
    fixed_cost = 0.0
    truck_times = []
    for route in plan.truck_routes:
        dist = sum(inst.truck_distance(a, b) for a, b in zip(route[:-1], route[1:]))
        variable_cost += fleet.C_t * dist
        truck_times.append(dist / fleet.s_t)
        if len(route) > 2:
            fixed_cost += fleet.f_t
    vehicle_time: Dict[Tuple[str, int], float] = {}
    for s in plan.sorties:
        dist = sortie_distance(s, inst)
        variable_cost += fleet.unit_cost(s.vehicle_kind) * dist
        fixed_cost += fleet.fixed_cost(s.vehicle_kind)
        key = (s.vehicle_kind, s.vehicle_id)
        vehicle_time[key] = vehicle_time.get(key, 0.0) + dist / fleet.speed(s.vehicle_kind)
    makespan = max(truck_times + list(vehicle_time.values()) + [0.0])
    weighted = fleet.alpha * (variable_cost + fixed_cost) + (1.0 - fleet.alpha) * makespan
    return ObjectiveBreakdown(
        variable_cost=variable_cost,
        fixed_cost=fixed_cost,
        makespan=makespan,
        weighted_objective=weighted,
    )


# ---------------------------------------------------------------------------
# plan -> assignment substitution
# ---------------------------------------------------------------------------

def plan_assignment(model: MilpModel, plan: Plan, inst: Instance, fleet: FleetSpec) -> dict:
    """Map a plan onto the model's variables (for substitution checks)."""
    values = {v.name: 0.0 for v in model.variables}
    x = model.info["x"]
    sel = model.info["sel"]
    launch = model.info["launch"]
    elin = model.info["elin"]
    u = model.info["u"]
    A = model.info["A"]
    candidates = model.info["candidates"]
    by_struct = {}
    for key in sel:
        kind, veh, ti, tk, sid = key
        c = candidates[sid]
        by_struct[kind, veh, ti, tk, c.i, c.sequence, c.k] = key

    for t, route in enumerate(plan.truck_routes):
        for a, b in zip(route[:-1], route[1:]):
            values[x[t, a, b]] = 1.0
    # arrival times: plan values for visited nodes, zero elsewhere
    for t, arrivals in enumerate(plan.truck_arrivals):
        for node, at in arrivals.items():
            values[A[t, node]] = at
    # MTZ positions from global arrival order; customers never visited by a
    # truck sit at the lower bound, which every constraint tolerates
    for var in u.values():
        values[var] = 1.0
    events = []
    for t, arrivals in enumerate(plan.truck_arrivals):
        for node, at in arrivals.items():
            if node != 0:
                events.append((at, t, node))
    for rank, (_, _, node) in enumerate(sorted(events), start=1):
        values[u[node]] = float(rank)
    for s in plan.sorties:
        key = by_struct.get(
            (s.vehicle_kind, s.vehicle_id, s.launch_truck, s.recovery_truck,
             s.launch_node, s.sequence, s.recovery_node)
        )
        if key is None:
            raise VrpdrError(f"plan sortie {s} has no counterpart in the model")
        values[sel[key]] = 1.0
        values[launch[key]] = s.launch_time
        if s.vehicle_kind == ROBOT:
            values[elin[key]] = candidates[key[4]].energy_robot
    charge = model.info["charge"]
    ctime = model.info["ctime"]
    if charge:
        for e in plan.charging_events:
            var = charge.get((e.vehicle_kind, e.vehicle_id, e.node, e.truck_id))
            if var is None:
                raise VrpdrError(f"charging event at node {e.node} has no model variable")
            values[var] += e.amount
        for (v, t), var in ctime.items():
            route = plan.truck_routes[t] if t < len(plan.truck_routes) else ()
            for a, b in zip(route[:-1], route[1:]):
                if a == v:
                    values[var] = inst.truck_distance(a, b) / fleet.s_t
                    break
    breakdown = objective_value(plan, inst, fleet)
    values[model.info["gamma"]] = breakdown.makespan
    return values


def evaluate_objective(model: MilpModel, values: dict) -> float:
    return sum(coef * values[var] for coef, var in model.objective_terms)


def check_assignment(model: MilpModel, values: dict, tol: float = 1e-6) -> list:
    """Names of constraints the assignment violates."""
    bad = []
    for c in model.constraints:
        lhs = sum(coef * values[var] for coef, var in c.terms)
        ok = (
            lhs <= c.rhs + tol
            if c.sense == "<="
            else lhs >= c.rhs - tol
            if c.sense == ">="
            else abs(lhs - c.rhs) <= tol
        )
        if not ok:
            bad.append(c.name)
    for v in model.variables:
        val = values[v.name]
        if not (v.lower - tol <= val <= v.upper + tol):
            bad.append(f"bounds:{v.name}")
        if v.kind == BINARY and min(abs(val), abs(val - 1.0)) > tol:
            bad.append(f"integrality:{v.name}")
    return bad


# ---------------------------------------------------------------------------
# LP text export
# ---------------------------------------------------------------------------

_LP_SAFE = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_")


def _sanitize(name: str, seen: dict) -> str:
    cleaned = "".join(ch if ch in _LP_SAFE else "_" for ch in name)
    if not cleaned or cleaned[0].isdigit() or cleaned[0] in "eE._":
        cleaned = "n_" + cleaned
    if cleaned in seen and seen[cleaned] != name:
        raise VrpdrError(f"LP name collision: {name!r} and {seen[cleaned]!r} both map to {cleaned}")
    seen[cleaned] = name
    return cleaned


def _num(v: float) -> str:
    return format(v, ".17g")


def export_lp(model: MilpModel) -> str:
    """Deterministic CPLEX-LP text: objective, constraints, bounds, binaries."""
    seen: dict = {}
    names = {v.name: _sanitize(v.name, seen) for v in model.variables}
    cseen: dict = {}
    lines = ["\\ vrpdr model export", "Minimize", " obj:"]
    if not model.objective_terms:
        lines[-1] = " obj: 0"
    else:
        chunks = []
        for coef, var in model.objective_terms:
            sign = "+" if coef >= 0 else "-"
            chunks.append(f" {sign} {_num(abs(coef))} {names[var]}")
        lines[-1] = " obj:" + "".join(chunks)
    lines.append("Subject To")
    for c in model.constraints:
        cname = _sanitize(c.name, cseen)
        if not c.terms:
            raise VrpdrError(f"constraint {c.name} has no terms and cannot be exported")
        body = "".join(
            f" {'+' if coef >= 0 else '-'} {_num(abs(coef))} {names[var]}"
            for coef, var in c.terms
        )
        sense = {"<=": "<=", ">=": ">=", "=": "="}[c.sense]
        lines.append(f" {cname}:{body} {sense} {_num(c.rhs)}")
    lines.append("Bounds")
    for v in model.variables:
        if v.kind == BINARY:
            continue
        lo = _num(v.lower)
        hi = "+inf" if v.upper == float("inf") else _num(v.upper)
        lines.append(f" {lo} <= {names[v.name]} <= {hi}")
    binaries = [names[v.name] for v in model.variables if v.kind == BINARY]
    lines.append("Binaries")
    for group_start in range(0, len(binaries), 8):
        lines.append(" " + " ".join(binaries[group_start : group_start + 8]))
    lines.append("End")
    return "\n".join(lines) + "\n"
