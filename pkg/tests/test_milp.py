import math
import os

import pytest

from vrpdr import bench, exact, lp_io, milp
from vrpdr.core import FleetSpec, Instance, ModelOptions, ModelSizeError, Node, Plan
from conftest import make_instance

DATA = os.path.join(os.path.dirname(__file__), "data")


def one_customer_instance():
    fleet = FleetSpec(num_drones=0, num_robots=0)
    return Instance([Node(0, 0.0, 0.0), Node(1, 3.0, 0.0, 2.0)], fleet)


def test_one_customer_model_has_two_forced_arcs():
    inst = one_customer_instance()
    model = milp.build_model(inst, inst.fleet)
    binaries = [v.name for v in model.variables if v.kind == milp.BINARY]
    assert binaries == ["x_t0_0_1", "x_t0_1_0"]
    # substituting the only tour satisfies the whole model
    plan = Plan(
        truck_routes=((0, 1, 0),),
        truck_arrivals=({1: 3 / 45, 0: 6 / 45},),
    )
    values = milp.plan_assignment(model, plan, inst, inst.fleet)
    assert values["x_t0_0_1"] == 1.0 and values["x_t0_1_0"] == 1.0
    assert milp.check_assignment(model, values) == []


def test_sortie_variable_count_matches_enumeration_oracle():
    # 2 customers, m=1, 1 drone, no robot
    fleet = FleetSpec(num_robots=0, m=1)
    inst = make_instance([(0, 0), (1, 0), (0, 1)], fleet=fleet)
    model = milp.build_model(inst, fleet)
    y_vars = [v for v in model.variables if v.name.startswith("y_")]
    # oracle: sequences of length 1 over {1, 2}; anchors are the other two
    # nodes; launch == recovery only at the depot
    from vrpdr.core import enumerate_sequences

    count = 0
    for seq in enumerate_sequences({1, 2}, 1):
        anchors = [v for v in (0, 1, 2) if v not in seq]
        count += sum(1 for i in anchors for k in anchors if i != k or i == 0)
    assert count == 6
    assert len(y_vars) == count * fleet.num_trucks**2


def test_golden_lp_export():
    inst = one_customer_instance()
    text = milp.export_lp(milp.build_model(inst, inst.fleet))
    with open(os.path.join(DATA, "one_customer_truck_only.lp")) as fh:
        assert text == fh.read()


def test_export_deterministic(fleet):
    inst = bench.generate_instance(4, seed=3, fleet=fleet)
    a = milp.export_lp(milp.build_model(inst, fleet))
    b = milp.export_lp(milp.build_model(inst, fleet))
    assert a == b


def test_lp_round_trip_term_counts(fleet):
    inst = bench.generate_instance(3, seed=5, fleet=fleet)
    model = milp.build_model(inst, fleet)
    text = milp.export_lp(model)
    parsed = lp_io.parse_lp(text)
    assert len(parsed.constraints) == len(model.constraints)
    assert len(parsed.objective) == len(model.objective_terms)
    for (name, terms, sense, rhs), c in zip(parsed.constraints, model.constraints):
        assert len(terms) == len(c.terms)
        assert sense == c.sense
        assert rhs == pytest.approx(c.rhs)
    assert len(parsed.binaries) == sum(1 for v in model.variables if v.kind == milp.BINARY)
    names = set(parsed.variable_names())
    assert names == {v.name for v in model.variables}


def test_charging_toggle_removes_exactly_the_charging_block(fleet):
    inst = bench.generate_instance(3, seed=1, fleet=fleet)
    with_charging = milp.build_model(inst, fleet, ModelOptions(charging=True))
    without = milp.build_model(inst, fleet, ModelOptions(charging=False))
    assert set(milp.CHARGING_FAMILIES) <= with_charging.families()
    assert without.families() == with_charging.families() - set(milp.CHARGING_FAMILIES)
    gone = {v.name for v in with_charging.variables} - {v.name for v in without.variables}
    assert gone and all(n.startswith(("C_", "Ct_")) for n in gone)
    kept_constraints = {c.name for c in without.constraints}
    full_constraints = {c.name for c in with_charging.constraints}
    removed = full_constraints - kept_constraints
    removed_families = {c.family for c in with_charging.constraints if c.name in removed}
    assert removed_families == set(milp.CHARGING_FAMILIES)


def _perm(n, k):
    return math.factorial(n) // math.factorial(n - k)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_constraint_counts_match_closed_forms(n, fleet):
    inst = bench.generate_instance(n, seed=n, fleet=fleet)
    model = milp.build_model(inst, fleet)
    V = n + 1
    m = fleet.m
    # candidate sorties: ordered sequences times anchor pairs
    S = sum(_perm(n, L) * ((V - L) ** 2 - (V - L) + 1) for L in range(1, min(m, n) + 1))
    S0 = sum(_perm(n, L) * (V - L) for L in range(1, min(m, n) + 1))
    Scc = sum(_perm(n, L) * (V - 1 - L) * max(0, V - 2 - L) for L in range(1, min(m, n) + 1))
    kinds = 2  # one drone and one robot
    counts = {c.family: 0 for c in model.constraints}
    for c in model.constraints:
        counts[c.family] += 1
    assert counts[milp.MAKESPAN] == 1 + kinds
    assert counts[milp.VISIT_ONCE] == n
    assert counts[milp.DEPOT] == 2
    assert counts[milp.FLOW] == V
    assert counts.get(milp.MTZ, 0) == n * (n - 1)
    assert counts[milp.PAYLOAD] == S * kinds
    assert counts[milp.RANGE] == S * kinds
    assert counts.get(milp.PRECEDENCE, 0) == Scc * kinds
    assert counts[milp.ROBOT_ENERGY_LIN] == 3 * S
    assert counts[milp.SORTIE_BATTERY] == S * kinds
    assert counts[milp.DEPOT_BATTERY] == kinds
    assert counts[milp.NO_DEPOT_CHARGE] == kinds
    assert counts[milp.CHARGE_PRESENCE] == kinds * n
    assert counts[milp.BATTERY_BALANCE] == kinds
    assert counts[milp.OVERCHARGE] == kinds
    assert counts[milp.CHARGE_TIME] == V
    assert counts[milp.CHARGE_RATE] == kinds * V
    assert counts[milp.ARRIVAL_SEQ] == V * (V - 1)
    assert counts.get(milp.LAUNCH_SYNC, 0) == (S - S0) * kinds
    assert counts[milp.RETURN_SYNC] == S * kinds
    # docking: one launch and one recovery row per kind per anchor node
    anchor_launch = len({c.i for c in model.info["candidates"]})
    anchor_recover = len({c.k for c in model.info["candidates"]})
    assert counts[milp.DOCKING] == kinds * (anchor_launch + anchor_recover)


def test_feasible_plans_substitute_into_the_model(fleet):
    for seed in (0, 4, 9):
        inst = bench.generate_instance(4, seed=seed, fleet=fleet)
        model = milp.build_model(inst, fleet)
        plan = exact.solve_exact(inst, fleet)
        values = milp.plan_assignment(model, plan, inst, fleet)
        assert milp.check_assignment(model, values) == []
        assert milp.evaluate_objective(model, values) == pytest.approx(
            plan.objective_breakdown.weighted_objective, abs=1e-9
        )


def test_two_truck_lp_lower_bounds_finder():
    """HiGHS on the 2-truck model never scores above the heuristic plan."""
    from vrpdr import finder, lp_io

    fleet = FleetSpec(num_trucks=2, num_drones=2)
    options = ModelOptions(single_visit=True)
    inst = bench.generate_instance(6, seed=4, fleet=fleet)
    plan = finder.solve_finder(inst, fleet, options)
    model = milp.build_model(inst, fleet, options)
    obj_lp, _ = lp_io.solve_lp_text(milp.export_lp(model), time_limit=300)
    assert obj_lp <= plan.objective_breakdown.weighted_objective + 1e-6


def test_objective_value_examples(fleet):
    # 10 km Manhattan tour, no sorties: 0.5*(2.9*10+30) + 0.5*(10/45)
    inst = make_instance([(0, 0), (2.5, 2.5)], weights=[1.0], fleet=fleet)
    plan = Plan(truck_routes=((0, 1, 0),), truck_arrivals=({1: 5 / 45, 0: 10 / 45},))
    b = milp.objective_value(plan, inst, fleet)
    assert b.variable_cost == pytest.approx(29.0)
    assert b.fixed_cost == pytest.approx(30.0)
    assert b.makespan == pytest.approx(10 / 45)
    assert b.weighted_objective == pytest.approx(0.5 * (2.9 * 10 + 30) + 0.5 * (10 / 45))
    assert b.weighted_objective == pytest.approx(29.6111, abs=1e-3)

    pure_cost = milp.objective_value(plan, inst, FleetSpec(alpha=1.0))
    assert pure_cost.weighted_objective == pytest.approx(59.0)
    pure_time = milp.objective_value(plan, inst, FleetSpec(alpha=0.0))
    assert pure_time.weighted_objective == pytest.approx(10 / 45)


def test_model_size_budget(fleet):
    inst = bench.generate_instance(6, seed=0, fleet=fleet)
    with pytest.raises(ModelSizeError):
        milp.build_model(inst, fleet, ModelOptions(max_sorties=10))


def test_exported_lp_optimum_matches_exact(fleet):
    from vrpdr import lp_io

    inst = bench.generate_instance(5, seed=1, fleet=fleet)
    obj_lp, _ = lp_io.solve_lp_text(milp.export_lp(milp.build_model(inst, fleet)), time_limit=120)
    plan = exact.solve_exact(inst, fleet)
    assert obj_lp == pytest.approx(plan.objective_breakdown.weighted_objective, abs=1e-6)


@pytest.mark.parametrize(
    "options",
    [
        ModelOptions(single_visit=True),
        ModelOptions(single_trip=True),
        ModelOptions(flexible_docking=False),
    ],
    ids=["single_visit", "single_trip", "fixed_docking"],
)
def test_lp_matches_exact_under_option_variants(options, fleet):
    from vrpdr import lp_io

    for size, seed in ((4, 102), (5, 104)):
        inst = bench.generate_instance(size, seed=seed, fleet=fleet)
        text = milp.export_lp(milp.build_model(inst, fleet, options))
        obj_lp, _ = lp_io.solve_lp_text(text, time_limit=120)
        plan = exact.solve_exact(inst, fleet, options)
        assert obj_lp == pytest.approx(
            plan.objective_breakdown.weighted_objective, abs=1e-6
        ), (size, seed)


def test_two_truck_finder_plan_substitutes():
    """Truck-pair indexed families accept a real cross-docking plan."""
    from vrpdr import finder

    fleet = FleetSpec(num_trucks=2, num_drones=2)
    options = ModelOptions(single_visit=True)  # keeps the sortie space small
    inst = bench.generate_instance(10, seed=4, fleet=fleet)
    plan = finder.solve_finder(inst, fleet, options)
    assert any(s.launch_truck != s.recovery_truck for s in plan.sorties)
    model = milp.build_model(inst, fleet, options)
    values = milp.plan_assignment(model, plan, inst, fleet)
    assert milp.check_assignment(model, values) == []
    assert milp.evaluate_objective(model, values) == pytest.approx(
        plan.objective_breakdown.weighted_objective, abs=1e-9
    )
