import itertools
import math
import random

import pytest

from vrpdr.core import FleetSpec, KindMismatchError, Sortie
from vrpdr.energy import (
    ChargingEvent,
    InvalidEventError,
    apply_charging,
    charge_amount,
    drone_sortie_energy,
    new_ledger,
    robot_power,
    robot_sortie_energy,
)
from conftest import make_instance


def test_drone_energy_single_customer():
    # legs of 1 km each, parcel of 2 kg: 128 * ((18+2)*1 + 18*1) = 4864
    inst = make_instance([(0, 0), (1, 0)], weights=[2.0])
    inst = make_instance([(0, 0), (1, 0), (1, 1)], weights=[2.0, 0.5])
    s = Sortie("drone", 0, 0, 2, (1,), 0, 0)
    assert drone_sortie_energy(s, inst, inst.fleet) == pytest.approx(4864.0, abs=1e-9)


def test_drone_energy_two_customers():
    # legs 1,1,1 km; weights 2 and 3: 128 * (23 + 21 + 18) = 7936
    inst = make_instance([(0, 0), (1, 0), (2, 0), (3, 0)], weights=[2.0, 3.0, 0.5])
    s = Sortie("drone", 0, 0, 3, (1, 2), 0, 0)
    assert drone_sortie_energy(s, inst, inst.fleet) == pytest.approx(7936.0, abs=1e-9)


def test_drone_energy_zero_legs():
    inst = make_instance([(5, 5), (5, 5)], weights=[4.0])
    s = Sortie("drone", 0, 0, 0, (1,), 0, 0)
    assert drone_sortie_energy(s, inst, inst.fleet) == 0.0


def test_drone_energy_kind_mismatch():
    inst = make_instance([(0, 0), (1, 0)])
    s = Sortie("robot", 0, 0, 0, (1,), 0, 0)
    with pytest.raises(KindMismatchError):
        drone_sortie_energy(s, inst, inst.fleet)
    s = Sortie("drone", 0, 0, 0, (1,), 0, 0)
    with pytest.raises(KindMismatchError):
        robot_sortie_energy(s, inst, inst.fleet)


def _direct_drone_energy(alpha_d, w_self, weights, legs):
    """Independent evaluation over abstract legs (one more leg than weights)."""
    total = 0.0
    remaining = sum(weights)
    for q, leg in enumerate(legs):
        total += (w_self + remaining) * leg
        if q < len(weights):
            remaining -= weights[q]
    return alpha_d * total


def test_drone_energy_matches_direct_evaluation():
    rng = random.Random(7)
    fleet = FleetSpec()
    for _ in range(50):
        n = rng.randint(1, 4)
        pts = [(rng.uniform(0, 10), rng.uniform(0, 10)) for _ in range(n + 2)]
        weights = [rng.uniform(0.5, 10) for _ in range(n)] + [0.5]
        inst = make_instance([pts[0]] + pts[1:], weights=weights[: len(pts) - 1])
        seq = tuple(range(1, n + 1))
        s = Sortie("drone", 0, 0, len(pts) - 1, seq, 0, 0)
        legs = [
            math.dist(inst.node(i).point, inst.node(j).point) for i, j in s.legs()
        ]
        expected = _direct_drone_energy(
            fleet.alpha_d, fleet.W_d, [inst.node(c).weight for c in seq], legs
        )
        assert drone_sortie_energy(s, inst, fleet) == pytest.approx(expected, rel=1e-12)


def test_drone_energy_monotone_in_weight_and_distance():
    rng = random.Random(3)
    for _ in range(30):
        w = rng.uniform(0.5, 9.0)
        inst_a = make_instance([(0, 0), (1, 0), (2, 0)], weights=[w, 0.5])
        inst_b = make_instance([(0, 0), (1, 0), (2, 0)], weights=[w + 0.5, 0.5])
        s = Sortie("drone", 0, 0, 2, (1,), 0, 0)
        ea = drone_sortie_energy(s, inst_a, inst_a.fleet)
        eb = drone_sortie_energy(s, inst_b, inst_b.fleet)
        assert eb > ea
        stretch = make_instance([(0, 0), (1.5, 0), (2, 0)], weights=[w, 0.5])
        assert drone_sortie_energy(s, stretch, stretch.fleet) > ea


def test_heavier_first_never_worse_with_fixed_legs():
    """With leg lengths held fixed, serving heavier parcels first minimizes energy."""
    rng = random.Random(11)
    fleet = FleetSpec()
    for _ in range(40):
        n = rng.randint(2, 4)
        weights = [rng.uniform(0.5, 10.0) for _ in range(n)]
        legs = [rng.uniform(0.1, 5.0) for _ in range(n + 1)]
        best = _direct_drone_energy(fleet.alpha_d, fleet.W_d, sorted(weights, reverse=True), legs)
        for perm in itertools.permutations(weights):
            assert best <= _direct_drone_energy(fleet.alpha_d, fleet.W_d, list(perm), legs) + 1e-9


def test_reordering_changes_energy_on_asymmetric_geometry():
    inst = make_instance([(0, 0), (1, 0), (5, 0), (6, 0)], weights=[9.0, 1.0, 0.5])
    a = Sortie("drone", 0, 0, 3, (1, 2), 0, 0)
    b = Sortie("drone", 0, 0, 3, (2, 1), 0, 0)
    ea = drone_sortie_energy(a, inst, inst.fleet)
    eb = drone_sortie_energy(b, inst, inst.fleet)
    assert ea != pytest.approx(eb)


def test_robot_power_default_parameters():
    fleet = FleetSpec()
    # oracle recomputed here by direct formula evaluation
    v = fleet.s_r / 3.6
    gait = 1 + fleet.g / (2 * fleet.l_leg * v * v)
    expected = (1 + fleet.k2) * fleet.k1 * fleet.W_r * fleet.g * v * gait
    p = robot_power(0.0, fleet)
    assert p == pytest.approx(expected, rel=1e-12)
    assert abs(p - 147.6) <= 0.5


def test_robot_power_linearity_and_k2_scaling():
    fleet = FleetSpec()
    assert robot_power(5.0, fleet) / robot_power(0.0, fleet) == pytest.approx((15 + 5) / 15)
    doubled = FleetSpec(k2=0.4)
    assert robot_power(0.0, doubled) / robot_power(0.0, fleet) == pytest.approx(1.4 / 1.2)


def test_robot_power_zero_speed():
    fleet = FleetSpec(num_robots=0, s_r=0)
    with pytest.raises(ZeroDivisionError):
        robot_power(0.0, fleet)


def test_robot_sortie_energy_zero_legs():
    inst = make_instance([(2, 2), (2, 2)], weights=[5.0])
    s = Sortie("robot", 0, 0, 0, (1,), 0, 0)
    assert robot_sortie_energy(s, inst, inst.fleet) == 0.0


def test_robot_sortie_energy_two_term_expansion():
    # single customer, symmetric 1 km Manhattan legs
    inst = make_instance([(0, 0), (1, 0)], weights=[5.0])
    s = Sortie("robot", 0, 0, 0, (1,), 0, 0)
    fleet = inst.fleet
    t = 1.0 / fleet.s_r
    expected = (robot_power(5.0, fleet) * t + robot_power(0.0, fleet) * t) * fleet.robot_energy_scale
    assert robot_sortie_energy(s, inst, fleet) == pytest.approx(expected, rel=1e-12)


def test_robot_energy_increases_with_weight():
    rng = random.Random(5)
    for _ in range(20):
        w = rng.uniform(0.5, 15.0)
        small = make_instance([(0, 0), (2, 1), (3, 3)], weights=[w, 0.5])
        big = make_instance([(0, 0), (2, 1), (3, 3)], weights=[w + 1.0, 0.5])
        s = Sortie("robot", 0, 0, 2, (1,), 0, 0)
        assert robot_sortie_energy(s, big, big.fleet) > robot_sortie_energy(s, small, small.fleet)


def test_apply_charging_examples(fleet):
    ledger = new_ledger("drone", 0, fleet)
    ledger = ledger.consume(0.5, 11000.0)  # level 3000
    assert ledger.level == pytest.approx(3000.0)
    event = ChargingEvent("drone", 0, 0, 3, duration=1.0, amount=5000.0)
    ledger, applied = apply_charging(ledger, event, time=0.6)
    assert applied == pytest.approx(5000.0)
    assert ledger.level == pytest.approx(8000.0)

    full = new_ledger("drone", 0, fleet)
    full2, applied = apply_charging(full, event, time=0.0)
    assert applied == 0.0
    assert full2.level == pytest.approx(fleet.B_d)

    zero = ChargingEvent("drone", 0, 0, 3, duration=0.0, amount=0.0)
    _, applied = apply_charging(full, zero)
    assert applied == 0.0
    assert charge_amount(0.0, "drone", fleet) == 0.0


def test_apply_charging_errors(fleet):
    ledger = new_ledger("robot", 0, fleet)
    with pytest.raises(InvalidEventError):
        apply_charging(ledger, ChargingEvent("robot", 0, 0, 1, duration=-0.5, amount=10.0))
    with pytest.raises(InvalidEventError):
        apply_charging(ledger, ChargingEvent("robot", 0, 0, 1, duration=0.0, amount=10.0))


def test_ledger_random_schedules_stay_in_range(fleet):
    """1000 random consumption/charge interleavings keep levels in [0, capacity]."""
    rng = random.Random(42)
    for trial in range(1000):
        kind = "drone" if trial % 2 == 0 else "robot"
        ledger = new_ledger(kind, 0, fleet)
        cap = ledger.capacity
        t = 0.0
        for _ in range(rng.randint(1, 12)):
            t += rng.uniform(0.01, 0.5)
            if rng.random() < 0.5:
                draw = rng.uniform(0, ledger.level)
                ledger = ledger.consume(t, draw)
            else:
                duration = rng.uniform(0, 1.0)
                request = charge_amount(duration, kind, fleet) * rng.uniform(0, 1.2)
                request = min(request, charge_amount(duration, kind, fleet))
                event = ChargingEvent(kind, 0, 0, 1, duration=duration, amount=request)
                before = ledger.level
                ledger, applied = apply_charging(ledger, event, time=t)
                assert applied == pytest.approx(min(request, cap - before), abs=1e-9)
        for level in ledger.levels():
            assert -1e-9 <= level <= cap + 1e-9
