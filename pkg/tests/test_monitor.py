"""Monitor construction, fault models, and tracking semantics."""

import itertools
import random
from fractions import Fraction

import pytest

from tshield import models, monitor as M, tioa as T, zones as zn
from tshield.errors import EmptyResult, FaultCapExceeded, NondeterministicSpec
from tshield.zones import Constraint


@pytest.fixture(scope="module")
def mspec():
    return M.build_monitor(models.lightswitch(), name="mSpec", error_var="error")


def tracker_after(monitor, steps):
    t = M.MonitorTracker(monitor)
    for d, label in steps:
        t.advance(Fraction(d))
        if label:
            t.observe(label)
    return t


def test_monitor_shape(mspec):
    base = mspec.base
    assert base.outputs == ()
    assert set(base.inputs) == {"on", "off", "blink"}
    assert "ERR" in base.locations
    assert mspec.deadlines["OFF"] == (Constraint(1, "<=", 3),)
    assert mspec.deadlines["ON"] == (Constraint(1, "<=", 5),)
    assert not base.invariants


def test_monitor_flags_off_in_off(mspec):
    # off is never allowed while OFF, at any clock value
    t = tracker_after(mspec, [(2, "off")])
    assert t.in_err and t.ints["error"] == 1


def test_monitor_flags_late_blink(mspec):
    # state (OFF, x=4) is already past the deadline: ERR hit at the boundary
    t = tracker_after(mspec, [(4, "blink")])
    assert t.in_err


def test_monitor_accepts_correct_trace(mspec):
    t = tracker_after(mspec, [(2, "on"), (3, "off"), (1, "blink"), (2, "blink")])
    assert not t.in_err and t.ints["error"] == 0


def test_monitor_ignores_unexpected_input(mspec):
    # on while ON is ignored per the input-enabledness convention
    t = tracker_after(mspec, [(0, "on"), (1, "on"), (2, "off")])
    assert not t.in_err


def test_err_absorbing(mspec):
    t = tracker_after(mspec, [(0, "off"), (1, "blink"), (1, "on")])
    assert t.in_err


def test_monitor_agrees_with_spec_replay(mspec):
    """ERR iff the discretised trace is not a trace of the spec (horizon 10,
    granularity 1/2), checked against direct TLTS simulation."""
    ls = models.lightswitch()
    net = T.Network((T.complete_inputs(ls),))
    rng = random.Random(2024)
    labels = ["blink", "off", "on"]
    agree = 0
    for _ in range(400):
        steps = []
        for _k in range(rng.randint(1, 10)):
            steps.append((Fraction(rng.randint(0, 8), 2), rng.choice(labels)))
        # spec-side replay: accepted iff every delay and action is possible
        ok = True
        s = net.initial_state()
        for d, label in steps:
            try:
                s = T.delay(net, s, d)
                kind = ls.action_kind(label)
                if kind == "output":
                    s = T.fire(net, s, label)
                else:
                    if T._enabled_edge(net, s, 0, label) is not None:
                        s = T.fire(net, s, label)
            except Exception:
                ok = False
                break
        t = tracker_after(mspec, steps)
        assert (not t.in_err) == ok
        agree += 1
    assert agree == 400


def test_prime_renames_outputs():
    ls = models.lightswitch()
    p = M.prime(ls)
    assert set(p.outputs) == {"blink'", "off'"}
    assert p.inputs == ("on",)
    assert {e.action for e in p.edges} == {"blink'", "off'", "on"}
    with pytest.raises(Exception):
        M.prime(p)  # double priming is rejected


def test_prime_structure_isomorphic():
    ls = models.lightswitch()
    p = M.prime(ls)
    rename = {o: o + "'" for o in ls.outputs}
    for e, pe in zip(ls.edges, p.edges):
        assert pe.src == e.src and pe.dst == e.dst and pe.resets == e.resets
        assert pe.action == rename.get(e.action, e.action)


def test_wrong_reset_fault_model_matches_figure():
    """off emitted while OFF additionally resets the fault copy's clock and
    stays in OFF: the canonical clock-fault example."""
    ls = models.lightswitch()
    fms = M.gen_fault_models(ls, [M.FaultKind("wrong_reset", clocks=(1,))])
    labels = [fm.label for fm in fms]
    assert "wrong_reset[OFF,off,x]" in labels
    fig = next(fm for fm in fms if fm.label == "wrong_reset[OFF,off,x]")
    faults = [e for e in fig.tioa.edges if e.tag == "fault"]
    assert faults and all(e.src == "OFF@pre" and e.dst == "OFF@post" for e in faults)
    assert all(e.resets == (1,) for e in faults)
    # off is wrong everywhere in OFF, so the fault edges cover all valuations
    cover = zn.fed_reduce([fig.tioa.guard_zone(e.guard) for e in faults])
    assert zn.fed_equal(cover, [zn.zone_universe(1)])


def test_any_location_count_bound():
    ls = models.lightswitch()
    fms = M.gen_fault_models(ls, [M.FaultKind("any_location")])
    # wrong outputs: off in OFF, blink in ON, off outside [1,5] in ON,
    # blink past 3 in OFF; every (loc,o) pair has a wrong region here
    wrong_pairs = 4
    assert len(fms) <= 2 * wrong_pairs
    for fm in fms:
        fm.tioa.check_deterministic()


def test_fault_models_pre_copy_refines_spec():
    ls = models.lightswitch()
    kinds = [
        M.FaultKind("wrong_reset"),
        M.FaultKind("next_location"),
        M.FaultKind("missing_reset"),
    ]
    for fm in M.gen_fault_models(ls, kinds):
        ok, witness = T.check_refinement(fm.pre_copy(), ls)
        assert ok, f"{fm.label} pre copy must refine the spec ({witness})"


def test_fault_cap_is_error():
    ls = models.lightswitch()
    with pytest.raises(FaultCapExceeded):
        M.gen_fault_models(ls, [M.FaultKind("any_location")], cap=2)


def test_no_outputs_is_empty_result():
    silent = T.Tioa("silent", (), ("L",), {}, "L", ("i",), (), ())
    with pytest.raises(EmptyResult):
        M.gen_fault_models(silent, [M.FaultKind("any_location")])


def test_fault_monitor_lockstep_before_fault(mspec):
    """On fault-free prefixes every fault monitor tracks the plain monitor's
    location and clock values (in its pre copy)."""
    ls = models.lightswitch()
    fms = M.gen_fault_models(ls, [M.FaultKind("wrong_reset")])
    fmons = M.build_fault_monitors(fms)
    rng = random.Random(7)
    for _ in range(100):
        # generate a fault-free trace from the strict implementation
        net = T.Network((models.lightswitch_strict(),))
        steps = []
        s = net.initial_state()
        for _k in range(6):
            sup, _ = T._max_admissible_delay(net, s)
            d = Fraction(rng.randint(0, int(sup * 2)), 2)
            s = T.delay(net, s, d)
            choices = [a for a in ("blink", "on", "off")
                       if T._enabled_edge(net, s, 0, a) is not None]
            if not choices:
                break
            a = rng.choice(choices)
            s = T.fire(net, s, a)
            steps.append((d, a))
        t_spec = tracker_after(mspec, steps)
        assert not t_spec.in_err
        for fmon in fmons:
            t = tracker_after(fmon, steps)
            assert not t.in_err
            assert M.spec_location(t.loc) == t_spec.loc
            assert t.loc.endswith(M.PRE)
            assert tuple(t.vals) == tuple(t_spec.vals)


def test_fault_monitor_discard_matches_small_oracle():
    """A fault monitor sits in ERR exactly when the observed suffix fits no
    run of the fault model (brute-force replay over the model's TLTS)."""
    ls = models.lightswitch()
    fms = M.gen_fault_models(ls, [M.FaultKind("wrong_reset", clocks=(1,))])
    fig = next(fm for fm in fms if fm.label == "wrong_reset[OFF,off,x]")
    fmon = M.build_fault_monitors([fig])[0]
    net = T.Network((T.complete_inputs(fig.tioa),))
    rng = random.Random(41)
    labels = ["blink", "off", "on"]
    for _ in range(300):
        steps = [(Fraction(rng.randint(0, 6), 2), rng.choice(labels))
                 for _k in range(rng.randint(1, 6))]
        ok = True
        s = net.initial_state()
        for d, label in steps:
            try:
                s = T.delay(net, s, d)
                if label in fig.tioa.outputs:
                    s = T.fire(net, s, label)
                elif T._enabled_edge(net, s, 0, label) is not None:
                    s = T.fire(net, s, label)
            except Exception:
                ok = False
                break
        t = tracker_after(fmon, steps)
        assert (not t.in_err) == ok


def test_missing_reset_redirects_first_firing():
    ls = models.lightswitch()
    fms = M.gen_fault_models(ls, [M.FaultKind("missing_reset")])
    # light switch edges with resets and output labels: blink@OFF, off@ON
    labels = sorted(fm.label for fm in fms)
    assert labels == ["missing_reset[OFF,blink,0]", "missing_reset[ON,off,2]"]
    blink_fm = fms[0].tioa
    # pre copy no longer keeps the planned blink loop; the fault edge replaces it
    pre_blinks = blink_fm.edges_from("OFF@pre", "blink")
    assert all(e.dst == "OFF@post" and e.resets == () for e in pre_blinks)
