"""Concrete and symbolic automaton semantics."""

import random
from fractions import Fraction

import pytest

from tshield import models, tioa as T, zones as zn
from tshield.errors import (
    InvariantViolation,
    NondeterministicSpec,
    NotEnabled,
    EmptyResult,
)
from tshield.zones import Constraint


def single(a):
    return T.Network((a,))


def test_lightswitch_delay_and_fire():
    ls = models.lightswitch()
    net = single(ls)
    s = net.initial_state()
    s = T.delay(net, s, Fraction(1))
    assert s.vals == (Fraction(1),)
    s = T.delay(net, s, Fraction(1))
    s = T.fire(net, s, "on")
    assert s.locs == ("ON",) and s.vals == (Fraction(0),)
    s = T.delay(net, s, Fraction(4))
    with pytest.raises(InvariantViolation) as e:
        T.delay(net, s, Fraction(2))
    assert e.value.max_delay == Fraction(1)
    s = T.fire(net, s, "off")
    assert s.locs == ("OFF",) and s.vals == (Fraction(0),)


def test_delay_zero_identity():
    ls = models.lightswitch()
    net = single(ls)
    s = net.initial_state()
    assert T.delay(net, s, Fraction(0)) == s


def test_fire_disabled_action():
    net = single(models.lightswitch())
    s = net.initial_state()
    with pytest.raises(NotEnabled):
        T.fire(net, s, "off")  # off needs location ON


def test_broadcast_three_components():
    # one sender, two listeners; the output moves everybody that listens
    send = T.Tioa("send", (), ("S0", "S1"), {}, "S0", (), ("go",),
                  (T.Edge("S0", (), "go", (), "S1"),))
    hear1 = T.Tioa("hear1", (), ("A", "B"), {}, "A", ("go",), (),
                   (T.Edge("A", (), "go", (), "B"),))
    hear2 = T.Tioa("hear2", (), ("P", "Q"), {}, "P", ("go",), (),
                   (T.Edge("P", (), "go", (), "Q"),))
    net = T.Network((send, hear1, hear2))
    s = T.fire(net, net.initial_state(), "go")
    assert s.locs == ("S1", "B", "Q")


def test_listener_without_edge_is_ignored():
    send = T.Tioa("send", (), ("S0",), {}, "S0", (), ("go",),
                  (T.Edge("S0", (), "go", (), "S0"),))
    deaf = T.Tioa("deaf", (), ("A", "B"), {}, "A", ("go",), (),
                  (T.Edge("B", (), "go", (), "A"),))  # nothing from A
    net = T.Network((send, deaf))
    s = T.fire(net, net.initial_state(), "go")
    assert s.locs == ("S0", "A")


def test_determinism_checker():
    ls = models.lightswitch()
    ls.check_deterministic()  # paper models pass
    models.lightswitch_strict().check_deterministic()
    bad = T.Tioa(
        "bad", ("x",), ("L",), {}, "L", (), ("o",),
        (
            T.Edge("L", (Constraint(1, "<=", 3),), "o", (), "L"),
            T.Edge("L", (Constraint(1, "<=", 3),), "o", (1,), "L"),
        ),
    )
    with pytest.raises(NondeterministicSpec):
        bad.check_deterministic()


def test_complete_inputs_adds_ignore_loop():
    ls = models.lightswitch()
    comp = T.complete_inputs(ls)
    # ON has no on-edge in the original; completion adds a non-resetting loop
    loops = [e for e in comp.edges_from("ON", "on")]
    assert loops and all(e.dst == "ON" and not e.resets for e in loops)
    # already-complete automaton is unchanged
    assert T.complete_inputs(comp) == comp


def test_complete_inputs_preserves_determinism():
    rng = random.Random(3)
    for _ in range(50):
        spec = _random_deterministic_automaton(rng)
        comp = T.complete_inputs(spec)
        comp.check_deterministic()


def _random_deterministic_automaton(rng):
    locs = ("L0", "L1")
    edges = []
    for loc in locs:
        # at most one input edge per (loc, label) keeps determinism trivially
        if rng.random() < 0.7:
            lo = rng.randint(0, 3)
            edges.append(T.Edge(loc, (Constraint(1, "<=", lo),), "i", (),
                                rng.choice(locs)))
        if rng.random() < 0.7:
            edges.append(T.Edge(loc, (Constraint(1, ">", 3),), "o", (1,),
                                rng.choice(locs)))
    return T.Tioa(f"rand", ("c",), locs, {}, "L0", ("i",), ("o",), tuple(edges))


def test_sym_delay_initial_lightswitch():
    net = single(models.lightswitch())
    s0 = T.SymState.initial(net)
    d = T.sym_delay(net, s0)
    expected = zn.from_constraints(1, [Constraint(1, "<=", 3)])
    assert zn.fed_equal(d.fed, [expected])


def test_sym_succ_disabled_is_empty():
    net = single(models.lightswitch())
    s0 = T.SymState.initial(net)
    with pytest.raises(EmptyResult):
        T.sym_succ(net, s0, "off")


def test_concrete_run_contained_in_symbolic():
    ls = models.lightswitch()
    net = single(ls)
    rng = random.Random(12)
    k = net.max_constants()
    for _ in range(300):
        # random concrete walk mirrored by the symbolic walk
        conc = net.initial_state()
        sym = T.SymState.initial(net)
        for _step in range(6):
            sym_d = T.sym_delay(net, sym)
            sup, _ = T._max_admissible_delay(net, conc)
            d = Fraction(rng.randint(0, int(sup * 2)), 2) if sup is not None else Fraction(rng.randint(0, 6), 2)
            conc = T.delay(net, conc, d)
            choices = []
            for a in ("blink", "on", "off"):
                if T._enabled_edge(net, conc, 0, a) is not None:
                    choices.append(a)
            if not choices:
                sym = sym_d
                break
            a = rng.choice(choices)
            conc = T.fire(net, conc, a)
            sym = T.sym_succ(net, sym_d, a, k)
            assert conc.locs == sym.locs
            assert zn.fed_contains(sym.fed, conc.vals)


def test_run_trace_helper():
    net = single(models.lightswitch_strict())
    s = T.run_trace(net, [(2, "blink"), (1, "on"), (3, "off")])
    assert s.locs == ("OFF",)
