"""Built-in example automata used by the test-suite, demos and shipped files.

The light switch: while OFF the device must blink at least every 3 time
units; switching on is an environment input; once ON the light stays on for
1 to 5 time units before the device switches it off.  The strict variant
narrows both windows, so it refines the loose one but not vice versa.
"""

from __future__ import annotations

from .tioa import Edge, Tioa
from .zones import Constraint

X = 1  # the single light-switch clock, by local index


def lightswitch() -> Tioa:
    return Tioa(
        name="lightswitch",
        clocks=("x",),
        locations=("OFF", "ON"),
        invariants={
            "OFF": (Constraint(X, "<=", 3),),
            "ON": (Constraint(X, "<=", 5),),
        },
        initial="OFF",
        inputs=("on",),
        outputs=("blink", "off"),
        edges=(
            Edge("OFF", (), "blink", (X,), "OFF"),
            Edge("OFF", (), "on", (X,), "ON"),
            Edge("ON", (Constraint(X, ">=", 1),), "off", (X,), "OFF"),
        ),
    )


def lightswitch_strict() -> Tioa:
    """Refinement of the light switch: blink every 2, switch off within [2,4]."""
    return Tioa(
        name="lightswitch_strict",
        clocks=("x",),
        locations=("OFF", "ON"),
        invariants={
            "OFF": (Constraint(X, "<=", 2),),
            "ON": (Constraint(X, "<=", 4),),
        },
        initial="OFF",
        inputs=("on",),
        outputs=("blink", "off"),
        edges=(
            Edge("OFF", (), "blink", (X,), "OFF"),
            Edge("OFF", (), "on", (X,), "ON"),
            Edge("ON", (Constraint(X, ">=", 2),), "off", (X,), "OFF"),
        ),
    )


def never_reset() -> Tioa:
    """A spec whose only clock is never reset; clock faults on it can never
    re-align, so recovery synthesis must report the game as losing."""
    return Tioa(
        name="neverreset",
        clocks=("y",),
        locations=("RUN",),
        invariants={},
        initial="RUN",
        inputs=(),
        outputs=("tick",),
        edges=(
            Edge("RUN", (Constraint(X, ">=", 1), Constraint(X, "<=", 10)), "tick", (), "RUN"),
        ),
    )


def action_window() -> Tioa:
    """Two-clock model whose outputs are enabled in overlapping open boxes;
    delaying from the origin sweeps through five constant-action zones."""
    x, y = 1, 2
    return Tioa(
        name="window",
        clocks=("x", "y"),
        locations=("W",),
        invariants={},
        initial="W",
        inputs=(),
        outputs=("a", "b"),
        edges=(
            Edge(
                "W",
                (
                    Constraint(x, ">", 1),
                    Constraint(x, "<", 5),
                    Constraint(y, ">", 2),
                    Constraint(y, "<", 5),
                ),
                "a",
                (),
                "W",
            ),
            Edge(
                "W",
                (
                    Constraint(x, ">", 4),
                    Constraint(x, "<", 8),
                    Constraint(y, ">", 3),
                    Constraint(y, "<", 6),
                ),
                "b",
                (),
                "W",
            ),
        ),
    )


BUILTIN = {
    "lightswitch": lightswitch,
    "lightswitch_strict": lightswitch_strict,
    "neverreset": never_reset,
    "action_window": action_window,
}
