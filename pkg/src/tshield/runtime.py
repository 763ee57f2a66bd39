"""Online shield execution.

A session tracks one monitor per game component against a stream of
timestamped events, consults the synthesized strategy, and produces
verdicts (post-shields) or published action sets (pre-shields).

Post-shield timing discipline:

* while no fault is flagged, correct system outputs pass through (forwarded
  on the primed alphabet at the same instant) and silence is tolerated until
  the composed state hits the last-chance boundary, where the shield emits a
  strategy action itself;
* a wrong output flips the error flag and is suppressed; from then on the
  shield emits autonomously at boundary-forced moments and echoes system
  outputs whose forwarding is strategy-allowed, which realigns the surviving
  fault hypotheses; recovery is reached when every live hypothesis matches
  the primed monitor exactly, after which pass-through resumes.

Because the winning region of a recovery shield already excludes every state
where a fault is flagged, the bound has run out and alignment still fails,
*any* strategy-conforming behaviour recovers in time; the session merely has
to stay inside the strategy, which it asserts after every step.

All arithmetic is exact rationals; the session never invents times of its
own beyond strategy boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from . import zones as zn
from .errors import ShieldStateCorrupt, TimeRegression, UnknownLabel
from .game import _delay_interval
from .monitor import MonitorTracker
from .shield import Shield

__all__ = [
    "Event",
    "Pass",
    "Correct",
    "Suppress",
    "Emit",
    "ActSet",
    "NotTriggered",
    "Recovering",
    "Recovered",
    "Session",
    "PostSession",
    "PreSession",
    "open_session",
    "parse_event_line",
    "parse_tick_line",
    "format_verdict",
    "format_actset",
    "format_rational",
    "parse_rational",
]

MAX_ZERO_DELAY_EMISSIONS = 32
MAX_ADVANCE_ROUNDS = 10000


@dataclass(frozen=True)
class Event:
    time: Fraction
    label: str
    direction: str  # "input" | "output"


@dataclass(frozen=True)
class Pass:
    label: str


@dataclass(frozen=True)
class Correct:
    label: str


@dataclass(frozen=True)
class Suppress:
    pass


@dataclass(frozen=True)
class Emit:
    label: str
    time: Fraction


@dataclass(frozen=True)
class ActSet:
    actions: frozenset
    delay_allowed: bool
    valid_until: Fraction | None  # None reads as "inf"


@dataclass(frozen=True)
class NotTriggered:
    pass


@dataclass(frozen=True)
class Recovering:
    elapsed: Fraction


@dataclass(frozen=True)
class Recovered:
    at: Fraction


class Session:
    """One logical event stream against one shield.  A session is a plain
    value-holder without locks; hand it between threads, never share it."""

    def __init__(self, shield: Shield):
        self.shield = shield
        self.net = shield.net
        self.now = Fraction(0)
        self.trackers = [MonitorTracker(m) for m in shield.monitors]
        self.rec = Fraction(0)
        self._has_rec = bool(self.net.extra_clocks)
        self.emitted: list[Emit] = []
        self._recovered_at: Fraction | None = None
        if not self._in_winning():
            raise ShieldStateCorrupt("initial state outside the winning region")

    # -- state assembly ---------------------------------------------------

    def _key(self):
        locs = tuple(t.loc for t in self.trackers)
        locs += tuple(
            c.tioa.initial for c in self.net.components[len(self.trackers):]
        )
        ints: dict[str, int] = {}
        for c in self.net.components:
            for var, (_l, _h, init) in c.tioa.int_vars.items():
                ints.setdefault(var, init)
        for t in self.trackers:
            ints.update(t.ints)
        return locs, tuple(sorted(ints.items()))

    def _vals(self) -> tuple:
        out: list[Fraction] = []
        for t in self.trackers:
            out.extend(t.vals)
        if self._has_rec:
            out.append(self.rec)
        return tuple(out)

    def _error(self) -> int:
        for t in self.trackers:
            if t.monitor.error_var:
                return t.ints.get(t.monitor.error_var, 0)
        return 0

    def _in_winning(self) -> bool:
        return zn.fed_contains(self.shield.winning.get(self._key(), []), self._vals())

    def _strategy_actions(self) -> set[str]:
        return self.shield.strategy.actions_at(self._key(), self._vals())

    # -- time machinery ----------------------------------------------------

    def _max_delay(self) -> Fraction | None:
        """Largest delay the strategy composition permits from here: the
        delay flag must hold at every instant strictly before the target, so
        the supremum itself is always reachable.  None means unbounded."""
        fed = self.shield.strategy.delay_ok.get(self._key(), [])
        vals = self._vals()
        intervals = []
        for z in fed:
            iv = _delay_interval(vals, z)
            if iv is not None:
                intervals.append(iv)

        def covered(point: Fraction) -> list:
            hits = []
            for lo, lo_s, hi, hi_s in intervals:
                lo_ok = lo < point or (lo == point and not lo_s)
                hi_ok = hi is None or point < hi or (point == hi and not hi_s)
                if lo_ok and hi_ok:
                    hits.append((lo, lo_s, hi, hi_s))
            return hits

        sup = Fraction(0)
        for _ in range(2 * len(intervals) + 2):
            hits = covered(sup)
            if not hits:
                return sup
            best = None
            for _lo, _ls, hi, _hs in hits:
                if hi is None:
                    return None
                if best is None or hi > best:
                    best = hi
            if best <= sup:
                return sup
            sup = best
        return sup

    def _min_deadline_slack(self) -> Fraction | None:
        best = None
        for t in self.trackers:
            s = t.deadline_slack()
            if s is not None and (best is None or s < best):
                best = s
        return best

    def _advance_all(self, d: Fraction):
        if d <= 0:
            return
        for t in self.trackers:
            t.advance(d)
        self.rec += d
        self.now += d

    def _cross_due(self):
        """Process deadline crossings once the boundary has been reached;
        semantically the crossing happens an instant past ``now``."""
        err_before = self._error()
        for t in self.trackers:
            if t.deadline_slack() == Fraction(0):
                t._enter_err()
        if err_before == 0 and self._error() == 1:
            self.rec = Fraction(0)

    def _advance(self, target: Fraction):
        """Let time flow to ``target``, firing boundary-forced emissions and
        crossing monitor deadlines on the way."""
        target = Fraction(target)
        rounds = 0
        while self.now < target:
            rounds += 1
            if rounds > MAX_ADVANCE_ROUNDS:
                raise ShieldStateCorrupt("time advance did not converge")
            slack = self._min_deadline_slack()
            if slack == 0:
                # standing on a deadline boundary: either the delay flag
                # sanctions crossing it, or the shield must act right now
                if self._delay_now_ok():
                    self._cross_due()
                    if not self._in_winning():
                        raise ShieldStateCorrupt(
                            "deadline crossing left the winning region"
                        )
                elif self._boundary_action_available():
                    self._fire_boundary()
                else:
                    raise ShieldStateCorrupt("stuck at a deadline boundary")
                continue
            d_max = self._max_delay()
            limit = target - self.now
            if d_max is not None and d_max < limit and (slack is None or d_max < slack):
                # the strategy's delay window closes inside the node: emit
                self._advance_all(d_max)
                self._fire_boundary()
                continue
            step = limit if slack is None else min(limit, slack)
            if d_max is not None:
                step = min(step, d_max) if step > d_max else step
            self._advance_all(step)
            # a deadline boundary reached here is crossed on the next round

    def _delay_now_ok(self) -> bool:
        return zn.fed_contains(
            self.shield.strategy.delay_ok.get(self._key(), []), self._vals()
        )

    def _boundary_action_available(self) -> bool:
        return any(a != "delay" for a in self._strategy_actions())

    def _fire_boundary(self):
        """Emit strategy actions at a boundary until delaying is allowed."""
        for _ in range(MAX_ZERO_DELAY_EMISSIONS):
            acts = sorted(a for a in self._strategy_actions() if a != "delay")
            if not acts:
                raise ShieldStateCorrupt("no action available at the boundary")
            self._emit(acts[0])
            d_max = self._max_delay()
            if d_max is None or d_max > 0 or self._delay_now_ok():
                return
        raise ShieldStateCorrupt("unbounded zero-delay emission chain")

    def _emit(self, label: str):
        self.emitted.append(Emit(label, self.now))
        self._apply_shield_label(label)
        if not self._in_winning():
            raise ShieldStateCorrupt("emission left the winning region (bug)")

    def _apply_shield_label(self, label: str):
        for t in self.trackers:
            t.observe(label)  # trackers ignore labels outside their alphabet

    # -- recovery bookkeeping ----------------------------------------------

    def _goal_holds(self) -> bool:
        goal = self.shield.goal
        if goal is None:
            return True
        locs, _ints = self._key()
        return goal.holds_concrete(self.net, locs, self._vals())

    def _note_recovery(self):
        if self._error() == 1 and self._recovered_at is None and self._goal_holds():
            self._recovered_at = self.now

    def recovery_status(self):
        if self._error() == 0:
            return NotTriggered()
        self._note_recovery()
        if self._recovered_at is not None:
            return Recovered(self._recovered_at)
        return Recovering(self.rec)


class PostSession(Session):
    """Post-shield executor: one verdict per system event, autonomous
    emissions at boundary-forced moments (collect them via tick/drain)."""

    def feed(self, e: Event):
        self._check_label(e)
        if e.time < self.now:
            raise TimeRegression(f"event at {e.time} behind session clock {self.now}")
        self._advance(e.time)
        if e.direction == "input":
            for t in self.trackers:
                t.observe(e.label)
            self._note_recovery()
            self._assert_winning("input")
            return Pass(e.label)
        return self._feed_output(e.label)

    def _feed_output(self, label: str):
        primed = label + "'"
        err_before = self._error()
        correct = self._correct_for_plain(label)
        for t in self.trackers:
            t.observe(label)  # the primed monitor ignores unprimed outputs
        if err_before == 0 and self._error() == 1:
            self.rec = Fraction(0)
        if err_before == 0 and correct:
            forward_ok = primed in self._strategy_actions()
            if forward_ok:
                self._apply_shield_label(primed)
                self._note_recovery()
                self._assert_winning("pass-through")
                return Pass(label)
            self._note_recovery()
            self._assert_winning("suppressed output")
            return Suppress()
        # wrong output or already recovering: monitor and discard, but echo
        # the action on the shield side whenever that is strategy-allowed
        verdict = Suppress()
        if self._error() == 1:
            forward_ok = primed in self._strategy_actions()
            if forward_ok:
                self._apply_shield_label(primed)
                verdict = Correct(primed)
        self._note_recovery()
        self._assert_winning("system output")
        return verdict

    def _assert_winning(self, what: str):
        if not self._in_winning():
            raise ShieldStateCorrupt(f"{what} drove the session out of the winning region")

    def _check_label(self, e: Event):
        known = set(self.net.uncontrollable)
        if e.direction == "output":
            if e.label not in known:
                raise UnknownLabel(e.label)
        elif e.label not in known:
            raise UnknownLabel(e.label)

    def _correct_for_plain(self, label: str) -> bool:
        for t in self.trackers:
            if t.monitor.error_var:
                probe = t.clone()
                probe.observe(label)
                return not probe.in_err
        return True

    def tick(self, now) -> list[Emit]:
        now = Fraction(now)
        if now < self.now:
            raise TimeRegression(f"tick at {now} behind session clock {self.now}")
        mark = len(self.emitted)
        self._advance(now)
        self._note_recovery()
        return self.emitted[mark:]

    def drain(self) -> list[Emit]:
        out, self.emitted = self.emitted, []
        return out


class PreSession(Session):
    """Pre-shield executor: publishes the safe action set, refreshed on every
    event and on zone changes."""

    def feed(self, e: Event) -> ActSet:
        if e.time < self.now:
            raise TimeRegression(f"event at {e.time} behind session clock {self.now}")
        known = set(self.net.controllable) | set(self.net.uncontrollable)
        if e.label not in known:
            raise UnknownLabel(e.label)
        self._advance_plain(Fraction(e.time))
        if e.direction == "output" and e.label not in self._strategy_actions():
            raise ShieldStateCorrupt(
                f"system chose {e.label!r} outside the published set"
            )
        for t in self.trackers:
            t.observe(e.label)
        if not self._in_winning():
            raise ShieldStateCorrupt("event drove the session out of the winning region")
        return self.act_set()

    def tick(self, now) -> ActSet:
        now = Fraction(now)
        if now < self.now:
            raise TimeRegression(f"tick at {now} behind session clock {self.now}")
        self._advance_plain(now)
        return self.act_set()

    def _advance_plain(self, target: Fraction):
        d = target - self.now
        if d > 0:
            self._advance_all(d)
        if any(t.in_err for t in self.trackers):
            raise ShieldStateCorrupt("the system overran a deadline")

    def act_set(self) -> ActSet:
        strat = self._strategy_actions()
        acts = {a for a in strat if a != "delay"}
        acts |= set(self.net.uncontrollable)
        return ActSet(frozenset(acts), "delay" in strat, self._segment_end())

    def _segment_end(self) -> Fraction | None:
        """Absolute time at which the published set next changes."""
        key, vals = self._key(), self._vals()
        cuts: list[Fraction] = []
        feds = [self.shield.strategy.delay_ok.get(key, [])]
        feds.extend(self.shield.strategy.allowed.get(key, {}).values())
        for fed in feds:
            for z in fed:
                iv = _delay_interval(vals, z)
                if iv is None:
                    continue
                lo, _ls, hi, _hs = iv
                if lo > 0:
                    cuts.append(lo)
                if hi is not None and hi > 0:
                    cuts.append(hi)
        future = sorted(set(cuts))
        return self.now + future[0] if future else None


def open_session(shield: Shield) -> Session:
    """Fresh, independent session for the shield."""
    if shield.kind.kind == "pre":
        return PreSession(shield)
    return PostSession(shield)


# ----------------------------------------------------------- line protocol


def format_rational(x) -> str:
    if x is None:
        return "inf"
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def parse_rational(text: str) -> Fraction:
    if "/" in text:
        a, b = text.split("/", 1)
        return Fraction(int(a), int(b))
    return Fraction(int(text))


def parse_event_line(line: str) -> Event:
    parts = line.split()
    if len(parts) != 4 or parts[2] != "@" or parts[0] not in ("IN", "OUT"):
        raise ValueError(f"bad event line: {line!r}")
    return Event(parse_rational(parts[3]), parts[1],
                 "input" if parts[0] == "IN" else "output")


def parse_tick_line(line: str):
    parts = line.split()
    if len(parts) == 3 and parts[0] == "TICK" and parts[1] == "@":
        return parse_rational(parts[2])
    return None


def format_verdict(v) -> str:
    if isinstance(v, Pass):
        return "PASS"
    if isinstance(v, Correct):
        return f"CORRECT {v.label}"
    if isinstance(v, Suppress):
        return "SUPPRESS"
    if isinstance(v, Emit):
        return f"EMIT {v.label} @ {format_rational(v.time)}"
    raise TypeError(v)


def format_actset(a: ActSet) -> str:
    labels = ",".join(sorted(a.actions))
    return (
        f"ACT {{{labels}}} delay={1 if a.delay_allowed else 0} "
        f"until={format_rational(a.valid_until)}"
    )
