"""Exact arrival/service-curve calculus.

Arrival curves are wide-sense increasing functions alpha with alpha(0) = 0
that cap the volume a flow may emit in any window: observed bytes (or
packets) on (s, t] never exceed alpha(t - s).  Two shapes are supported:

* ``MinAffineCurve``: the pointwise minimum of affine pieces r_i * t + b_i
  (t > 0).  Concave, always achievable when the burst covers one maximal
  packet.  A single piece is the classic leaky bucket.
* ``StaircaseCurve``: b * ceil(t / tau), the periodic-burst constraint used
  for packet-level regulation (K packets per period).

Every operation is pure and exact over Fractions.  The lower pseudo-inverse
``inf{s >= 0 | alpha(s) >= x}`` converts volume constraints into minimum
spacing, and is the workhorse of both the reordering bounds and the trace
conformance check.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple

from .rational import INF, Rat, fmt_rat, is_inf, parse_rat

BYTES = "bytes"
PACKETS = "packets"


class CurveError(ValueError):
    """Invalid curve construction or unsupported curve combination."""


class UnitMismatchError(CurveError):
    """Curves with different units were combined."""


class InstabilityError(ValueError):
    """Arrival rate exceeds the service rate; no finite delay bound exists."""


@dataclass(frozen=True)
class MinAffineCurve:
    """min_i (rate_i * t + burst_i) for t > 0, and 0 at t = 0."""

    pieces: Tuple[Tuple[Fraction, Fraction], ...]
    unit: str = BYTES

    def __post_init__(self) -> None:
        if not self.pieces:
            raise CurveError("min-affine curve needs at least one piece")
        if self.unit not in (BYTES, PACKETS):
            raise CurveError(f"unknown unit {self.unit!r}")
        norm = []
        for rate, burst in self.pieces:
            rate, burst = Fraction(rate), Fraction(burst)
            if rate <= 0:
                raise CurveError("piece rates must be > 0 (curves are unbounded)")
            if burst < 0:
                raise CurveError("piece bursts must be >= 0")
            norm.append((rate, burst))
        object.__setattr__(self, "pieces", tuple(sorted(set(norm))))

    def value(self, t: Rat) -> Rat:
        """Curve value at t (0 at t = 0, min of the pieces for t > 0)."""
        if is_inf(t):
            return INF
        t = Fraction(t)
        if t < 0:
            raise ValueError("curves are defined on t >= 0")
        if t == 0:
            return Fraction(0)
        return min(r * t + b for r, b in self.pieces)

    def value_at_zero_plus(self) -> Fraction:
        return min(b for _, b in self.pieces)

    def pseudo_inverse(self, x: Rat) -> Rat:
        """inf{s >= 0 | value(s) >= x}: the max over per-piece [(x-b)/r]^+."""
        x = Fraction(x)
        if x < 0:
            raise ValueError("pseudo-inverse is defined on x >= 0")
        if x == 0:
            return Fraction(0)
        best = Fraction(0)
        for r, b in self.pieces:
            cand = (x - b) / r
            if cand > best:
                best = cand
        return best

    def long_run_rate(self) -> Fraction:
        return min(r for r, _ in self.pieces)

    def to_json(self) -> dict:
        return {
            "unit": self.unit,
            "kind": "min_affine",
            "pieces": [
                {"rate": fmt_rat(r), "burst": fmt_rat(b)} for r, b in self.pieces
            ],
        }


@dataclass(frozen=True)
class StaircaseCurve:
    """burst * ceil(t / period): the flow sends at most `burst` per period."""

    burst: Fraction
    period: Fraction
    unit: str = BYTES

    def __post_init__(self) -> None:
        if self.unit not in (BYTES, PACKETS):
            raise CurveError(f"unknown unit {self.unit!r}")
        object.__setattr__(self, "burst", Fraction(self.burst))
        object.__setattr__(self, "period", Fraction(self.period))
        if self.burst <= 0 or self.period <= 0:
            raise CurveError("staircase burst and period must be > 0")

    def value(self, t: Rat) -> Rat:
        if is_inf(t):
            return INF
        t = Fraction(t)
        if t < 0:
            raise ValueError("curves are defined on t >= 0")
        if t == 0:
            return Fraction(0)
        return self.burst * _ceil_div(t, self.period)

    def value_at_zero_plus(self) -> Fraction:
        return self.burst

    def pseudo_inverse(self, x: Rat) -> Rat:
        """period * ceil((x - burst) / burst) for x > 0, and 0 at x = 0."""
        x = Fraction(x)
        if x < 0:
            raise ValueError("pseudo-inverse is defined on x >= 0")
        if x == 0:
            return Fraction(0)
        steps = _ceil_div(x - self.burst, self.burst)
        if steps <= 0:
            return Fraction(0)
        return self.period * steps

    def long_run_rate(self) -> Fraction:
        return self.burst / self.period

    def to_json(self) -> dict:
        return {
            "unit": self.unit,
            "kind": "staircase",
            "burst": fmt_rat(self.burst),
            "period": fmt_rat(self.period),
        }


Curve = MinAffineCurve | StaircaseCurve


def _ceil_div(num: Fraction, den: Fraction) -> int:
    q = num / den
    return -((-q.numerator) // q.denominator)


def leaky_bucket(rate: Rat, burst: Rat, unit: str = BYTES) -> MinAffineCurve:
    return MinAffineCurve(((Fraction(rate), Fraction(burst)),), unit)


@dataclass(frozen=True)
class RateLatencyService:
    """Rate-latency service guarantee beta(t) = rate * [t - latency]^+."""

    rate: Fraction
    latency: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "rate", Fraction(self.rate))
        object.__setattr__(self, "latency", Fraction(self.latency))
        if self.rate <= 0:
            raise CurveError("service rate must be > 0")
        if self.latency < 0:
            raise CurveError("service latency must be >= 0")


@dataclass(frozen=True)
class FlowSpec:
    """Per-flow contract: byte curve at the source, packet-size range, and an
    optional packet-level curve.

    The size range must satisfy l_max >= 2*l_min or l_min == l_max; only then
    is the set of reachable byte totals (finite sums of packet sizes) simple
    enough for the tightness machinery: all values >= l_min in the first
    regime, multiples of the common size in the second.
    """

    source_curve: Curve
    l_min: Fraction
    l_max: Fraction
    packet_curve: Optional[Curve] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "l_min", Fraction(self.l_min))
        object.__setattr__(self, "l_max", Fraction(self.l_max))
        if not 0 < self.l_min <= self.l_max:
            raise CurveError("need 0 < l_min <= l_max")
        if self.source_curve.unit != BYTES:
            raise UnitMismatchError("source_curve must be in bytes")
        if self.source_curve.value_at_zero_plus() < self.l_max:
            raise CurveError(
                "source curve burst below l_max: a maximal packet could never be sent"
            )
        if self.l_max < 2 * self.l_min and self.l_min != self.l_max:
            raise CurveError("need l_max >= 2*l_min or l_min == l_max")
        if self.packet_curve is not None and self.packet_curve.unit != PACKETS:
            raise UnitMismatchError("packet_curve must be in packets")

    @property
    def constant_size(self) -> bool:
        return self.l_min == self.l_max


def eval_curve(curve: Curve, t: Rat) -> Rat:
    """Value of the curve at time offset t >= 0 (bytes or packets)."""
    return curve.value(t)


def lower_pseudo_inverse(curve: Curve, x: Rat) -> Rat:
    """inf{s >= 0 | curve(s) >= x}: minimum window length that admits x units."""
    return curve.pseudo_inverse(x)


def backlog_bound(curve: Curve, max_delay: Rat) -> Rat:
    """Data of the flow inside a system with delay bound U is at most curve(U)."""
    if Fraction(max_delay) < 0:
        raise ValueError("delay bound must be >= 0")
    return curve.value(max_delay)


def shift_jitter(curve: MinAffineCurve, jitter: Rat) -> MinAffineCurve:
    """Arrival curve after a system with delay jitter V: alpha'(t) = alpha(t+V).

    Each affine piece (r, b) becomes (r, b + r*V).  Staircase curves are not
    shifted here; callers replace them by an affine upper bound first.
    """
    if not isinstance(curve, MinAffineCurve):
        raise CurveError("jitter shift is defined for min-affine curves only")
    v = Fraction(jitter)
    if v < 0:
        raise ValueError("jitter must be >= 0")
    if v == 0:
        return curve
    return MinAffineCurve(
        tuple((r, b + r * v) for r, b in curve.pieces), curve.unit
    )


def min_curves(a: MinAffineCurve, b: MinAffineCurve) -> MinAffineCurve:
    """Pointwise minimum of two min-affine curves: the union of their pieces,
    with pairwise-dominated pieces pruned (pruning never changes values)."""
    if not (isinstance(a, MinAffineCurve) and isinstance(b, MinAffineCurve)):
        raise CurveError("min is defined for min-affine curves only")
    if a.unit != b.unit:
        raise UnitMismatchError(f"cannot combine {a.unit} with {b.unit}")
    pieces = set(a.pieces) | set(b.pieces)
    kept = [
        p
        for p in pieces
        if not any(q != p and q[0] <= p[0] and q[1] <= p[1] for q in pieces)
    ]
    return MinAffineCurve(tuple(kept), a.unit)


def horizontal_deviation(curve: MinAffineCurve, service: RateLatencyService) -> Fraction:
    """Worst-case delay of a FIFO element: latency + sup_t(alpha(t) - R*t)/R.

    For a concave min-affine alpha the sup is attained as t -> 0+ or at a
    breakpoint between pieces; all pairwise intersections are candidates.
    """
    if not isinstance(curve, MinAffineCurve):
        raise CurveError("delay bound requires a min-affine arrival curve")
    if curve.long_run_rate() > service.rate:
        raise InstabilityError(
            "arrival rate exceeds service rate; backlog grows without bound"
        )
    best = curve.value_at_zero_plus()  # t -> 0+
    pieces = curve.pieces
    for i in range(len(pieces)):
        for j in range(i + 1, len(pieces)):
            (r1, b1), (r2, b2) = pieces[i], pieces[j]
            if r1 == r2:
                continue
            t = (b2 - b1) / (r1 - r2)
            if t <= 0:
                continue
            v = curve.value(t) - service.rate * t
            if v > best:
                best = v
    if best < 0:
        best = Fraction(0)
    return service.latency + best / service.rate


@dataclass(frozen=True)
class Conformance:
    """Verdict of an arrival-curve check; carries the first violating pair."""

    ok: bool
    first_index: Optional[int] = None
    second_index: Optional[int] = None
    required_gap: Optional[Fraction] = None
    actual_gap: Optional[Fraction] = None

    def __bool__(self) -> bool:
        return self.ok


def check_conforms(
    emit_times: Sequence[Rat], sizes: Sequence[Rat], curve: Curve
) -> Conformance:
    """Check the spacing characterization of the arrival-curve constraint.

    For every pair m <= n the emission gap must satisfy
    ``A_n - A_m >= inv(sum of sizes m..n)`` (byte curves) or
    ``A_n - A_m >= inv(n - m + 1)`` (packet curves).  Returns the first
    violating pair, in lexicographic (m, n) order, if any.
    """
    times = [Fraction(t) for t in emit_times]
    if any(times[i] > times[i + 1] for i in range(len(times) - 1)):
        raise ValueError("emission times must be wide-sense increasing")
    n = len(times)
    by_packets = curve.unit == PACKETS
    for m in range(n):
        acc = Fraction(0)
        for k in range(m, n):
            acc += Fraction(sizes[k])
            need = curve.pseudo_inverse(k - m + 1 if by_packets else acc)
            gap = times[k] - times[m]
            if gap < need:
                return Conformance(False, m + 1, k + 1, Fraction(need), gap)
    return Conformance(True)


def check_trace_conforms(trace, curve: Curve) -> Conformance:
    """Conformance of a trace's emission times against `curve`.

    Works on any object exposing ``packets`` with ``emit_time`` and ``size``;
    all packets (including ones lost downstream) count at the source.
    """
    pkts = list(trace.packets)
    if any(p.emit_time is None for p in pkts):
        raise ValueError("trace has no emission times")
    return check_conforms([p.emit_time for p in pkts], [p.size for p in pkts], curve)


def curve_to_json(curve: Curve) -> dict:
    return curve.to_json()


def curve_from_json(obj: dict) -> Curve:
    kind = obj.get("kind")
    unit = obj.get("unit", BYTES)
    if kind == "min_affine":
        pieces = tuple(
            (Fraction(parse_rat(p["rate"])), Fraction(parse_rat(p["burst"])))
            for p in obj["pieces"]
        )
        return MinAffineCurve(pieces, unit)
    if kind == "staircase":
        return StaircaseCurve(
            Fraction(parse_rat(obj["burst"])), Fraction(parse_rat(obj["period"])), unit
        )
    raise CurveError(f"unknown curve kind {kind!r}")
