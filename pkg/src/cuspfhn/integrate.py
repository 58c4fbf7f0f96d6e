"""Adaptive explicit Runge-Kutta integration with dense output and events.

A single embedded Dormand-Prince 5(4) pair drives everything in the
toolkit: the 5th-order solution is propagated, the embedded 4th-order
difference feeds a PI step-size controller, and the pair's standard
quartic interpolant provides dense output on every accepted step.  Event
functions are scanned for sign changes on the dense output and refined by
bisection on the interpolant, so no derivative of the event function is
ever needed.

The integrator is deliberately explicit: the problems in this package are
non-stiff at the tolerances of interest, and regions of strong contraction
are handled by small steps rather than implicitness.  A ``fixed_h`` mode
(no error control) exists for convergence-order studies, and a
``step_constraint`` hook lets callers reject otherwise-accepted steps
(used to force sub-pi/2 angle increments when counting rotations).

Integrations hold no shared mutable state; parameter sweeps simply run one
integration per worker.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NonFiniteState, NoReturn, StepSizeUnderflow, TangencyDetected

__all__ = [
    "IntegratorConfig",
    "EventSpec",
    "EventRecord",
    "Trajectory",
    "integrate",
    "poincare_return",
]


# Dormand-Prince 5(4) tableau.  B propagates (5th order); E = B5 - B4 is
# the embedded error weight vector including the FSAL stage.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
               -17253 / 339200, 22 / 525, -1 / 40])
# Quartic dense-output matrix: y(t0 + theta*h) = y0 + h * K^T P [theta, ..., theta^4].
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608,
     -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933,
     87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304,
     -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408,
     701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883,
     -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 6.0
_BETA = 0.04            # PI controller memory exponent
_ALPHA = 0.2 - 0.75 * _BETA


@dataclass
class IntegratorConfig:
    """Integration settings.

    ``t_max`` is the horizon *length* (positive); with
    ``direction='backward'`` the run covers ``[t0 - t_max, t0]`` and
    trajectory times decrease.  ``event_tol`` is the time tolerance for
    event localization and should stay well below any expected event
    spacing.  ``fixed_h`` switches off error control entirely.
    """

    rtol: float = 1e-9
    atol: float = 1e-12
    h_init: float | None = None
    h_max: float = math.inf
    t_max: float = 100.0
    direction: str = "forward"
    event_tol: float = 1e-10
    fixed_h: float | None = None
    max_steps: int = 5_000_000
    step_constraint: Callable[[float, np.ndarray, float, np.ndarray], bool] | None = None
    event_scan_points: int = 4

    def __post_init__(self):
        if self.rtol <= 0.0 or self.atol <= 0.0:
            raise ValueError("rtol and atol must be positive")
        if self.t_max <= 0.0:
            raise ValueError("t_max must be positive")
        if self.direction not in ("forward", "backward"):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.event_tol <= 0.0:
            raise ValueError("event_tol must be positive")


_DIRECTIONS = {"rising": 1, "falling": -1, "any": 0, 1: 1, -1: -1, 0: 0}


@dataclass
class EventSpec:
    """Scalar event: a sign change of ``fn(t, state)`` along the orbit.

    ``direction`` filters crossings by the sign of the change along the
    traversal order ('rising', 'falling' or 'any').  ``guard`` is an extra
    predicate evaluated at the refined crossing; crossings failing the
    guard are discarded (and never terminate).  ``terminal`` stops the
    integration at the crossing.
    """

    fn: Callable[[float, np.ndarray], float]
    direction: str | int = "any"
    guard: Callable[[float, np.ndarray], bool] | None = None
    terminal: bool = False
    name: str = ""

    def dir_sign(self) -> int:
        return _DIRECTIONS[self.direction]


@dataclass
class EventRecord:
    t: float
    y: np.ndarray
    index: int
    name: str


class _DenseSegment:
    """Quartic interpolant over one accepted step [t0, t0+h]."""

    __slots__ = ("t0", "h", "y0", "q")

    def __init__(self, t0, h, y0, K):
        self.t0 = t0
        self.h = h
        self.y0 = y0
        self.q = K.T @ _P          # (n, 4)

    def __call__(self, t):
        theta = (t - self.t0) / self.h
        pows = np.array([theta, theta * theta, theta ** 3, theta ** 4])
        return self.y0 + self.h * (self.q @ pows)


@dataclass
class Trajectory:
    """Accepted samples, per-step dense output, and localized events.

    ``status`` is one of ``'completed'`` (horizon reached; for plain
    integrations the ``horizon_exceeded`` flag is set as well when no
    terminal event was requested to stop earlier), ``'terminal'`` (a
    terminal event stopped the run).  Times are strictly monotone in the
    integration direction.
    """

    ts: np.ndarray
    ys: np.ndarray
    events: list[EventRecord]
    status: str
    terminal_event: EventRecord | None
    horizon_exceeded: bool
    n_accepted: int
    n_rejected: int
    segments: list = field(repr=False, default_factory=list)

    @property
    def t_end(self) -> float:
        return float(self.ts[-1])

    @property
    def y_end(self) -> np.ndarray:
        return self.ys[-1]

    def sample(self, t: float) -> np.ndarray:
        """Evaluate the dense output at time ``t`` (must lie inside the span)."""
        if not self.segments:
            raise ValueError("trajectory carries no dense output")
        sgn = 1.0 if self.ts[-1] >= self.ts[0] else -1.0
        lo, hi = sorted((self.ts[0], self.ts[-1]))
        if not (lo - 1e-12 <= t <= hi + 1e-12):
            raise ValueError(f"t={t} outside trajectory span [{lo}, {hi}]")
        keys = sgn * np.array([s.t0 for s in self.segments])
        i = int(np.searchsorted(keys, sgn * t, side="right")) - 1
        i = min(max(i, 0), len(self.segments) - 1)
        return self.segments[i](t)

    def sample_many(self, ts: Sequence[float]) -> np.ndarray:
        return np.array([self.sample(t) for t in ts])

    def to_csv(self, path, provenance: Sequence[str] = ()) -> None:
        """Write ``t, state components, is_event, event_id`` rows.

        Event rows are interleaved at their localized times.
        """
        n = self.ys.shape[1]
        rows = [(float(t), [float(v) for v in y], 0, "")
                for t, y in zip(self.ts, self.ys)]
        rows += [(float(e.t), [float(v) for v in e.y], 1, e.name or str(e.index))
                 for e in self.events]
        reverse = len(self.ts) > 1 and self.ts[-1] < self.ts[0]
        rows.sort(key=lambda r: r[0], reverse=reverse)
        with open(path, "w", newline="") as fh:
            for line in provenance:
                fh.write(f"# {line}\n")
            writer = csv.writer(fh)
            writer.writerow(["t"] + [f"y{i}" for i in range(n)]
                            + ["is_event", "event_id"])
            for t, y, is_ev, eid in rows:
                writer.writerow([repr(t)] + [repr(v) for v in y] + [is_ev, eid])

    def to_json(self, path, provenance: Sequence[str] = ()) -> None:
        payload = {
            "provenance": list(provenance),
            "t": [float(t) for t in self.ts],
            "y": [[float(v) for v in row] for row in self.ys],
            "events": [
                {"t": float(e.t), "state": [float(v) for v in e.y],
                 "index": e.index, "id": e.name or str(e.index)}
                for e in self.events
            ],
            "status": self.status,
            "horizon_exceeded": self.horizon_exceeded,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)


def _initial_step(rhs, t0, y0, f0, sgn, rtol, atol, h_max):
    """Hairer-style cheap starting-step heuristic."""
    sc = atol + rtol * np.abs(y0)
    d0 = float(np.sqrt(np.mean((y0 / sc) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / sc) ** 2)))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    y1 = y0 + h0 * sgn * f0
    f1 = np.asarray(rhs(t0 + h0 * sgn, y1), dtype=float)
    d2 = float(np.sqrt(np.mean(((f1 - f0) / sc) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, h_max)


def _refine_event(seg, fn, t_lo, t_hi, g_lo, event_tol):
    """Bisection for fn(t, seg(t)) = 0 on [t_lo, t_hi] (times may run
    backward); returns the localized time."""
    s_lo = math.copysign(1.0, g_lo)
    while abs(t_hi - t_lo) > event_tol:
        t_mid = 0.5 * (t_lo + t_hi)
        g_mid = fn(t_mid, seg(t_mid))
        if g_mid == 0.0:
            return t_mid
        if math.copysign(1.0, g_mid) == s_lo:
            t_lo = t_mid
        else:
            t_hi = t_mid
    return 0.5 * (t_lo + t_hi)


def _scan_events(events, seg, t0, t1, g_prev, cfg, records, counters):
    """Detect and refine crossings of every event on one accepted step.

    Returns (terminal_record or None, g_values_at_t1).  ``g_prev`` holds
    event values at t0.  Interior dense samples catch multiple crossings
    within a single step.
    """
    n_scan = max(1, cfg.event_scan_points)
    thetas = np.linspace(0.0, 1.0, n_scan + 2)[1:]
    ts = t0 + (t1 - t0) * thetas
    g_end = list(g_prev)
    found = []  # (t_event, idx)
    for idx, ev in enumerate(events):
        g_left = g_prev[idx]
        t_left = t0
        for t_right in ts:
            y_right = seg(t_right)
            g_right = ev.fn(t_right, y_right)
            if g_left != 0.0 and g_right != 0.0 and (g_left > 0) != (g_right > 0):
                want = ev.dir_sign()
                change = 1 if g_right > g_left else -1
                if want == 0 or want == change:
                    t_ev = _refine_event(seg, ev.fn, t_left, t_right, g_left,
                                         cfg.event_tol)
                    y_ev = seg(t_ev)
                    if ev.guard is None or ev.guard(t_ev, y_ev):
                        found.append((t_ev, idx, y_ev))
            t_left, g_left = t_right, g_right
        g_end[idx] = g_left
    if not found:
        return None, g_end
    # process in traversal order
    reverse = t1 < t0
    found.sort(key=lambda item: item[0], reverse=reverse)
    terminal = None
    for t_ev, idx, y_ev in found:
        rec = EventRecord(t=t_ev, y=np.array(y_ev), index=idx,
                          name=events[idx].name or str(idx))
        if terminal is None:
            records.append(rec)
            counters[idx] += 1
            if events[idx].terminal:
                terminal = rec
        # events strictly after a terminal crossing are discarded
    return terminal, g_end


def integrate(rhs, s0, cfg: IntegratorConfig, events: Sequence[EventSpec] = (),
              t0: float = 0.0) -> Trajectory:
    """Integrate ``y' = rhs(t, y)`` from ``t0`` over the configured horizon.

    Parameters
    ----------
    rhs : callable
        ``rhs(t, y) -> dy/dt`` (any array-like of the same shape as ``y``).
    s0 : array-like
        Initial state.
    cfg : IntegratorConfig
        Tolerances, horizon, direction, event tolerance, optional fixed
        step and step constraint.
    events : sequence of EventSpec
        Events to localize; terminal ones stop the run.

    Returns
    -------
    Trajectory
        Accepted samples, dense output, event records and status.  Hitting
        the horizon without a terminal event is reported through
        ``horizon_exceeded`` (not raised).

    Raises
    ------
    StepSizeUnderflow
        Step control collapsed the step below the floating floor (stiffness
        beyond the tolerance budget) or the step budget ran out.
    NonFiniteState
        State or derivative lost finiteness.
    """
    y = np.array(s0, dtype=float)
    if y.ndim != 1:
        raise ValueError("state must be one-dimensional")
    if not np.all(np.isfinite(y)):
        raise NonFiniteState(f"non-finite initial state {y}")
    sgn = 1.0 if cfg.direction == "forward" else -1.0
    t_final = t0 + sgn * cfg.t_max
    n = y.size

    f = np.asarray(rhs(t0, y), dtype=float)
    if not np.all(np.isfinite(f)):
        raise NonFiniteState(f"non-finite derivative at start, state {y}")

    if cfg.fixed_h is not None:
        h = float(cfg.fixed_h)
    elif cfg.h_init is not None:
        h = float(cfg.h_init)
    else:
        h = _initial_step(rhs, t0, y, f, sgn, cfg.rtol, cfg.atol, cfg.h_max)
    h = min(h, cfg.h_max, cfg.t_max)

    ts = [t0]
    ys = [y.copy()]
    segments: list[_DenseSegment] = []
    records: list[EventRecord] = []
    counters = [0] * len(events)
    g_prev = [ev.fn(t0, y) for ev in events]

    K = np.empty((7, n))
    t = t0
    err_prev = 1e-4
    n_accepted = 0
    n_rejected = 0
    terminal_rec = None
    steps = 0

    while sgn * (t_final - t) > 1e-14 * max(1.0, abs(t)):
        steps += 1
        if steps > cfg.max_steps:
            raise StepSizeUnderflow(
                f"step budget {cfg.max_steps} exhausted at t={t}")
        h = min(h, abs(t_final - t))
        if h < 1e-14 * max(1.0, abs(t)):
            raise StepSizeUnderflow(f"step size underflow at t={t} (h={h})")
        hs = sgn * h

        K[0] = f
        for i in range(1, 7):
            yi = y + hs * (_A[i] @ K[:i])
            K[i] = rhs(t + _C[i] * hs, yi)
        # stage 7 evaluated K[6] at y1 candidate (FSAL)
        y1 = yi  # row 7 of A equals B: the last stage state IS the solution
        f1 = K[6]

        if not (np.all(np.isfinite(y1)) and np.all(np.isfinite(f1))):
            if cfg.fixed_h is not None:
                raise NonFiniteState(f"non-finite state at t={t + hs}")
            h *= 0.25
            n_rejected += 1
            continue

        if cfg.fixed_h is None:
            e = hs * (_E @ K)
            sc = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y1))
            err = float(np.sqrt(np.mean((e / sc) ** 2)))
            if err > 1.0:
                n_rejected += 1
                factor = max(_MIN_FACTOR, _SAFETY * err ** -_ALPHA)
                h *= min(1.0, factor)
                continue
        else:
            err = 0.0

        if cfg.step_constraint is not None and not cfg.step_constraint(
                t, y, t + hs, y1):
            n_rejected += 1
            h *= 0.5
            continue

        seg = _DenseSegment(t, hs, y.copy(), K.copy())
        segments.append(seg)

        if events:
            terminal_rec, g_prev = _scan_events(
                events, seg, t, t + hs, g_prev, cfg, records, counters)
            if terminal_rec is not None:
                ts.append(terminal_rec.t)
                ys.append(terminal_rec.y.copy())
                n_accepted += 1
                break

        t = t + hs
        y = y1.copy()
        f = f1.copy()
        ts.append(t)
        ys.append(y.copy())
        n_accepted += 1

        if cfg.fixed_h is None:
            err = max(err, 1e-10)
            factor = _SAFETY * err ** -_ALPHA * err_prev ** _BETA
            h = min(cfg.h_max, h * min(_MAX_FACTOR, max(_MIN_FACTOR, factor)))
            err_prev = err

    if terminal_rec is not None:
        status = "terminal"
        horizon = False
    else:
        status = "completed"
        horizon = True
    return Trajectory(
        ts=np.array(ts), ys=np.array(ys), events=records, status=status,
        terminal_event=terminal_rec, horizon_exceeded=horizon,
        n_accepted=n_accepted, n_rejected=n_rejected, segments=segments,
    )


def poincare_return(rhs, section: EventSpec, s0, cfg: IntegratorConfig,
                    t_skip: float = 1e-3, tangency_tol: float = 1e-8):
    """Integrate until the next same-direction crossing of ``section``.

    The seed may sit on the section; crossings within ``t_skip`` of the
    start are ignored.  Returns ``(state, elapsed_time)`` with the elapsed
    time positive regardless of direction.

    Raises
    ------
    NoReturn
        Horizon exceeded with no (non-skipped) crossing.
    TangencyDetected
        The crossing's transversality ``|d/dt fn|`` falls below
        ``tangency_tol``.
    """
    terminal_section = EventSpec(fn=section.fn, direction=section.direction,
                                 guard=section.guard, terminal=True,
                                 name=section.name or "section")

    def guarded(t, y, _inner=terminal_section.guard):
        if abs(t) <= t_skip:
            return False
        return True if _inner is None else _inner(t, y)

    terminal_section.guard = guarded
    traj = integrate(rhs, s0, cfg, events=[terminal_section], t0=0.0)
    if traj.terminal_event is None:
        raise NoReturn(
            f"no section return within horizon t_max={cfg.t_max}")
    rec = traj.terminal_event
    dt = 1e-6 * max(1.0, abs(rec.t))
    sgn = 1.0 if cfg.direction == "forward" else -1.0
    t_lo = rec.t - sgn * dt
    g_lo = section.fn(t_lo, traj.sample(t_lo))
    g_hi = section.fn(rec.t, rec.y)
    slope = abs(g_hi - g_lo) / dt
    if slope < tangency_tol:
        raise TangencyDetected(
            f"section crossing at t={rec.t} has |dg/dt|~{slope:.3e}")
    return rec.y.copy(), abs(rec.t)
