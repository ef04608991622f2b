"""Event-driven particle flow through a scatterer field.

Between scatterers the particle flies straight.  On reaching a disk
boundary it either crosses along the refracted interior chord (barrier
mode; interior speed is n * exterior speed, exit deflected by the
closed-form angle) or reflects specularly (hard-disk mode, and the
total-reflection branch of the barrier).  Disk/line intersections are
solved exactly by the quadratic formula; near-tangential hits
(normalized discriminant < 1e-12) are treated as misses, and after each
boundary interaction the position is nudged 1e-12 along the new
velocity so the boundary just left is not re-detected.

Overlapping disks are not composed: a disk that already contains the
current position is ignored for that flight, the first boundary crossing
always wins, and the overlap shows up in the pathology report instead.

The backward flow is velocity reversal (the dynamics is time
reversible); this is asserted by the time-reversal tests rather than
implemented as a separate integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .scattering import BarrierParams, refractive_index

__all__ = [
    "ParticleState",
    "TrajectoryEvent",
    "TrajectoryLog",
    "PathologyReport",
    "StuckParticleError",
    "advance",
    "backward_flow",
    "classify_pathologies",
    "first_boundary_hit",
]

MAX_EVENTS = 10**6
_PUSH = 1e-12
_TANGENT_TOL = 1e-12

BARRIER_TRAVERSE = "barrier_traverse"
TOTAL_REFLECT = "total_reflect"
HARD_REFLECT = "hard_reflect"


class StuckParticleError(RuntimeError):
    """More than MAX_EVENTS boundary events before the requested time."""


@dataclass
class ParticleState:
    """Position and velocity, macroscopic units."""

    x: np.ndarray
    v: np.ndarray

    def __init__(self, x, v):
        self.x = np.asarray(x, dtype=float).copy()
        self.v = np.asarray(v, dtype=float).copy()

    @property
    def speed(self) -> float:
        return float(np.hypot(self.v[0], self.v[1]))


@dataclass(frozen=True)
class TrajectoryEvent:
    time: float
    center: tuple[float, float]
    rho: float  # signed entry impact parameter, units of the disk radius
    kind: str  # BARRIER_TRAVERSE | TOTAL_REFLECT | HARD_REFLECT


@dataclass
class TrajectoryLog:
    """Ordered event record plus the polyline actually traveled."""

    events: list[TrajectoryEvent] = dc_field(default_factory=list)
    path: list[tuple[float, tuple[float, float]]] = dc_field(default_factory=list)


@dataclass(frozen=True)
class PathologyReport:
    """Counts of the memory-effect events on one trajectory."""

    overlaps: int
    recollisions: int
    interferences: int
    q_collisions: int


def _bound_cross(x: float, ux: float, s_len: float, lo: float, hi: float):
    """First crossing of x-coordinate with lo/hi within s in (0, s_len]."""
    best = None
    if ux > 0.0:
        s = (hi - x) / ux
        if 0.0 < s <= s_len:
            best = (s, "right")
        s = (lo - x) / ux
        if 0.0 < s <= s_len and (best is None or s < best[0]):
            best = (s, "left")
    elif ux < 0.0:
        s = (lo - x) / ux
        if 0.0 < s <= s_len:
            best = (s, "left")
        s = (hi - x) / ux
        if 0.0 < s <= s_len and (best is None or s < best[0]):
            best = (s, "right")
    return best


def _first_hit(field, x, y, ux, uy, r, s_max):
    """Earliest disk-boundary entry along (x,y) + s*(ux,uy), s in (0, s_max].

    Marches the ray in windows of a couple of mean free paths,
    enumerating the cells whose r-neighborhood the window touches; a
    disk entered inside the window necessarily has its center within r
    of the window segment, so the earliest hit found is the global one.
    """
    if s_max <= 0.0:
        return None
    r2 = r * r
    spec = getattr(field, "spec", None)
    if spec is None:
        # planted fixture: single pass over the explicit list
        best_s = None
        best_c = None
        for (cx, cy) in field.centers:
            wx, wy = cx - x, cy - y
            w2 = wx * wx + wy * wy
            if w2 < r2:
                continue  # started inside (overlap); do not interact
            b = wx * ux + wy * uy
            disc = b * b - (w2 - r2)
            if disc < _TANGENT_TOL * r2:
                continue  # tangential graze counts as a miss
            s_in = b - math.sqrt(disc)
            if 0.0 < s_in <= s_max and (best_s is None or s_in < best_s):
                best_s = s_in
                best_c = (cx, cy)
        return None if best_s is None else (best_s, best_c)

    cs = field.cell_size
    win = max(2.0 * cs, 1.5 / (2.0 * r * spec.mu_eff))
    cell_lists = field.scatterers_in_cell
    floor = math.floor
    s0 = 0.0
    while s0 < s_max:
        s1 = min(s0 + win, s_max)
        ax, ay = x + s0 * ux, y + s0 * uy
        bx, by = x + s1 * ux, y + s1 * uy
        if ax > bx:
            ax, bx = bx, ax
        if ay > by:
            ay, by = by, ay
        ix0 = floor((ax - r) / cs)
        ix1 = floor((bx + r) / cs)
        iy0 = floor((ay - r) / cs)
        iy1 = floor((by + r) / cs)
        best_s = None
        best_c = None
        for ix in range(ix0, ix1 + 1):
            for iy in range(iy0, iy1 + 1):
                for (cx, cy) in cell_lists((ix, iy)):
                    wx, wy = cx - x, cy - y
                    w2 = wx * wx + wy * wy
                    if w2 < r2:
                        continue
                    b = wx * ux + wy * uy
                    disc = b * b - (w2 - r2)
                    if disc < _TANGENT_TOL * r2:
                        continue
                    s_in = b - math.sqrt(disc)
                    if 0.0 < s_in <= s1 and (best_s is None or s_in < best_s):
                        best_s = s_in
                        best_c = (cx, cy)
        if best_s is not None:
            return best_s, best_c
        s0 = s1
    return None


def _find_containing_disk(field, x, y, r):
    ix, iy = field.cell_of(x, y)
    best = None
    best_d2 = r * r
    for jx in range(ix - 1, ix + 2):
        for jy in range(iy - 1, iy + 2):
            for (cx, cy) in field.scatterers_in_cell((jx, jy)):
                d2 = (cx - x) ** 2 + (cy - y) ** 2
                if d2 < best_d2:
                    best_d2 = d2
                    best = (cx, cy)
    return best


def _exit_refract(ux, uy, mx, my, n):
    """Interior direction (ux,uy) leaving through outward normal (mx,my)."""
    # tangential sine scales by n on the way out; n < 1 so it never traps
    c1 = ux * mx + uy * my
    tx, ty = ux - c1 * mx, uy - c1 * my
    sx, sy = n * tx, n * ty
    c2 = math.sqrt(max(0.0, 1.0 - (sx * sx + sy * sy)))
    return sx + c2 * mx, sy + c2 * my


class _Engine:
    """One trajectory through one field; drives advance and the slab runs."""

    __slots__ = ("field", "params", "mode", "radius", "n_index", "log",
                 "on_segment", "x_bounds", "max_events")

    def __init__(self, field, params: BarrierParams | None, mode: str,
                 log: TrajectoryLog | None = None, on_segment=None,
                 x_bounds=None, max_events: int = MAX_EVENTS):
        if mode not in ("barrier", "hard_disk"):
            raise ValueError(f"unknown mode {mode!r}")
        self.field = field
        self.params = params
        self.mode = mode
        self.radius = field.epsilon
        if mode == "barrier":
            if params is None:
                raise ValueError("barrier mode requires BarrierParams")
            if abs(field.epsilon - params.epsilon) > 1e-12 * params.epsilon:
                raise ValueError("field.epsilon and params.epsilon disagree")
            self.n_index = (
                0.0 if params.always_reflects else refractive_index(params)
            )
        else:
            # hard disks only reflect; params is unused
            self.n_index = 0.0
        self.log = log
        self.on_segment = on_segment
        self.x_bounds = x_bounds
        self.max_events = max_events

    def run(self, x, y, vx, vy, t_max):
        """Returns (x, y, vx, vy, t_elapsed, exit_side)."""
        log = self.log
        bounds = self.x_bounds
        r = self.radius
        t = 0.0
        events = 0
        if log is not None:
            log.path.append((0.0, (x, y)))

        if self.mode == "barrier" and self.n_index > 0.0:
            inside = _find_containing_disk(self.field, x, y, r)
            if inside is not None:
                x, y, vx, vy, t, side = self._escape(x, y, vx, vy, inside,
                                                     t, t_max)
                if side is not None or t >= t_max:
                    return x, y, vx, vy, t, side

        while t < t_max:
            speed = math.hypot(vx, vy)
            ux, uy = vx / speed, vy / speed
            remaining = t_max - t
            s_budget = speed * remaining
            hit = _first_hit(self.field, x, y, ux, uy, r, s_budget)
            s_free = s_budget if hit is None else hit[0]

            if bounds is not None:
                bc = _bound_cross(x, ux, s_free, bounds[0], bounds[1])
                if bc is not None:
                    s_b, side = bc
                    t1 = t + s_b / speed
                    self._segment(t, t1, x, y, x + s_b * ux, y + s_b * uy,
                                  vx, vy)
                    return x + s_b * ux, y + s_b * uy, vx, vy, t1, side

            if hit is None:
                x1, y1 = x + s_budget * ux, y + s_budget * uy
                self._segment(t, t_max, x, y, x1, y1, vx, vy)
                return x1, y1, vx, vy, t_max, None

            events += 1
            if events > self.max_events:
                raise StuckParticleError(
                    f"{events} events before reaching t = {t_max}"
                )

            s_in, (cx, cy) = hit
            xe, ye = x + s_in * ux, y + s_in * uy
            te = t + s_in / speed
            self._segment(t, te, x, y, xe, ye, vx, vy)
            t = te
            rho = ((cx - xe) * uy - (cy - ye) * ux) / r
            rho = max(-1.0, min(1.0, rho))

            if self.mode == "hard_disk" or self.n_index == 0.0 or abs(rho) > self.n_index:
                ox, oy = xe - cx, ye - cy
                onorm = math.hypot(ox, oy)
                ox, oy = ox / onorm, oy / onorm
                d = 2.0 * (ox * vx + oy * vy)
                vx, vy = vx - d * ox, vy - d * oy
                kind = HARD_REFLECT if self.mode == "hard_disk" else TOTAL_REFLECT
                if log is not None:
                    log.events.append(TrajectoryEvent(t, (cx, cy), rho, kind))
                speed = math.hypot(vx, vy)
                x, y = xe + _PUSH * vx / speed, ye + _PUSH * vy / speed
                if log is not None:
                    log.path.append((t, (x, y)))
                continue

            # refracted traversal of the barrier
            n = self.n_index
            sinb1 = abs(rho)
            half = math.asin(min(1.0, sinb1 / n)) - math.asin(sinb1)
            if rho < 0.0:
                half = -half
            ch, sh = math.cos(half), math.sin(half)
            dx, dy = ch * ux - sh * uy, sh * ux + ch * uy  # interior direction
            chord = 2.0 * r * math.sqrt(max(0.0, 1.0 - (sinb1 / n) ** 2))
            v_int = n * speed
            transit = chord / v_int
            if log is not None:
                log.events.append(
                    TrajectoryEvent(t, (cx, cy), rho, BARRIER_TRAVERSE)
                )

            if transit > t_max - t:
                # budget expires mid-chord: stop inside with interior velocity
                s_part = (t_max - t) * v_int
                x1, y1 = xe + s_part * dx, ye + s_part * dy
                self._segment(t, t_max, xe, ye, x1, y1, v_int * dx, v_int * dy)
                return x1, y1, v_int * dx, v_int * dy, t_max, None

            xo, yo = xe + chord * dx, ye + chord * dy
            t1 = t + transit
            if bounds is not None:
                bc = _bound_cross(xe, dx, chord, bounds[0], bounds[1])
                if bc is not None:
                    s_b, side = bc
                    tb = t + s_b / v_int
                    self._segment(t, tb, xe, ye, xe + s_b * dx, ye + s_b * dy,
                                  v_int * dx, v_int * dy)
                    return (xe + s_b * dx, ye + s_b * dy,
                            v_int * dx, v_int * dy, tb, side)
            self._segment(t, t1, xe, ye, xo, yo, v_int * dx, v_int * dy)
            t = t1
            c2, s2 = math.cos(2.0 * half), math.sin(2.0 * half)
            vx, vy = c2 * vx - s2 * vy, s2 * vx + c2 * vy
            x, y = xo + _PUSH * vx / speed, yo + _PUSH * vy / speed
            if log is not None:
                log.path.append((t, (x, y)))

        return x, y, vx, vy, t, None

    def _escape(self, x, y, vx, vy, center, t, t_max):
        """Finish the interior chord when the run starts inside a disk."""
        r = self.radius
        cx, cy = center
        v_int = math.hypot(vx, vy)
        ux, uy = vx / v_int, vy / v_int
        wx, wy = x - cx, y - cy
        b = -(wx * ux + wy * uy)
        disc = b * b - (wx * wx + wy * wy - r * r)
        s_out = b + math.sqrt(max(0.0, disc))
        transit = s_out / v_int
        if transit > t_max - t:
            s_part = (t_max - t) * v_int
            x1, y1 = x + s_part * ux, y + s_part * uy
            self._segment(t, t_max, x, y, x1, y1, vx, vy)
            return x1, y1, vx, vy, t_max, None
        xo, yo = x + s_out * ux, y + s_out * uy
        t1 = t + transit
        if self.x_bounds is not None:
            bc = _bound_cross(x, ux, s_out, self.x_bounds[0], self.x_bounds[1])
            if bc is not None:
                s_b, side = bc
                tb = t + s_b / v_int
                self._segment(t, tb, x, y, x + s_b * ux, y + s_b * uy, vx, vy)
                return x + s_b * ux, y + s_b * uy, vx, vy, tb, side
        self._segment(t, t1, x, y, xo, yo, vx, vy)
        mx, my = (xo - cx) / r, (yo - cy) / r
        ex, ey = _exit_refract(ux, uy, mx, my, self.n_index)
        speed_out = v_int / self.n_index
        vx, vy = speed_out * ex, speed_out * ey
        xo, yo = xo + _PUSH * ex, yo + _PUSH * ey
        if self.log is not None:
            self.log.path.append((t1, (xo, yo)))
        return xo, yo, vx, vy, t1, None

    def _segment(self, t0, t1, x0, y0, x1, y1, vx, vy):
        if self.on_segment is not None:
            self.on_segment(t0, t1, x0, y0, x1, y1, vx, vy)
        if self.log is not None:
            self.log.path.append((t1, (x1, y1)))


def advance(state: ParticleState, field, params: BarrierParams, t: float,
            mode: str = "barrier", max_events: int = MAX_EVENTS
            ) -> tuple[ParticleState, TrajectoryLog]:
    """Flow the state for duration t through the field.

    Returns the state at time t and the ordered event/path log.  In
    barrier mode the particle normally starts outside every disk; a
    start inside a disk (as returned by a mid-chord stop) resumes the
    interior chord first.  More than ``max_events`` boundary events
    raise StuckParticleError.
    """
    if t < 0.0:
        raise ValueError("duration must be nonnegative")
    log = TrajectoryLog()
    eng = _Engine(field, params, mode, log=log, max_events=max_events)
    x, y, vx, vy, _, _ = eng.run(state.x[0], state.x[1],
                                 state.v[0], state.v[1], t)
    return ParticleState((x, y), (vx, vy)), log


def backward_flow(state: ParticleState, field, params: BarrierParams,
                  t: float, mode: str = "barrier"):
    """advance applied to (x, -v), with the returned velocity negated.

    Velocity reversal realizes the backward flow exactly because the
    dynamics is time reversible.
    """
    rev = ParticleState(state.x, -np.asarray(state.v, dtype=float))
    out, log = advance(rev, field, params, t, mode)
    return ParticleState(out.x, -out.v), log


def first_boundary_hit(state: ParticleState, field, params: BarrierParams,
                       slab_length: float, t_max: float,
                       mode: str = "hard_disk"):
    """Time and side of the first crossing of x1 = 0 or x1 = slab_length.

    Returns (tau, side) with side in {"left", "right"}, or (None,
    "none") when the trajectory stays inside for all of t_max.
    """
    if not (0.0 < state.x[0] < slab_length):
        raise ValueError("state must start strictly inside the slab")
    eng = _Engine(field, params, mode, x_bounds=(0.0, slab_length))
    _, _, _, _, t, side = eng.run(state.x[0], state.x[1],
                                  state.v[0], state.v[1], t_max)
    if side is None:
        return None, "none"
    return t, side


def classify_pathologies(log: TrajectoryLog, field, params: BarrierParams
                         ) -> PathologyReport:
    """Count overlap/recollision/interference events in a trajectory log.

    overlaps: unordered pairs of collided scatterers closer than 2 eps;
    recollisions: events re-entering a previously collided scatterer;
    interferences: scatterers whose disk is crossed by a path segment
    earlier than their first collision.
    """
    r = field.epsilon
    events = log.events
    q = len(events)

    first_seen: dict[tuple[float, float], float] = {}
    recollisions = 0
    for ev in events:
        if ev.center in first_seen:
            recollisions += 1
        else:
            first_seen[ev.center] = ev.time

    centers = list(first_seen)
    overlaps = 0
    lim2 = (2.0 * r) ** 2
    for i in range(len(centers)):
        xi, yi = centers[i]
        for j in range(i + 1, len(centers)):
            xj, yj = centers[j]
            if (xi - xj) ** 2 + (yi - yj) ** 2 < lim2:
                overlaps += 1

    interferences = 0
    thresh2 = (r * (1.0 - 1e-8)) ** 2
    path = log.path
    for (cx, cy), t_first in first_seen.items():
        for k in range(len(path) - 1):
            t0, (x0, y0) = path[k]
            t1, (x1, y1) = path[k + 1]
            if t0 >= t_first:
                break
            dx, dy = x1 - x0, y1 - y0
            seg2 = dx * dx + dy * dy
            if seg2 == 0.0:
                continue
            tproj = ((cx - x0) * dx + (cy - y0) * dy) / seg2
            tproj = 0.0 if tproj < 0.0 else (1.0 if tproj > 1.0 else tproj)
            ex = cx - (x0 + tproj * dx)
            ey = cy - (y0 + tproj * dy)
            if ex * ex + ey * ey < thresh2:
                interferences += 1
                break
    return PathologyReport(overlaps, recollisions, interferences, q)
