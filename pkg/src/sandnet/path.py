"""Raster trajectory planning and closed-loop velocity-controlled tracking.

The plant is a first-order kinematic integrator: it moves with whatever
velocity command was delivered most recently (zero-order hold). The remote
controller tracks a time-parameterized reference point that advances along
the planned polyline with a trapezoidal speed profile (braking to a stop at
every corner), and commands

    v = feedforward + gain * (reference - pose)

saturated at ``max_speed`` and rate-limited by ``max_accel``. With a
transparent channel this tracks the plan to machine precision; with delay,
stale commands overshoot corners and the catch-up phase raises tool speeds,
which is exactly the degradation chain the downstream quality metrics
measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .netchan import Channel, NetworkConditions, TimedMessage

__all__ = [
    "Pose",
    "PlannedTrajectory",
    "TrajectoryLog",
    "ControllerParams",
    "plan_raster",
    "simulate_follow",
    "write_log_csv",
    "read_log_csv",
]

LOG_HEADER = "t,x,y,z,roll,pitch,yaw"

# first-order time constant of the Z compliance response: the tool dips in
# sustained aggressive maneuvers, not on single-tick accelerations
_Z_LAG_S = 0.1

# polling slack absorbing 1-ulp stragglers when a delivery lands exactly on
# a control tick; keeps the effective delay an exact tick count
_POLL_SLACK_S = 1e-9


@dataclass
class Pose:
    """Tool pose sample: time in s, position in mm, orientation in rad."""

    t: float
    x: float
    y: float
    z: float
    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0


@dataclass
class PlannedTrajectory:
    waypoints: list[tuple[float, float]]
    z_ref: float = 0.0
    nominal_speed: float = 100.0
    tool_radius: float = 25.0

    def validate(self) -> None:
        if len(self.waypoints) < 2:
            raise ValueError("plan needs at least 2 waypoints")
        for a, b in zip(self.waypoints, self.waypoints[1:]):
            if a == b:
                raise ValueError("consecutive waypoints must be distinct")
        if not self.nominal_speed > 0:
            raise ValueError("nominal_speed must be > 0")
        if not self.tool_radius > 0:
            raise ValueError("tool_radius must be > 0")

    def polyline(self) -> np.ndarray:
        return np.asarray(self.waypoints, dtype=float)

    def path_length(self) -> float:
        pts = self.polyline()
        return float(np.sum(np.hypot(*(np.diff(pts, axis=0).T))))


@dataclass
class TrajectoryLog:
    """Recorded tool stream: `samples` spaced ~`resolution` mm along the path.

    `ticks` is the time-uniform internal log (one pose per control tick),
    kept for velocity statistics; spatial resampling would distort speeds.
    """

    samples: list[Pose]
    resolution: float = 0.5
    ticks: list[Pose] = field(default_factory=list)
    complete: bool = True

    def time_uniform(self) -> list[Pose]:
        return self.ticks if self.ticks else self.samples

    def xy(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.samples], dtype=float)


@dataclass
class ControllerParams:
    control_rate: float = 100.0  # Hz
    gain: float = 5.0  # 1/s
    max_speed: float = 600.0  # mm/s
    max_accel: float = 500.0  # mm/s^2
    waypoint_capture_radius: float | None = None  # default tool_radius/4
    z_compliance: float = 0.006  # mm per (mm/s^2)
    orientation_noise_std: float = 0.02  # rad
    command_payload_bytes: int = 0

    def validate(self) -> None:
        for name in ("control_rate", "gain", "max_speed", "max_accel"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.waypoint_capture_radius is not None and not self.waypoint_capture_radius > 0:
            raise ValueError("waypoint_capture_radius must be > 0")
        if self.z_compliance < 0:
            raise ValueError("z_compliance must be >= 0")
        if self.orientation_noise_std < 0:
            raise ValueError("orientation_noise_std must be >= 0")
        if self.command_payload_bytes < 0:
            raise ValueError("command_payload_bytes must be >= 0")


def plan_raster(
    width: float,
    height: float,
    tool_radius: float,
    overlap: float,
    z_ref: float = 0.0,
    nominal_speed: float = 100.0,
) -> PlannedTrajectory:
    """Boustrophedon coverage of a width x height rectangle.

    Lanes run parallel to the long axis between insets of one tool radius,
    at most 2*tool_radius*(1-overlap) apart (spread evenly, so an inexact
    fit tightens the spacing instead of leaving a gap). Lane ends reach the
    surface edge, so the disc overhangs there like a real sander.
    """
    if not 0.0 <= overlap < 1.0:
        raise ValueError(f"overlap must be in [0,1), got {overlap}")
    if not tool_radius > 0:
        raise ValueError("tool_radius must be > 0")
    if width <= 2 * tool_radius or height <= 2 * tool_radius:
        raise ValueError(
            f"surface {width}x{height} mm too small for tool radius {tool_radius} mm"
        )

    # lanes along the longer side; positions across the shorter side
    transpose = height > width
    long_dim, short_dim = (height, width) if transpose else (width, height)

    # nominal spacing from tool size and overlap; lanes are then spread
    # evenly between the insets (actual spacing <= nominal) so an inexact
    # fit never produces a double-coverage ridge at the far edge
    spacing = 2.0 * tool_radius * (1.0 - overlap)
    inner = short_dim - 2.0 * tool_radius
    n_lanes = 1 + math.ceil(inner / spacing - 1e-12)
    actual = inner / (n_lanes - 1)
    offsets = [tool_radius + i * actual for i in range(n_lanes)]

    waypoints: list[tuple[float, float]] = []
    for i, off in enumerate(offsets):
        ends = (0.0, long_dim) if i % 2 == 0 else (long_dim, 0.0)
        for e in ends:
            waypoints.append((off, e) if transpose else (e, off))

    return PlannedTrajectory(
        waypoints=waypoints,
        z_ref=z_ref,
        nominal_speed=nominal_speed,
        tool_radius=tool_radius,
    )


class _ReferenceProfile:
    """Arc-length reference along the polyline with trapezoidal speed.

    The reference ramps at half the controller's acceleration limit (leaving
    the other half for feedback corrections), brakes into every direction
    change and lands exactly on the corner, so the reference point itself
    never cuts corners.
    """

    def __init__(self, plan: PlannedTrajectory, accel: float):
        pts = plan.polyline()
        seg = np.diff(pts, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        self.pts = pts
        self.seg_dir = seg / seg_len[:, None]
        self.cum = np.concatenate([[0.0], np.cumsum(seg_len)])
        self.total = float(self.cum[-1])
        self.v_max = plan.nominal_speed
        self.accel = accel
        # stops: every vertex where the direction changes, plus the end
        stops = []
        for i in range(1, len(pts) - 1):
            a, b = self.seg_dir[i - 1], self.seg_dir[i]
            turn = abs(float(a[0] * b[1] - a[1] * b[0]))
            if turn > 1e-12 or float(np.dot(a, b)) < 0:
                stops.append(float(self.cum[i]))
        stops.append(self.total)
        self.stops = np.asarray(stops)
        self.s = 0.0
        self.speed = 0.0

    def step(self, dt: float) -> float:
        """Advance one tick; returns the new arc-length position."""
        if self.s >= self.total:
            self.speed = 0.0
            return self.s
        idx = int(np.searchsorted(self.stops, self.s + 1e-12, side="left"))
        idx = min(idx, len(self.stops) - 1)
        stop_s = float(self.stops[idx])
        d_next = max(stop_s - self.s, 0.0)
        v = min(
            self.v_max,
            self.speed + self.accel * dt,
            math.sqrt(2.0 * self.accel * d_next),
        )
        s_new = self.s + v * dt
        if s_new >= stop_s - 1e-12:
            s_new = stop_s
            v = 0.0  # arrived at the corner; re-accelerate next tick
        self.s = s_new
        self.speed = v
        return self.s

    def point_at(self, s: float) -> np.ndarray:
        s = min(max(s, 0.0), self.total)
        i = int(np.searchsorted(self.cum, s, side="right")) - 1
        i = min(max(i, 0), len(self.pts) - 2)
        return self.pts[i] + self.seg_dir[i] * (s - self.cum[i])


def simulate_follow(
    plan: PlannedTrajectory,
    ctrl: ControllerParams,
    cond: NetworkConditions,
    duration_limit: float = 300.0,
    resolution: float = 0.5,
    symmetric_delay: bool = False,
) -> TrajectoryLog:
    """Run the closed loop and return the recorded tool-pose log.

    The controller reads the plant pose each tick (instantaneously, unless
    ``symmetric_delay`` routes the sensing path through a second channel
    with the same conditions) and sends the velocity command through the
    emulated channel. Stored samples are placed by arc length, one every
    ``resolution`` mm of actual tool travel, interpolated inside ticks.

    If the plan is not finished within ``duration_limit`` simulated seconds
    the log is returned with ``complete=False``.
    """
    plan.validate()
    ctrl.validate()
    cond.validate()

    dt = 1.0 / ctrl.control_rate
    capture = (
        ctrl.waypoint_capture_radius
        if ctrl.waypoint_capture_radius is not None
        else plan.tool_radius / 4.0
    )
    ref = _ReferenceProfile(plan, accel=ctrl.max_accel / 2.0)

    chan = Channel(cond)
    sense_chan = None
    if symmetric_delay:
        sense_chan = Channel(
            NetworkConditions(
                cond.delay_mean_ms,
                cond.jitter_ms,
                cond.loss_rate,
                cond.bandwidth_kbps,
                seed=int(cond.seed) ^ 0x5EADBEEF,
            )
        )
    rng_orient = np.random.default_rng([int(cond.seed), 0x0A1E])

    start = plan.polyline()[0]
    goal = plan.polyline()[-1]
    pos = start.copy()
    vel = np.zeros(2)
    prev_vel = np.zeros(2)
    prev_cmd = np.zeros(2)
    sensed = pos.copy()
    a_smooth = 0.0

    # reference arc-length state, stepped with the same dt as the loop
    s_ref = 0.0
    r_cur = ref.point_at(0.0)

    ticks: list[Pose] = []
    samples: list[Pose] = []
    carry = 0.0  # distance since last stored sample

    def make_pose(t: float, p: np.ndarray, z: float, heading: float) -> Pose:
        roll = float(rng_orient.normal(0.0, ctrl.orientation_noise_std)) if ctrl.orientation_noise_std > 0 else 0.0
        pitch = float(rng_orient.normal(0.0, ctrl.orientation_noise_std)) if ctrl.orientation_noise_std > 0 else 0.0
        return Pose(t=t, x=float(p[0]), y=float(p[1]), z=z, roll=roll, pitch=pitch, yaw=heading)

    n_ticks = int(math.ceil(duration_limit / dt))
    complete = False

    zero_pose = Pose(0.0, float(pos[0]), float(pos[1]), plan.z_ref)
    ticks.append(zero_pose)
    samples.append(zero_pose)

    for k in range(n_ticks):
        t = k * dt

        # --- controller side -------------------------------------------
        if sense_chan is not None:
            sense_chan.send(TimedMessage(t, ctrl.command_payload_bytes, pos.copy()))
            for m in sense_chan.poll(t + _POLL_SLACK_S):
                sensed = m.payload
        else:
            sensed = pos

        r_next_s = ref.step(dt)
        r_next = ref.point_at(r_next_s)

        feedforward = (r_next - r_cur) / dt
        cmd = feedforward + ctrl.gain * (r_cur - sensed)

        speed = float(np.hypot(cmd[0], cmd[1]))
        if speed > ctrl.max_speed:
            cmd = cmd * (ctrl.max_speed / speed)
        dv = cmd - prev_cmd
        dv_norm = float(np.hypot(dv[0], dv[1]))
        max_dv = ctrl.max_accel * dt
        if dv_norm > max_dv:
            cmd = prev_cmd + dv * (max_dv / dv_norm)
        prev_cmd = cmd.copy()

        chan.send(TimedMessage(t, ctrl.command_payload_bytes, cmd))

        # --- plant side --------------------------------------------------
        for m in chan.poll(t + _POLL_SLACK_S):
            vel = m.payload  # zero-order hold on the newest delivered command

        step = vel * dt
        step_len = float(np.hypot(step[0], step[1]))
        new_pos = pos + step

        a_lat = float(np.hypot(*(vel - prev_vel))) / dt
        a_smooth += (dt / _Z_LAG_S) * (a_lat - a_smooth)
        z = plan.z_ref + ctrl.z_compliance * a_smooth
        heading = math.atan2(vel[1], vel[0]) if step_len > 0 else (ticks[-1].yaw if ticks else 0.0)

        t_next = (k + 1) * dt
        ticks.append(make_pose(t_next, new_pos, z, heading))

        # spatial sampling: march along the tick segment, one sample per
        # `resolution` mm of travel, positions and times interpolated
        if step_len > 0:
            dist_into = resolution - carry
            emitted = 0
            while dist_into <= step_len + 1e-15:
                frac = dist_into / step_len
                p = pos + step * frac
                ts = t + dt * frac
                samples.append(make_pose(ts, p, z, heading))
                emitted += 1
                dist_into += resolution
            carry = max(0.0, carry + step_len - emitted * resolution)

        pos = new_pos
        prev_vel = vel.copy()

        # --- termination -------------------------------------------------
        if s_ref >= ref.total and float(np.hypot(*(pos - goal))) <= capture:
            complete = True
            break
        s_ref = r_next_s
        r_cur = r_next

    return TrajectoryLog(samples=samples, resolution=resolution, ticks=ticks, complete=complete)


def write_log_csv(log: TrajectoryLog, path) -> None:
    """Plain-text twin of the recorded stream: `t,x,y,z,roll,pitch,yaw`."""
    lines = [LOG_HEADER]
    for p in log.samples:
        vals = (p.t, p.x, p.y, p.z, p.roll, p.pitch, p.yaw)
        lines.append(",".join(repr(float(v)) for v in vals))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_log_csv(path) -> TrajectoryLog:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != LOG_HEADER:
            raise ValueError(f"unexpected header {header!r}")
        samples = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            t, x, y, z, roll, pitch, yaw = (float(v) for v in line.split(","))
            samples.append(Pose(t, x, y, z, roll, pitch, yaw))
    return TrajectoryLog(samples=samples)
