"""Built-in surrogate system-under-test models.

These stand in for the original Simulink benchmarks: small deterministic
fixed-step models (Euler integration) whose input/output shape matches the
benchmark family, with coefficients tuned only so that each shipped
requirement has both passing and failing inputs.

Surrogate dynamics, in brief:

* ``at`` (automatic transmission): first-order engine-speed lag driven by
  throttle minus brake drag, plus a wheel-speed coupling through a 4-level
  gear schedule on vehicle speed.  Outputs RPM, Speed, Gear.
* ``acc`` (adaptive cruise control): double-integrator lead car driven by the
  commanded lead acceleration, ego car with a saturated proportional gap
  controller.  Outputs the relative distance and both velocities.
* ``cc`` (chasing cars): lead car driven by throttle/brake, four followers
  with a saturated spacing policy.  Outputs all five positions plus the
  lead-to-last gap used by the shipped requirement.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .signals import InputSpec, SignalSpec, TestInput, sample_channels
from .stl import Formula, Trace, parse

try:  # optional: compiled trajectory kernels for the builtin plants
    from numba import njit as _njit
except ImportError:  # pragma: no cover - numba is an optional speedup
    def _njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

__all__ = ["Plant", "Requirement", "simulate", "builtin_plants",
           "monotone_toy_plant", "get_plant", "plant_names",
           "SimulationDiverged"]


class SimulationDiverged(RuntimeError):
    """Raised when a plant state goes non-finite during simulation."""

    def __init__(self, plant, t):
        super().__init__(f"plant {plant!r} diverged at t={t:.4f}")
        self.plant = plant
        self.t = t


@dataclass(frozen=True)
class Plant:
    """Immutable description of a simulatable system under test.

    ``step(state, u, dt)`` advances one fixed step; ``state`` is a tuple of
    floats and ``u`` a tuple of current input values in signal order.  The
    function must be deterministic.  ``outputs`` maps channel names to
    vectorized functions of the state trajectory (an ``(n_samples,
    state_dim)`` array), returning one value per sample.
    """

    name: str
    input_spec: InputSpec
    state_dim: int
    init_state: tuple[float, ...]
    step: Callable[[tuple, tuple, float], tuple]
    outputs: dict[str, Callable[[np.ndarray], np.ndarray]]
    dt: float = 0.01
    # optional whole-trajectory kernel: (input columns, dt, n_steps) -> states;
    # must compute exactly what repeated `step` calls would
    run: Callable[[list[np.ndarray], float, int], np.ndarray] | None = None

    def __post_init__(self):
        if len(self.init_state) != self.state_dim:
            raise ValueError("init_state length != state_dim")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass(frozen=True)
class Requirement:
    id: str
    formula: Formula
    description: str = ""


def simulate(plant: Plant, inp: TestInput, horizon: float | None = None) -> Trace:
    """Run the plant over ``[0, horizon]`` and return the sampled trace.

    The trace contains every input channel (concretized piecewise-constant
    signals) and every output channel, sampled at the plant's fixed step.
    """
    spec = plant.input_spec
    if inp.spec != spec and inp.spec.feature_names() != spec.feature_names():
        raise ValueError("input does not conform to the plant's input spec")
    if horizon is None:
        horizon = spec.horizon
    n_steps = int(round(horizon / plant.dt))
    times = np.arange(n_steps + 1) * plant.dt
    inputs = sample_channels(inp, spec, times)
    in_cols = [inputs[s.name] for s in spec.signals]

    dt = plant.dt
    if plant.run is not None:
        states = plant.run(in_cols, dt, n_steps)
    else:
        state = plant.init_state
        step = plant.step
        traj = [state]
        append = traj.append
        for u in zip(*(col[:n_steps].tolist() for col in in_cols)):
            state = step(state, u, dt)
            append(state)
        states = np.array(traj)
    if not np.all(np.isfinite(states)):
        bad = np.flatnonzero(~np.all(np.isfinite(states), axis=1))[0]
        raise SimulationDiverged(plant.name, float(times[bad]))

    channels = dict(inputs)
    for name, fn in plant.outputs.items():
        channels[name] = np.asarray(fn(states), dtype=float)
    return Trace(times=times, channels=channels)


# ---------------------------------------------------------------------------
# Automatic transmission surrogate

_AT_GEAR_SPEEDS = (12.0, 25.0, 40.0)   # upshift thresholds on vehicle speed
_AT_GEAR_RATIOS = (4.0, 2.5, 1.6, 1.0)


def _at_ratio(v: float) -> float:
    if v >= 40.0:
        return 1.0
    if v >= 25.0:
        return 1.6
    if v >= 12.0:
        return 2.5
    return 4.0


def _at_step(state, u, dt):
    rpm, v = state
    th, br = u
    ratio = _at_ratio(v)
    # first-order engine speed lag; brake drags the engine down mildly
    rpm_target = 800.0 + 42.0 * th - 1.2 * br + 3.0 * v * ratio
    rpm = rpm + dt * (rpm_target - rpm) * 0.5
    if rpm < 600.0:
        rpm = 600.0
    v = v + dt * (0.006 * th * ratio - 0.0015 * br - 0.02 * v - 0.05)
    if v < 0.0:
        v = 0.0
    return (rpm, v)


@_njit(cache=True)
def _at_kernel(th, br, dt, n):  # pragma: no cover - exercised via simulate
    out = np.empty((n + 1, 2))
    rpm = 800.0
    v = 0.0
    out[0, 0] = rpm
    out[0, 1] = v
    for i in range(n):
        if v >= 40.0:
            ratio = 1.0
        elif v >= 25.0:
            ratio = 1.6
        elif v >= 12.0:
            ratio = 2.5
        else:
            ratio = 4.0
        rpm_target = 800.0 + 42.0 * th[i] - 1.2 * br[i] + 3.0 * v * ratio
        rpm = rpm + dt * (rpm_target - rpm) * 0.5
        if rpm < 600.0:
            rpm = 600.0
        v = v + dt * (0.006 * th[i] * ratio - 0.0015 * br[i] - 0.02 * v - 0.05)
        if v < 0.0:
            v = 0.0
        out[i + 1, 0] = rpm
        out[i + 1, 1] = v
    return out


def _make_at() -> tuple[Plant, list[Requirement]]:
    spec = InputSpec(signals=(
        SignalSpec("Throttle", n_points=7, range_lo=0.0, range_hi=100.0, horizon=50.0),
        SignalSpec("Brake", n_points=3, range_lo=0.0, range_hi=325.0, horizon=50.0),
    ))
    plant = Plant(
        name="at",
        input_spec=spec,
        state_dim=2,
        init_state=(800.0, 0.0),
        step=_at_step,
        outputs={
            "RPM": lambda s: s[:, 0],
            "Speed": lambda s: s[:, 1],
            "Gear": lambda s: np.searchsorted(_AT_GEAR_SPEEDS, s[:, 1],
                                              side="right") + 1.0,
        },
        dt=0.01,
        run=lambda cols, dt, n: _at_kernel(cols[0], cols[1], dt, n),
    )
    reqs = [Requirement(
        id="at1",
        formula=parse("always[0,10] (RPM < 4750)"),
        description="Engine speed stays below 4750 RPM for the first 10 seconds.",
    )]
    return plant, reqs


# ---------------------------------------------------------------------------
# Adaptive cruise control surrogate

def _acc_step(state, u, dt):
    x_lead, v_lead, x_ego, v_ego = state
    a_lead = u[0]
    if v_lead <= 0.0 and a_lead < 0.0:
        a_lead = 0.0
    d_rel = x_lead - x_ego
    # saturated proportional gap controller targeting an 80 m headway
    a_ego = 0.3 * (d_rel - 80.0) + 0.8 * (v_lead - v_ego)
    if a_ego > 2.0:
        a_ego = 2.0
    elif a_ego < -3.0:
        a_ego = -3.0
    if v_ego <= 0.0 and a_ego < 0.0:
        a_ego = 0.0
    x_lead = x_lead + dt * v_lead
    v_lead = v_lead + dt * a_lead
    if v_lead < 0.0:
        v_lead = 0.0
    x_ego = x_ego + dt * v_ego
    v_ego = v_ego + dt * a_ego
    if v_ego < 0.0:
        v_ego = 0.0
    return (x_lead, v_lead, x_ego, v_ego)


@_njit(cache=True)
def _acc_kernel(al, dt, n):  # pragma: no cover - exercised via simulate
    out = np.empty((n + 1, 4))
    x_lead, v_lead, x_ego, v_ego = 100.0, 25.0, 0.0, 20.0
    out[0, 0] = x_lead
    out[0, 1] = v_lead
    out[0, 2] = x_ego
    out[0, 3] = v_ego
    for i in range(n):
        a_lead = al[i]
        if v_lead <= 0.0 and a_lead < 0.0:
            a_lead = 0.0
        d_rel = x_lead - x_ego
        a_ego = 0.3 * (d_rel - 80.0) + 0.8 * (v_lead - v_ego)
        if a_ego > 2.0:
            a_ego = 2.0
        elif a_ego < -3.0:
            a_ego = -3.0
        if v_ego <= 0.0 and a_ego < 0.0:
            a_ego = 0.0
        x_lead = x_lead + dt * v_lead
        v_lead = v_lead + dt * a_lead
        if v_lead < 0.0:
            v_lead = 0.0
        x_ego = x_ego + dt * v_ego
        v_ego = v_ego + dt * a_ego
        if v_ego < 0.0:
            v_ego = 0.0
        out[i + 1, 0] = x_lead
        out[i + 1, 1] = v_lead
        out[i + 1, 2] = x_ego
        out[i + 1, 3] = v_ego
    return out


def _make_acc() -> tuple[Plant, list[Requirement]]:
    spec = InputSpec(signals=(
        SignalSpec("LeadAccel", n_points=5, range_lo=-3.0, range_hi=3.0, horizon=50.0),
    ))
    plant = Plant(
        name="acc",
        input_spec=spec,
        state_dim=4,
        init_state=(100.0, 25.0, 0.0, 20.0),
        step=_acc_step,
        outputs={
            "d_rel": lambda s: s[:, 0] - s[:, 2],
            "v_lead": lambda s: s[:, 1],
            "v_ego": lambda s: s[:, 3],
        },
        dt=0.01,
        run=lambda cols, dt, n: _acc_kernel(cols[0], dt, n),
    )
    reqs = [Requirement(
        id="acc1",
        formula=parse("always[0,50] (d_rel >= 50)"),
        description="Relative distance to the lead car never drops below 50 m.",
    )]
    return plant, reqs


# ---------------------------------------------------------------------------
# Chasing cars surrogate

def _cc_step(state, u, dt):
    p1, p2, p3, p4, p5, v1, v2, v3, v4, v5 = state
    th, br = u
    ps = (p1, p2, p3, p4, p5)
    vs = (v1, v2, v3, v4, v5)
    a1 = 1.5 * th - 1.0 * br - 0.02 * v1
    if v1 <= 0.0 and a1 < 0.0:
        a1 = 0.0
    acc = [a1]
    for i in range(1, 5):
        gap = ps[i - 1] - ps[i]
        ai = 0.5 * (gap - 20.0) + 0.8 * (vs[i - 1] - vs[i])
        if ai > 1.0:
            ai = 1.0
        elif ai < -1.0:
            ai = -1.0
        if vs[i] <= 0.0 and ai < 0.0:
            ai = 0.0
        acc.append(ai)
    new_p = tuple(ps[i] + dt * vs[i] for i in range(5))
    new_v = tuple(max(vs[i] + dt * acc[i], 0.0) for i in range(5))
    return new_p + new_v


@_njit(cache=True)
def _cc_kernel(th, br, dt, n):  # pragma: no cover - exercised via simulate
    out = np.empty((n + 1, 10))
    p = np.empty(5)
    v = np.empty(5)
    for i in range(5):
        p[i] = -20.0 * i
        v[i] = 10.0
        out[0, i] = p[i]
        out[0, 5 + i] = v[i]
    acc = np.empty(5)
    for k in range(n):
        a1 = 1.5 * th[k] - 1.0 * br[k] - 0.02 * v[0]
        if v[0] <= 0.0 and a1 < 0.0:
            a1 = 0.0
        acc[0] = a1
        for i in range(1, 5):
            gap = p[i - 1] - p[i]
            ai = 0.5 * (gap - 20.0) + 0.8 * (v[i - 1] - v[i])
            if ai > 1.0:
                ai = 1.0
            elif ai < -1.0:
                ai = -1.0
            if v[i] <= 0.0 and ai < 0.0:
                ai = 0.0
            acc[i] = ai
        for i in range(5):
            p[i] = p[i] + dt * v[i]
            v[i] = max(v[i] + dt * acc[i], 0.0)
            out[k + 1, i] = p[i]
            out[k + 1, 5 + i] = v[i]
    return out


def _make_cc() -> tuple[Plant, list[Requirement]]:
    spec = InputSpec(signals=(
        SignalSpec("Throttle", n_points=5, range_lo=0.0, range_hi=1.0, horizon=100.0),
        SignalSpec("Brake", n_points=5, range_lo=0.0, range_hi=1.0, horizon=100.0),
    ))
    init = tuple(-20.0 * i for i in range(5)) + (10.0,) * 5
    outputs = {f"pos{i + 1}": (lambda s, i=i: s[:, i]) for i in range(5)}
    outputs["gap15"] = lambda s: s[:, 0] - s[:, 4]
    plant = Plant(
        name="cc",
        input_spec=spec,
        state_dim=10,
        init_state=init,
        step=_cc_step,
        outputs=outputs,
        dt=0.05,
        run=lambda cols, dt, n: _cc_kernel(cols[0], cols[1], dt, n),
    )
    # adapted from the chasing-cars benchmark family; toolkit configuration,
    # not benchmark ground truth
    reqs = [Requirement(
        id="cc1",
        formula=parse("always[0,100] (gap15 <= 120)"),
        description="Lead-to-last spacing stays bounded over the run.",
    )]
    return plant, reqs


# ---------------------------------------------------------------------------
# Monotone toy plant (ground-truth oracle for metric tests)

def _toy_step(state, u, dt):
    # y integrates u/horizon, so y(horizon) equals the mean of the control
    # points exactly (equal-width segments, whole samples per segment)
    return (state[0] + dt * u[0] / 10.0,)


def monotone_toy_plant(n_points: int = 4) -> Plant:
    """1-input plant whose output at the horizon is the mean control point.

    ``y(t)`` ramps monotonically from 0 to ``mean(control points)``; for a
    requirement ``always[0,10] (y < c)`` the pass region is exactly
    ``mean(control points) <= c``, so necessity/sufficiency ground truth is
    available in closed form.
    """
    if 100 % n_points:
        raise ValueError("n_points must divide the 100 samples evenly")
    spec = InputSpec(signals=(
        SignalSpec("u", n_points=n_points, range_lo=0.0, range_hi=100.0, horizon=10.0),
    ))
    return Plant(
        name="toy",
        input_spec=spec,
        state_dim=1,
        init_state=(0.0,),
        step=_toy_step,
        outputs={"y": lambda s: s[:, 0]},
        dt=0.1,
    )


# ---------------------------------------------------------------------------
# Registry

def builtin_plants() -> list[tuple[Plant, list[Requirement]]]:
    """All shipped surrogate plants with their requirements."""
    return [_make_at(), _make_acc(), _make_cc()]


def plant_names() -> list[str]:
    return [p.name for p, _ in builtin_plants()]


def get_plant(name: str) -> tuple[Plant, list[Requirement]]:
    for plant, reqs in builtin_plants():
        if plant.name == name:
            return plant, reqs
    if name == "toy":
        plant = monotone_toy_plant()
        req = Requirement(id="toy1", formula=parse("always[0,10] (y < 50)"),
                          description="Mean control point stays below 50.")
        return plant, [req]
    raise KeyError(f"unknown plant {name!r}; available: {plant_names() + ['toy']}")
