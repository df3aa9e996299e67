"""Concrete problem instances for the windowed fixed-point engine.

Two families are provided: finite-dimensional ODEs x' = f(t, y, x) with
analytic growth/stability bounds derived from declared Lipschitz
constants, and a 1-D periodic quasilinear transport equation
du/dt = G(x, v) du/dx + g(x, u) solved by a semi-Lagrangian step operator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, NamedTuple

import numpy as np

from .core import (
    AprioriBound,
    NonFiniteState,
    NormedPairElement,
    StabilityBounds,
    TrajectorySegment,
    WindowFailure,
)
from .grids import (
    GridFunction1D,
    interp_values,
    lip_norm_values,
    sup_norm_values,
)


class CharacteristicBlowup(WindowFailure):
    """A traced characteristic foot moved more than half the domain in one substep."""


class InstanceBounds(NamedTuple):
    apriori: AprioriBound
    stability: StabilityBounds


def make_element(instance: "ProblemInstance", state) -> NormedPairElement:
    """Wrap a raw state with the instance's norm pair."""
    return NormedPairElement(state, instance.weak_norm(state), instance.strong_norm(state))


@dataclass(frozen=True)
class ProblemInstance:
    """A frozen-step operator together with its norm pair.

    step(y_traj, x0, window, substeps, t_start) solves the frozen problem
    with input trajectory y_traj and must reuse the x0 element as the
    first state of its output. bounds is None for instances without
    analytic growth/stability estimates; the engine then adapts windows
    empirically.
    """

    name: str
    step: Callable[..., TrajectorySegment]
    weak_norm: Callable[[Any], float]
    strong_norm: Callable[[Any], float]
    weak_dist: Callable[[Any, Any], float]
    bounds: InstanceBounds | None = None
    embed_const: float = 1.0


# -- ODE instances ------------------------------------------------------------

@dataclass(frozen=True)
class OdeSpec:
    """Right-hand side f(t, y, x) with declared Lipschitz data.

    lipschitz_y / lipschitz_x bound the sensitivity of f in the frozen
    and the solved argument; f00 bounds |f(t, 0, 0)|. They may be None
    when no global constants exist (the analytic bounds are then
    unavailable and the engine must run empirically).
    """

    dimension: int
    f: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    lipschitz_y: float | None = None
    lipschitz_x: float | None = None
    f00: float = 0.0

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        for name in ("lipschitz_y", "lipschitz_x", "f00"):
            v = getattr(self, name)
            if v is not None and not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")


def _linf(v: np.ndarray) -> float:
    return float(np.max(np.abs(v)))


def _as_state(x0) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x0, dtype=np.float64))
    return arr


def _element_of(x0, norm_weak, norm_strong) -> NormedPairElement:
    if isinstance(x0, NormedPairElement):
        return x0
    return NormedPairElement(x0, norm_weak(x0), norm_strong(x0))


def _same_grid(have: np.ndarray, want: np.ndarray, window: float) -> bool:
    return len(have) == len(want) and bool(
        np.all(np.abs(have - want) <= 1e-9 * max(window, 1e-300))
    )


def _stage_inputs(y_traj: TrajectorySegment, times: np.ndarray):
    """Frozen-input samples at substep endpoints and midpoints.

    Uses the trajectory's own grid when it matches the requested times and
    falls back to linear interpolation in time otherwise (so reference
    inputs may be sampled more densely than the solve grid).
    """
    y_times = y_traj.times
    raw = [s.state for s in y_traj.states]
    if len(y_times) == len(times) and np.allclose(y_times, times, rtol=1e-12, atol=1e-14):
        ends = raw
        mids = [0.5 * (a + b) for a, b in zip(raw[:-1], raw[1:])]
        return ends, mids

    stacked = np.stack([np.atleast_1d(np.asarray(s, dtype=np.float64)) for s in raw])

    def lerp(t: float) -> np.ndarray:
        t = min(max(t, y_times[0]), y_times[-1])
        j = int(np.searchsorted(y_times, t, side="right") - 1)
        j = min(max(j, 0), len(y_times) - 2)
        w = (t - y_times[j]) / (y_times[j + 1] - y_times[j])
        return (1.0 - w) * stacked[j] + w * stacked[j + 1]

    ends = [lerp(float(t)) for t in times]
    mids = [lerp(0.5 * (float(a) + float(b))) for a, b in zip(times[:-1], times[1:])]
    return ends, mids


def ode_step(spec: OdeSpec, y_traj: TrajectorySegment, x0, window: float,
             substeps: int, t_start: float = 0.0) -> TrajectorySegment:
    """Classic 4-stage one-step solve of x' = f(t, y(t), x) with frozen y.

    y is evaluated by linear interpolation in time between its samples.
    Raises NonFiniteState as soon as a state component overflows.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if y_traj.t_start > t_start + 1e-12 or y_traj.t_end < t_start + window - 1e-12:
        raise ValueError("frozen input trajectory does not cover the window")
    x0_elem = _element_of(x0, _linf, _linf)
    times = np.linspace(t_start, t_start + window, substeps + 1)
    if _same_grid(y_traj.times, times, window):
        times = y_traj.times  # reuse the exact grid built by the engine
    y_ends, y_mids = _stage_inputs(y_traj, times)

    x = _as_state(x0_elem.state).copy()
    states = [x0_elem]
    f = spec.f
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(substeps):
            t_k = float(times[k])
            h = float(times[k + 1] - times[k])
            y0, ym, y1 = y_ends[k], y_mids[k], y_ends[k + 1]
            k1 = f(t_k, y0, x)
            k2 = f(t_k + 0.5 * h, ym, x + 0.5 * h * k1)
            k3 = f(t_k + 0.5 * h, ym, x + 0.5 * h * k2)
            k4 = f(t_k + h, y1, x + h * k3)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(x)):
                raise NonFiniteState(f"state overflowed at t={t_k + h}")
            states.append(NormedPairElement(x, _linf(x), _linf(x)))
    return TrajectorySegment(times=times, states=tuple(states))


def ode_bounds(spec: OdeSpec) -> InstanceBounds:
    """Growth and stability bounds from the declared Lipschitz data.

    A(t, r, M) = (r + t (L1 M + f00)) exp(L2 t) bounds the strong norm of
    the frozen solve; B(t, R) = t L2 R and C(t, R) = t L1 R bound the
    weak-norm sensitivities (integrated over a window of length t).
    """
    if spec.lipschitz_y is None or spec.lipschitz_x is None:
        raise ValueError("spec declares no Lipschitz constants")
    l1, l2, f00 = spec.lipschitz_y, spec.lipschitz_x, spec.f00

    def apriori(t: float, r: float, m: float) -> float:
        return (r + t * (l1 * m + f00)) * np.exp(l2 * t)

    return InstanceBounds(
        apriori=AprioriBound(eval=apriori),
        stability=StabilityBounds(
            b=lambda t, r: t * l2 * r,
            c=lambda t, r: t * l1 * r,
        ),
    )


def make_ode_instance(name: str, spec: OdeSpec, with_bounds: bool = True) -> ProblemInstance:
    bounds = ode_bounds(spec) if with_bounds and spec.lipschitz_y is not None else None

    def step(y_traj, x0, window, substeps, t_start=0.0):
        return ode_step(spec, y_traj, x0, window, substeps, t_start)

    return ProblemInstance(
        name=name,
        step=step,
        weak_norm=_linf,
        strong_norm=_linf,
        weak_dist=lambda a, b: _linf(np.asarray(a) - np.asarray(b)),
        bounds=bounds,
    )


def make_decay_instance(rate: float = 1.0) -> ProblemInstance:
    """x' = -rate * x, frozen argument unused. Analytic bounds included."""
    if not rate > 0:
        raise ValueError("rate must be positive")
    spec = OdeSpec(
        dimension=1,
        f=lambda t, y, x: -rate * x,
        lipschitz_y=0.0,
        lipschitz_x=rate,
        f00=0.0,
    )
    return make_ode_instance("ode.decay", spec)


def make_riccati_instance() -> ProblemInstance:
    """x' = x^2 via the splitting f(y, x) = y * x.

    The product has no global Lipschitz constants, so no analytic bounds
    ship with this instance; the engine adapts windows empirically.
    """
    spec = OdeSpec(dimension=1, f=lambda t, y, x: y * x)
    return make_ode_instance("ode.riccati", spec, with_bounds=False)


def make_linear_ode_instance(a: float, b: float, forcing: float = 0.0,
                             dimension: int = 1) -> ProblemInstance:
    """x' = a y + b x + forcing, with genuine coupling to the frozen slot."""
    c = np.full(dimension, forcing, dtype=np.float64)
    spec = OdeSpec(
        dimension=dimension,
        f=lambda t, y, x: a * y + b * x + c,
        lipschitz_y=abs(a),
        lipschitz_x=abs(b),
        f00=abs(forcing),
    )
    return make_ode_instance("ode.linear", spec)


# -- transport instances -------------------------------------------------------

@dataclass(frozen=True)
class TransportSpec:
    """Coefficients of du/dt = G(x, v) du/dx + g(x, u) on a periodic grid."""

    n: int
    length: float
    G: Callable[[np.ndarray, np.ndarray], np.ndarray]
    g: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    interpolation: str = "cubic"

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("grid needs at least 2 points")
        if not self.length > 0:
            raise ValueError("domain length must be positive")


def transport_step(spec: TransportSpec, v_traj: TrajectorySegment, u0,
                   window: float, substeps: int,
                   t_start: float = 0.0) -> TrajectorySegment:
    """Semi-Lagrangian solve of du/dt = G(x, v(t,x)) du/dx + g(x, u).

    Per substep and per node: trace the characteristic one substep
    backward (dX/ds = -G, 2-stage midpoint), interpolate the previous
    values at the foot, then advance du/ds = g(X(s), u) along the
    characteristic with a 2-stage step. The frozen field v is interpolated
    linearly in time between its samples and spatially on its grid.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    u0_elem = _element_of(
        u0,
        lambda gf: sup_norm_values(gf.values),
        lambda gf: lip_norm_values(gf.values, gf.length),
    )
    grid0: GridFunction1D = u0_elem.state
    if grid0.n != spec.n or grid0.length != spec.length:
        raise ValueError("initial grid does not match the transport spec")

    times = np.linspace(t_start, t_start + window, substeps + 1)
    if _same_grid(v_traj.times, times, window):
        times = v_traj.times
    v_ends, v_mids = _transport_inputs(v_traj, times)
    with np.errstate(over="ignore", invalid="ignore"):
        return _transport_sweep(spec, times, substeps, grid0.nodes(),
                                v_ends, v_mids, grid0.values, u0_elem)


def _transport_sweep(spec, times, substeps, nodes, v_ends, v_mids, u, u0_elem):
    length = spec.length
    scheme = spec.interpolation
    states = [u0_elem]
    for k in range(substeps):
        h = float(times[k + 1] - times[k])
        v_end = v_ends[k + 1]
        v_mid = v_mids[k]
        # backward trace over [t_k, t_k+1]: dX/ds = -G, 2-stage midpoint
        g_end = spec.G(nodes, v_end)
        x_half = nodes + 0.5 * h * g_end
        v_at_half = interp_values(v_mid, length, x_half, scheme)
        g_half = spec.G(np.mod(x_half, length), v_at_half)
        foot = nodes + h * g_half
        if np.max(np.abs(foot - nodes)) > 0.5 * length:
            raise CharacteristicBlowup(
                "characteristic foot moved more than half the domain in one substep")
        u_foot = interp_values(u, length, foot, scheme)
        if spec.g is not None:
            foot_wrapped = np.mod(foot, length)
            u_star = u_foot + 0.5 * h * spec.g(foot_wrapped, u_foot)
            u_next = u_foot + h * spec.g(np.mod(x_half, length), u_star)
        else:
            u_next = u_foot
        if not np.all(np.isfinite(u_next)):
            raise NonFiniteState(f"transport state overflowed at t={times[k + 1]}")
        u = np.asarray(u_next, dtype=np.float64)
        gf = GridFunction1D(n=spec.n, length=length, values=u)
        states.append(NormedPairElement(gf, sup_norm_values(u),
                                        lip_norm_values(u, length)))
    return TrajectorySegment(times=times, states=tuple(states))


def _transport_inputs(v_traj: TrajectorySegment, times: np.ndarray):
    """Frozen-field value arrays at substep endpoints and midpoints."""
    v_times = v_traj.times
    raw = [s.state.values for s in v_traj.states]
    if len(v_times) == len(times) and np.allclose(v_times, times, rtol=1e-12, atol=1e-14):
        ends = raw
        mids = [0.5 * (a + b) for a, b in zip(raw[:-1], raw[1:])]
        return ends, mids
    stacked = np.stack(raw)

    def lerp(t: float) -> np.ndarray:
        t = min(max(t, v_times[0]), v_times[-1])
        j = int(np.searchsorted(v_times, t, side="right") - 1)
        j = min(max(j, 0), len(v_times) - 2)
        w = (t - v_times[j]) / (v_times[j + 1] - v_times[j])
        return (1.0 - w) * stacked[j] + w * stacked[j + 1]

    ends = [lerp(float(t)) for t in times]
    mids = [lerp(0.5 * (float(a) + float(b))) for a, b in zip(times[:-1], times[1:])]
    return ends, mids


def make_transport_instance(name: str, spec: TransportSpec) -> ProblemInstance:
    def step(v_traj, u0, window, substeps, t_start=0.0):
        return transport_step(spec, v_traj, u0, window, substeps, t_start)

    return ProblemInstance(
        name=name,
        step=step,
        weak_norm=lambda gf: sup_norm_values(gf.values),
        strong_norm=lambda gf: lip_norm_values(gf.values, gf.length),
        weak_dist=lambda a, b: float(np.max(np.abs(a.values - b.values))),
        bounds=None,  # sharp constants depend on the coefficients' derivatives
    )


def make_advect_instance(n: int, length: float = 2.0 * np.pi,
                         interpolation: str = "cubic") -> ProblemInstance:
    """Constant-speed advection: G = 1, g = 0; solutions shift left to right."""
    if n < 16:
        raise ValueError("need n >= 16")
    spec = TransportSpec(
        n=n,
        length=length,
        G=lambda x, v: np.ones_like(x),
        g=None,
        interpolation=interpolation,
    )
    return make_transport_instance("transport.advect", spec)


def make_burgers_instance(n: int, length: float = 2.0 * np.pi,
                          interpolation: str = "cubic") -> ProblemInstance:
    """G(x, v) = -v and g = 0: the fixed point solves du/dt + u du/dx = 0."""
    if n < 16:
        raise ValueError("need n >= 16")
    spec = TransportSpec(
        n=n,
        length=length,
        G=lambda x, v: -v,
        g=None,
        interpolation=interpolation,
    )
    return make_transport_instance("transport.burgers", spec)


INSTANCE_NAMES = ("ode.decay", "ode.riccati", "transport.advect", "transport.burgers")
