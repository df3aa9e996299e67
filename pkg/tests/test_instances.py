import math

import numpy as np
import pytest

from twonorm.core import (
    NonFiniteState,
    NormedPairElement,
    TrajectorySegment,
)
from twonorm.grids import GridFunction1D, from_callable, sup_norm
from twonorm.instances import (
    CharacteristicBlowup,
    OdeSpec,
    TransportSpec,
    make_advect_instance,
    make_burgers_instance,
    make_element,
    ode_bounds,
    ode_step,
    transport_step,
)
from twonorm.oracles import burgers_profile_at, sine_profile

TWO_PI = 2.0 * math.pi


def _const_segment(value, t0, t1, samples):
    times = np.linspace(t0, t1, samples)
    elem = NormedPairElement(np.atleast_1d(np.asarray(value, dtype=float)),
                             float(np.max(np.abs(value))),
                             float(np.max(np.abs(value))))
    return TrajectorySegment(times=times, states=(elem,) * samples)


def _segment_from_samples(times, samples_2d, norm=None):
    states = []
    for row in samples_2d:
        row = np.atleast_1d(np.asarray(row, dtype=float))
        m = float(np.max(np.abs(row)))
        states.append(NormedPairElement(row, m, m))
    return TrajectorySegment(times=np.asarray(times), states=tuple(states))


# -- ode_step -------------------------------------------------------------------

def test_ode_step_decay():
    spec = OdeSpec(dimension=1, f=lambda t, y, x: -x,
                   lipschitz_y=0.0, lipschitz_x=1.0)
    y = _const_segment([0.0], 0.0, 1.0, 1001)
    seg = ode_step(spec, y, np.array([1.0]), 1.0, 1000)
    assert seg.states[-1].state[0] == pytest.approx(math.exp(-1.0), abs=1e-9)


def test_ode_step_integrates_constant_input_exactly():
    spec = OdeSpec(dimension=1, f=lambda t, y, x: y,
                   lipschitz_y=1.0, lipschitz_x=0.0)
    y = _const_segment([2.0], 0.0, 1.0, 65)
    seg = ode_step(spec, y, np.array([0.0]), 1.0, 64)
    for t, s in zip(seg.times, seg.states):
        assert s.state[0] == pytest.approx(2.0 * t, abs=1e-12)


def test_ode_step_frozen_riccati_input():
    # y(t) = 1/(1-t) sampled on the substep grid; x' = y x gives 1/(1-t)
    spec = OdeSpec(dimension=1, f=lambda t, y, x: y * x)
    substeps = 500
    times = np.linspace(0.0, 0.5, substeps + 1)
    y = _segment_from_samples(times, 1.0 / (1.0 - times))
    seg = ode_step(spec, y, np.array([1.0]), 0.5, substeps)
    assert seg.states[-1].state[0] == pytest.approx(2.0, rel=1e-6)


def test_ode_step_fourth_order_with_stage_exact_input():
    # frozen input sampled on the half-step grid is exact at every stage
    # point, so the one-step truncation alone drives the error
    spec = OdeSpec(dimension=1, f=lambda t, y, x: y * x)
    exact = math.exp(math.sin(0.5))
    errs = []
    for substeps in (8, 16):
        fine = np.linspace(0.0, 0.5, 2 * substeps + 1)
        y = _segment_from_samples(fine, np.cos(fine))
        seg = ode_step(spec, y, np.array([1.0]), 0.5, substeps)
        errs.append(abs(seg.states[-1].state[0] - exact))
    assert errs[0] / errs[1] >= 12.0


def test_ode_step_riccati_frozen_input_is_moebius_exact():
    # for y = 1/(1-t) the 4-stage amplification reproduces the rational
    # flow exactly, a useful canary for stage-time bookkeeping
    spec = OdeSpec(dimension=1, f=lambda t, y, x: y * x)
    dense = np.linspace(0.0, 0.5, 16385)
    y = _segment_from_samples(dense, 1.0 / (1.0 - dense))
    seg = ode_step(spec, y, np.array([1.0]), 0.5, 8)
    assert seg.states[-1].state[0] == pytest.approx(2.0, abs=1e-12)


def test_ode_step_raises_on_overflow():
    spec = OdeSpec(dimension=1, f=lambda t, y, x: x * x * 1e3 + 1e3)
    y = _const_segment([0.0], 0.0, 10.0, 11)
    with np.errstate(over="ignore"), pytest.raises(NonFiniteState):
        ode_step(spec, y, np.array([1.0]), 10.0, 10)


def test_ode_step_requires_covering_input():
    spec = OdeSpec(dimension=1, f=lambda t, y, x: -x)
    y = _const_segment([0.0], 0.0, 0.25, 9)
    with pytest.raises(ValueError):
        ode_step(spec, y, np.array([1.0]), 1.0, 8)


# -- ode_bounds -----------------------------------------------------------------

def test_ode_bounds_constant_rhs():
    spec = OdeSpec(dimension=1, f=lambda t, y, x: 0.0 * x,
                   lipschitz_y=0.0, lipschitz_x=0.0, f00=0.0)
    apriori, stab = ode_bounds(spec)
    for t in (0.0, 0.5, 3.0):
        assert apriori.eval(t, 1.5, 7.0) == 1.5
        assert stab.b(t, 2.0) == 0.0
        assert stab.c(t, 2.0) == 0.0


def test_ode_bounds_recover_linear_growth():
    spec = OdeSpec(dimension=1, f=lambda t, y, x: y,
                   lipschitz_y=1.0, lipschitz_x=0.0, f00=0.0)
    apriori, _ = ode_bounds(spec)
    assert apriori.eval(0.5, 1.0, 2.0) == pytest.approx(2.0)  # r + t M


def test_ode_bounds_gronwall_value():
    spec = OdeSpec(dimension=1, f=lambda t, y, x: y + x,
                   lipschitz_y=1.0, lipschitz_x=1.0, f00=0.0)
    apriori, _ = ode_bounds(spec)
    assert apriori.eval(0.5, 1.0, 2.0) == pytest.approx(2.0 * math.exp(0.5), rel=1e-12)


def test_ode_bounds_apriori_invariants_sampled():
    spec = OdeSpec(dimension=2, f=lambda t, y, x: y - x,
                   lipschitz_y=1.0, lipschitz_x=1.0, f00=0.5)
    apriori, stab = ode_bounds(spec)
    rng = np.random.default_rng(1)
    for _ in range(200):
        t, r, m = rng.uniform(0, 3), rng.uniform(0, 5), rng.uniform(0, 5)
        dt, dr, dm = rng.uniform(0, 1, 3)
        base = apriori.eval(t, r, m)
        assert apriori.eval(t + dt, r, m) >= base - 1e-12
        assert apriori.eval(t, r + dr, m) >= base - 1e-12
        assert apriori.eval(t, r, m + dm) >= base - 1e-12
        assert apriori.eval(0.0, r, m) == r


def test_ode_bounds_small_time_limits():
    # b(t,R)/R must stay below 1 and c(t,R)/R must vanish as t -> 0
    spec = OdeSpec(dimension=1, f=lambda t, y, x: 2.0 * y - 3.0 * x,
                   lipschitz_y=2.0, lipschitz_x=3.0, f00=0.0)
    _, stab = ode_bounds(spec)
    for r in (0.1, 1.0, 10.0):
        for t in (1e-2, 1e-4, 1e-6):
            assert stab.b(t, r) / r < 1.0
        assert stab.c(1e-8, r) / r < 1e-6


def test_ode_bounds_dominate_dense_solves():
    # 100 random linear systems within declared constants never exceed
    # the growth bound along a dense reference solve of the frozen problem
    rng = np.random.default_rng(2024)
    for _ in range(100):
        d = int(rng.integers(1, 4))
        l1, l2, f00 = rng.uniform(0.1, 2.0, 3)
        ay = rng.normal(size=(d, d))
        ay *= l1 / max(np.abs(ay).sum(axis=1).max(), 1e-12)
        ax = rng.normal(size=(d, d))
        ax *= l2 / max(np.abs(ax).sum(axis=1).max(), 1e-12)
        c = rng.uniform(-1, 1, size=d)
        c *= f00 / max(np.abs(c).max(), 1e-12)
        spec = OdeSpec(dimension=d,
                       f=lambda t, y, x, ay=ay, ax=ax, c=c: ay @ y + ax @ x + c,
                       lipschitz_y=l1, lipschitz_x=l2, f00=f00)
        apriori, _ = ode_bounds(spec)
        m = rng.uniform(0.5, 3.0)
        phase = rng.uniform(0, TWO_PI, size=d)
        t_final = rng.uniform(0.2, 1.5)
        times = np.linspace(0.0, t_final, 513)
        y_samples = m * np.sin(3.0 * times[:, None] + phase[None, :])
        y = _segment_from_samples(times, y_samples)
        x0 = rng.uniform(-1, 1, size=d)
        seg = ode_step(spec, y, x0, t_final, 512)
        r0 = float(np.max(np.abs(x0)))
        for t, s in zip(seg.times, seg.states):
            bound = apriori.eval(float(t), r0, m)
            assert s.strong_norm <= bound * (1.0 + 1e-8) + 1e-12


def test_ode_bounds_need_declared_constants():
    spec = OdeSpec(dimension=1, f=lambda t, y, x: y * x)
    with pytest.raises(ValueError):
        ode_bounds(spec)


# -- transport_step ----------------------------------------------------------------

def _grid_segment(spec_n, length, arrays, times):
    states = []
    for vals in arrays:
        gf = GridFunction1D(n=spec_n, length=length, values=vals)
        states.append(NormedPairElement(gf, float(np.max(np.abs(vals))), 0.0))
    return TrajectorySegment(times=np.asarray(times), states=tuple(states))


def test_transport_constant_advection_shifts():
    n = 256
    prof = sine_profile()
    spec = TransportSpec(n=n, length=TWO_PI, G=lambda x, v: np.ones_like(x))
    u0 = from_callable(prof.value, n, TWO_PI)
    substeps = 100
    times = np.linspace(0.0, 0.5, substeps + 1)
    v = _grid_segment(n, TWO_PI, [u0.values] * (substeps + 1), times)
    seg = transport_step(spec, v, u0, 0.5, substeps)
    final = seg.states[-1].state
    exact = prof.value(final.nodes() + 0.5)
    assert np.max(np.abs(final.values - exact)) <= 1e-3


def test_transport_pure_source_exact():
    n = 64
    spec = TransportSpec(n=n, length=TWO_PI,
                         G=lambda x, v: np.zeros_like(x),
                         g=lambda x, u: np.ones_like(u))
    u0 = from_callable(np.sin, n, TWO_PI)
    substeps = 20
    times = np.linspace(0.0, 0.7, substeps + 1)
    v = _grid_segment(n, TWO_PI, [u0.values] * (substeps + 1), times)
    seg = transport_step(spec, v, u0, 0.7, substeps)
    assert np.max(np.abs(seg.states[-1].state.values - (u0.values + 0.7))) < 1e-12


def test_transport_frozen_burgers_input_matches_oracle():
    # freeze v at the exact pre-shock solution; the linear solve must
    # reproduce it
    n = 1024
    prof = sine_profile()
    spec = TransportSpec(n=n, length=TWO_PI, G=lambda x, v: -v)
    u0 = from_callable(prof.value, n, TWO_PI)
    substeps = 40
    times = np.linspace(0.0, 0.2, substeps + 1)
    xs = u0.nodes()
    v_arrays = [np.asarray(burgers_profile_at(prof, float(t), xs)) for t in times]
    v = _grid_segment(n, TWO_PI, v_arrays, times)
    seg = transport_step(spec, v, u0, 0.2, substeps)
    oracle = burgers_profile_at(prof, 0.2, xs)
    assert np.max(np.abs(seg.states[-1].state.values - oracle)) <= 5e-3


def test_transport_advection_preserves_sup_norm():
    # constant-coefficient advection is an isometry up to interpolation error
    n = 512
    prof = sine_profile()
    inst_spec = TransportSpec(n=n, length=TWO_PI, G=lambda x, v: np.ones_like(x))
    u0 = from_callable(prof.value, n, TWO_PI)
    substeps = 64
    times = np.linspace(0.0, 1.0, substeps + 1)
    v = _grid_segment(n, TWO_PI, [u0.values] * (substeps + 1), times)
    seg = transport_step(inst_spec, v, u0, 1.0, substeps)
    for s in seg.states:
        assert abs(sup_norm(s.state) - sup_norm(u0)) <= 1e-4


def test_transport_characteristic_blowup_guard():
    n = 64
    spec = TransportSpec(n=n, length=TWO_PI, G=lambda x, v: 100.0 * np.ones_like(x))
    u0 = from_callable(np.sin, n, TWO_PI)
    times = np.linspace(0.0, 1.0, 3)
    v = _grid_segment(n, TWO_PI, [u0.values] * 3, times)
    with pytest.raises(CharacteristicBlowup):
        transport_step(spec, v, u0, 1.0, 2)


def test_transport_grid_mismatch_rejected():
    spec = TransportSpec(n=64, length=TWO_PI, G=lambda x, v: -v)
    u0 = from_callable(np.sin, 32, TWO_PI)
    times = np.linspace(0.0, 0.1, 3)
    v = _grid_segment(32, TWO_PI, [u0.values] * 3, times)
    with pytest.raises(ValueError):
        transport_step(spec, v, u0, 0.1, 2)


# -- bundled instances ----------------------------------------------------------

def test_burgers_zero_data_fixed_in_one_iterate():
    from twonorm.core import SolverConfig, WindowPlan, picard_window

    inst = make_burgers_instance(64)
    u0 = GridFunction1D(n=64, length=TWO_PI, values=np.zeros(64))
    x0 = make_element(inst, u0)
    plan = WindowPlan(K=1.0, t1=0.5, t2=0.5, theta=0.5)
    seg, rec = picard_window(inst, x0, plan, SolverConfig(substeps_per_window=8))
    assert rec.picard_iters == 1  # d_1 = 0: already the fixed point
    assert all(np.all(s.state.values == 0.0) for s in seg.states)


def test_burgers_constant_data_stays_constant():
    from twonorm.core import SolverConfig, WindowPlan, picard_window

    inst = make_burgers_instance(64)
    u0 = GridFunction1D(n=64, length=TWO_PI, values=np.full(64, 0.8))
    x0 = make_element(inst, u0)
    plan = WindowPlan(K=2.0, t1=0.5, t2=0.5, theta=0.5)
    seg, _ = picard_window(inst, x0, plan, SolverConfig(substeps_per_window=8))
    for s in seg.states:
        assert np.max(np.abs(s.state.values - 0.8)) < 1e-12


def test_instance_constructors_validate_n():
    with pytest.raises(ValueError):
        make_burgers_instance(8)
    with pytest.raises(ValueError):
        make_advect_instance(4)


def test_bundled_instances_embed_weak_into_strong():
    # embed_const = 1: the weak norm never exceeds the strong norm
    rng = np.random.default_rng(9)
    inst = make_burgers_instance(64)
    for _ in range(20):
        e = make_element(inst, GridFunction1D(n=64, length=TWO_PI,
                                              values=rng.normal(size=64)))
        assert e.weak_norm <= inst.embed_const * e.strong_norm
    from twonorm.instances import make_decay_instance

    ode = make_decay_instance()
    for _ in range(20):
        e = make_element(ode, rng.normal(size=3))
        assert e.weak_norm <= ode.embed_const * e.strong_norm


def test_stability_bounds_nondecreasing_in_time():
    spec = OdeSpec(dimension=1, f=lambda t, y, x: 2.0 * y - 3.0 * x,
                   lipschitz_y=2.0, lipschitz_x=3.0, f00=0.0)
    _, stab = ode_bounds(spec)
    ts = np.linspace(0.0, 2.0, 40)
    for r in (0.2, 1.0, 7.0):
        bs = [stab.b(t, r) for t in ts]
        cs = [stab.c(t, r) for t in ts]
        assert all(x <= y for x, y in zip(bs, bs[1:]))
        assert all(x <= y for x, y in zip(cs, cs[1:]))
