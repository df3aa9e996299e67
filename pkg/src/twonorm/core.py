"""Windowed fixed-point engine for evolution problems measured in two norms.

The target equation is x' = f(x, x) where the two argument slots of f are
controlled by different norms: a weak norm in which the frozen problem
x' = f(y, x) is stable under perturbations of y, and a strong norm that
only stays bounded for a while. The engine plans a time window on which
the strong norm stays under a cap and the frozen-solve map y -> x is a
weak-norm contraction, iterates that map to its fixed point, glues windows
end to end, and reports finite-time blow-up when the admissible window
length collapses or the strong norm passes a threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable

import numpy as np

THETA_FLOOR = 0.1  # default floor for empirically estimated contraction factors

_R0_FLOOR = 64.0 * np.finfo(np.float64).eps  # cap floor for zero initial data
_CAP_SLACK = 1e-9  # relative slack when comparing strong norms against caps


class SolverError(Exception):
    """Base class for engine errors."""


class InvalidCap(SolverError):
    """Strong-norm cap does not exceed the initial strong norm."""


class NonMonotone(SolverError):
    """A sampled a-priori bound decreases in time (instance bug)."""


class NoContractionWindow(SolverError):
    """No admissible contraction window exists; stability bounds look wrong."""


class WindowFailure(SolverError):
    """A window attempt failed; the caller shrinks the window and retries."""


class ContractionFailureError(WindowFailure):
    """Successive-iterate ratios exceeded 1 twice in a row."""


class CapExceeded(WindowFailure):
    """An iterate's strong norm left the planned cap."""


class IterBudgetExceeded(WindowFailure):
    """Fixed-point iteration did not converge within the iteration budget."""


class NonFiniteState(WindowFailure):
    """A state left the finite range; treated like a cap violation."""


# -- domain types -----------------------------------------------------------

@dataclass(frozen=True)
class NormedPairElement:
    """A state together with its weak and strong norm.

    strong_norm may be +inf, encoding a state outside the strong space.
    """

    state: Any
    weak_norm: float
    strong_norm: float

    def __post_init__(self):
        if not (self.weak_norm >= 0.0 and math.isfinite(self.weak_norm)):
            raise ValueError(f"weak norm must be finite and >= 0, got {self.weak_norm}")
        if not self.strong_norm >= 0.0:
            raise ValueError(f"strong norm must be >= 0 (or +inf), got {self.strong_norm}")


@dataclass(frozen=True)
class TrajectorySegment:
    """A discrete-time path over one window, on a uniform time grid."""

    times: np.ndarray
    states: tuple[NormedPairElement, ...]

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        object.__setattr__(self, "times", times)
        if times.ndim != 1 or len(times) < 2:
            raise ValueError("need at least two time samples")
        if len(self.states) != len(times):
            raise ValueError("times and states length mismatch")
        dt = np.diff(times)
        if not np.all(dt > 0):
            raise ValueError("times must be strictly increasing")
        if not np.allclose(dt, dt[0], rtol=1e-6, atol=0.0):
            raise ValueError("times must be uniformly spaced")

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def weak_history(self) -> np.ndarray:
        return np.array([s.weak_norm for s in self.states])

    def strong_history(self) -> np.ndarray:
        return np.array([s.strong_norm for s in self.states])

    def sup_weak(self) -> float:
        return float(np.max(self.weak_history()))

    def sup_strong(self) -> float:
        return float(np.max(self.strong_history()))


@dataclass(frozen=True)
class AprioriBound:
    """Bound on the strong norm of a frozen solve: (t, r0, M) -> bound.

    Non-decreasing in each argument, with eval(0, r0, M) = r0.
    """

    eval: Callable[[float, float, float], float]

    def __call__(self, t: float, r0: float, m: float) -> float:
        return self.eval(t, r0, m)


@dataclass(frozen=True)
class StabilityBounds:
    """Weak-norm sensitivity bounds of the frozen solve.

    b(t, R) controls feedback of the solution's own perturbation,
    c(t, R) the effect of perturbing the frozen input. For small t,
    b(t,R)/R must stay below 1 and c(t,R)/R must vanish.
    """

    b: Callable[[float, float], float]
    c: Callable[[float, float], float]


@dataclass(frozen=True)
class WindowPlan:
    """Cap and window lengths produced by the planning step."""

    K: float
    t1: float
    t2: float
    theta: float

    def __post_init__(self):
        if not self.K > 0:
            raise ValueError("cap K must be positive")
        if not (0 < self.t2 <= self.t1):
            raise ValueError(f"need 0 < t2 <= t1, got t2={self.t2}, t1={self.t1}")
        if not (0.0 < self.theta < 1.0):
            raise ValueError(f"theta must lie in (0,1), got {self.theta}")


@dataclass(frozen=True)
class SolverConfig:
    kappa: float = 2.0              # cap margin: K = kappa * current strong norm
    theta_target: float = 0.5       # contraction factor aimed for by planning
    tol: float = 1e-9               # weak-norm fixed-point tolerance
    max_picard_iters: int = 80
    max_windows: int = 64
    substeps_per_window: int = 64
    strong_norm_cap: float | None = None  # None: 1e6 x initial strong norm
    min_window: float = 1e-4        # below this, declare blow-up
    window_shrink: float = 0.5
    empirical_mode: bool = False
    swap_roles: bool = False

    def __post_init__(self):
        if not self.kappa > 1.0:
            raise ValueError("kappa must exceed 1")
        for name in ("theta_target", "window_shrink"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ValueError(f"{name} must lie in (0,1), got {v}")
        for name in ("tol", "min_window"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("max_picard_iters", "max_windows", "substeps_per_window"):
            if not getattr(self, name) >= 1:
                raise ValueError(f"{name} must be >= 1")
        if self.strong_norm_cap is not None and not self.strong_norm_cap > 0:
            raise ValueError("strong_norm_cap must be positive when given")


class Termination(Enum):
    HORIZON_REACHED = "HorizonReached"
    BLOW_UP_DETECTED = "BlowUpDetected"
    BUDGET_EXHAUSTED = "BudgetExhausted"
    CONTRACTION_FAILURE = "ContractionFailure"


@dataclass(frozen=True)
class WindowRecord:
    t_start: float
    t_end: float
    picard_iters: int
    observed_ratios: tuple[float, ...]
    end_strong_norm: float


@dataclass(frozen=True)
class SolveReport:
    windows: tuple[WindowRecord, ...]
    termination: Termination
    t_c_estimate: float | None = None

    def __post_init__(self):
        if self.termination is Termination.BLOW_UP_DETECTED:
            if self.t_c_estimate is None:
                raise ValueError("blow-up verdict requires a t_c estimate")
            if self.windows and self.t_c_estimate < self.windows[-1].t_end - 1e-12:
                raise ValueError("t_c estimate precedes the last accepted window")

    def to_dict(self) -> dict:
        t_c = self.t_c_estimate
        return {
            "termination": {
                "kind": self.termination.value,
                "t_c_estimate": None if t_c is None or math.isinf(t_c) else t_c,
                "t_c_estimate_infinite": bool(t_c is not None and math.isinf(t_c)),
            },
            "windows": [
                {
                    "t_start": w.t_start,
                    "t_end": w.t_end,
                    "picard_iters": w.picard_iters,
                    "observed_ratios": list(w.observed_ratios),
                    "end_strong_norm": w.end_strong_norm,
                }
                for w in self.windows
            ],
        }

    @staticmethod
    def from_dict(d: dict) -> "SolveReport":
        term = d["termination"]
        t_c = term.get("t_c_estimate")
        if term.get("t_c_estimate_infinite"):
            t_c = math.inf
        return SolveReport(
            windows=tuple(
                WindowRecord(
                    t_start=w["t_start"],
                    t_end=w["t_end"],
                    picard_iters=w["picard_iters"],
                    observed_ratios=tuple(w["observed_ratios"]),
                    end_strong_norm=w["end_strong_norm"],
                )
                for w in d["windows"]
            ),
            termination=Termination(term["kind"]),
            t_c_estimate=t_c,
        )


# -- window planning --------------------------------------------------------

def select_window(apriori: AprioriBound, r0: float, k_cap: float, t_max: float,
                  tol_t: float = 1e-10) -> float:
    """Largest t <= t_max keeping the a-priori strong-norm bound under k_cap.

    Bisects the monotone map t -> apriori(t, r0, k_cap) - k_cap. Raises
    InvalidCap if k_cap <= r0 and NonMonotone if sampled values decrease.
    """
    if not k_cap > r0:
        raise InvalidCap(f"cap {k_cap} must exceed initial strong norm {r0}")
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    probes = np.linspace(0.0, t_max, 17)
    sampled = [apriori.eval(float(t), r0, k_cap) for t in probes]
    for a, b in zip(sampled, sampled[1:]):
        if b < a - 1e-12 * max(1.0, abs(a)):
            raise NonMonotone("a-priori bound decreases in t on sampled probes")
    if sampled[-1] <= k_cap:
        return t_max
    lo, hi = 0.0, t_max  # apriori(0) = r0 < k_cap, apriori(t_max) > k_cap
    while hi - lo > tol_t:
        mid = 0.5 * (lo + hi)
        if apriori.eval(mid, r0, k_cap) <= k_cap:
            lo = mid
        else:
            hi = mid
    return lo


def _sup_ratio(fn, t: float, radii: np.ndarray) -> float:
    return max(fn(t, float(r)) / float(r) for r in radii)


def select_contraction_window(bounds: StabilityBounds, k_cap: float, r0: float,
                              t1: float, theta_target: float,
                              swap_roles: bool = False, *,
                              min_t: float = 0.0,
                              n_radius_samples: int = 32) -> tuple[float, float]:
    """Window length t2 <= t1 on which the frozen-solve map contracts.

    Searches for the largest t such that, over sampled radii,
    b(t,R)/R <= theta1 (R <= 2K) and c(t,R)/(R (1-theta1)) <= theta_target
    (R <= K). theta1 is 0 when b vanishes identically on the samples and
    otherwise starts at max(theta_target, b's small-t level), escalating
    toward 1 once if infeasible. With swap_roles the two bounds trade
    places, mirroring the symmetric variant of the construction.

    Returns (t2, theta). Raises NoContractionWindow when no t >= min_t
    works, which signals invalid stability bounds.
    """
    if not t1 > 0:
        raise ValueError("t1 must be positive")
    b_fn, c_fn = (bounds.c, bounds.b) if swap_roles else (bounds.b, bounds.c)
    # geometric radius samples; sup over them stands in for the true sup
    radii_b = np.geomspace(2.0 * k_cap * 1e-6, 2.0 * k_cap, n_radius_samples)
    radii_c = np.geomspace(k_cap * 1e-6, k_cap, n_radius_samples)

    t_tiny = t1 * 1e-9
    probe_ts = np.linspace(t_tiny, t1, 9)
    b_vanishes = all(b_fn(float(t), float(r)) == 0.0 for t in probe_ts for r in radii_b)
    beta_tiny = 0.0 if b_vanishes else _sup_ratio(b_fn, t_tiny, radii_b)

    if b_vanishes:
        theta1_candidates = [0.0]
    else:
        first = max(theta_target, beta_tiny)
        theta1_candidates = [first] if first < 1.0 else []
        blend = 0.5 * (max(theta_target, beta_tiny) + 1.0)
        if blend < 1.0:
            theta1_candidates.append(blend)
    if not theta1_candidates:
        raise NoContractionWindow("b(t,R)/R does not drop below 1 for small t")

    for theta1 in theta1_candidates:
        def feasible(t: float) -> bool:
            if _sup_ratio(b_fn, t, radii_b) > theta1:
                return False
            return _sup_ratio(c_fn, t, radii_c) <= theta_target * (1.0 - theta1)

        if feasible(t1):
            return t1, theta_target
        floor = max(min_t, t1 * 1e-12)
        if not feasible(floor):
            continue
        lo, hi = floor, t1
        while hi - lo > t1 * 1e-12:
            mid = 0.5 * (lo + hi)
            if feasible(mid):
                lo = mid
            else:
                hi = mid
        return lo, theta_target
    raise NoContractionWindow(
        f"no contraction window of length >= {min_t} exists below t1={t1}")


def estimate_theta_empirical(ratios, floor: float = THETA_FLOOR) -> float:
    """Contraction factor estimate: max of the last three ratios, floored."""
    if len(ratios) == 0:
        raise ValueError("need at least one observed ratio")
    if any(r < 0 for r in ratios):
        raise ValueError("ratios must be nonnegative")
    tail = list(ratios)[-min(3, len(ratios)):]
    return max(floor, max(tail))


# -- fixed-point iteration over one window ----------------------------------

def _constant_segment(times: np.ndarray, x0: NormedPairElement) -> TrajectorySegment:
    return TrajectorySegment(times=times, states=(x0,) * len(times))


def picard_window(instance, x0: NormedPairElement, plan: WindowPlan,
                  cfg: SolverConfig, t_start: float = 0.0,
                  t_end: float | None = None) -> tuple[TrajectorySegment, WindowRecord]:
    """Iterate the frozen-solve map on [t_start, t_start + plan.t2].

    Starts from the constant-in-time trajectory at x0, repeatedly solves
    the frozen problem with the previous iterate as input, and stops once
    the a-posteriori bound theta/(1-theta) * d_n falls under cfg.tol,
    where d_n is the sup-over-window weak distance between successive
    iterates. Every iterate must keep its strong norms under plan.K.

    Raises WindowFailure subclasses when the window has to shrink:
    ContractionFailureError (ratio above 1 twice in a row), CapExceeded,
    NonFiniteState (propagated from the step operator), or
    IterBudgetExceeded.
    """
    if x0.strong_norm > plan.K / cfg.kappa * (1.0 + _CAP_SLACK):
        raise InvalidCap(
            f"initial strong norm {x0.strong_norm} exceeds plan.K/kappa = "
            f"{plan.K / cfg.kappa}")
    window = plan.t2
    if t_end is None:
        t_end = t_start + window
    times = np.linspace(t_start, t_end, cfg.substeps_per_window + 1)
    use_plan_theta = instance.bounds is not None and not cfg.empirical_mode
    cap = plan.K * (1.0 + _CAP_SLACK)

    prev = _constant_segment(times, x0)
    d_prev = None
    ratios: list[float] = []
    consecutive_bad = 0
    for iteration in range(1, cfg.max_picard_iters + 1):
        cur = instance.step(prev, x0, window, cfg.substeps_per_window, t_start)
        if cur.states[0] is not x0:
            raise SolverError("step operator must reuse the initial state handle")
        if cur.sup_strong() > cap:
            raise CapExceeded(
                f"iterate strong norm {cur.sup_strong()} exceeds cap {plan.K}")
        d = max(
            instance.weak_dist(a.state, b.state)
            for a, b in zip(cur.states, prev.states)
        )
        if d_prev is not None and d_prev > 0.0:
            ratio = d / d_prev
            ratios.append(ratio)
            if ratio > 1.0:
                consecutive_bad += 1
                if consecutive_bad >= 2:
                    raise ContractionFailureError(
                        f"ratios exceeded 1 twice in a row (last {ratio:.3g})")
            else:
                consecutive_bad = 0
        prev, d_prev = cur, d
        if d == 0.0:
            break
        if use_plan_theta:
            theta_stop = plan.theta
        elif ratios:
            theta_stop = estimate_theta_empirical(ratios)
        else:
            continue  # no contraction evidence yet
        if theta_stop < 1.0 and theta_stop / (1.0 - theta_stop) * d <= cfg.tol:
            break
    else:
        raise IterBudgetExceeded(
            f"no convergence in {cfg.max_picard_iters} iterations (d={d_prev:.3g})")

    record = WindowRecord(
        t_start=float(times[0]),
        t_end=float(times[-1]),
        picard_iters=iteration,
        observed_ratios=tuple(ratios),
        end_strong_norm=prev.states[-1].strong_norm,
    )
    return prev, record


# -- continuation by gluing --------------------------------------------------

def continuation_solve(instance, x0: NormedPairElement, t_max: float,
                       cfg: SolverConfig) -> tuple[list[TrajectorySegment], SolveReport]:
    """Advance to t_max by planning, solving and gluing windows.

    Each round caps the strong norm at kappa times its current value,
    plans a window (from the instance's analytic bounds, or by empirical
    halving when there are none or cfg.empirical_mode is set), runs the
    fixed-point iteration, and restarts from the exact end state. Blow-up
    is declared once the strong norm passes the configured threshold or
    the adaptive window drops below cfg.min_window; the current time is
    then reported as a conservative estimate of the critical time.
    """
    if not math.isfinite(x0.strong_norm):
        raise ValueError("initial state must have a finite strong norm")
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    blowup_cap = cfg.strong_norm_cap
    if blowup_cap is None:
        blowup_cap = 1e6 * max(x0.strong_norm, _R0_FLOOR)
    analytic = instance.bounds is not None and not cfg.empirical_mode

    segments: list[TrajectorySegment] = []
    records: list[WindowRecord] = []
    x_cur = x0
    t_cur = 0.0
    last_accepted: float | None = None
    termination = None
    t_c: float | None = None

    horizon_slack = 1e-12 * max(1.0, abs(t_max))
    while True:
        if t_cur >= t_max - horizon_slack:
            termination = Termination.HORIZON_REACHED
            break
        if x_cur.strong_norm > blowup_cap:
            termination = Termination.BLOW_UP_DETECTED
            t_c = t_cur
            break
        if len(records) >= cfg.max_windows:
            termination = Termination.BUDGET_EXHAUSTED
            break

        remaining = t_max - t_cur
        r0 = max(x_cur.strong_norm, _R0_FLOOR)
        k_cap = cfg.kappa * r0
        if analytic:
            apriori, stability = instance.bounds
            t1 = select_window(apriori, x_cur.strong_norm, k_cap, remaining)
            try:
                window, theta = select_contraction_window(
                    stability, k_cap, r0, t1, cfg.theta_target,
                    cfg.swap_roles, min_t=cfg.min_window)
            except NoContractionWindow:
                termination = Termination.CONTRACTION_FAILURE
                break
        else:
            t1 = remaining
            window = remaining if last_accepted is None else min(remaining, 2.0 * last_accepted)
            theta = cfg.theta_target

        # shrink-and-retry loop; collapse below min_window is blow-up evidence
        seg = None
        while True:
            attempt = min(window, remaining)
            # a window within float jitter of the remaining horizon ends on it
            if attempt >= remaining * (1.0 - 1e-9):
                attempt = remaining
                exact_end = t_max
            else:
                exact_end = t_cur + attempt
            plan = WindowPlan(K=k_cap, t1=max(t1, attempt), t2=attempt, theta=theta)
            try:
                seg, rec = picard_window(instance, x_cur, plan, cfg,
                                         t_start=t_cur, t_end=exact_end)
                break
            except WindowFailure:
                window = attempt * cfg.window_shrink
                if window < cfg.min_window:
                    break
        if seg is None:
            termination = Termination.BLOW_UP_DETECTED
            t_c = t_cur
            break

        # substep-resolution blow-up detection: truncate at the first time
        # the stored strong-norm history leaves the threshold
        crossing = _first_cap_crossing(seg, blowup_cap)
        if crossing is not None:
            seg, rec = _truncate_at(seg, rec, crossing)
            segments.append(seg)
            records.append(rec)
            termination = Termination.BLOW_UP_DETECTED
            t_c = seg.t_end
            break

        segments.append(seg)
        records.append(rec)
        x_cur = seg.states[-1]  # exact handle: junction states are identical
        t_cur = seg.t_end
        last_accepted = seg.t_end - seg.t_start

    report = SolveReport(windows=tuple(records), termination=termination,
                         t_c_estimate=t_c)
    return segments, report


def _first_cap_crossing(seg: TrajectorySegment, cap: float) -> int | None:
    over = seg.strong_history() > cap
    if not np.any(over):
        return None
    idx = int(np.argmax(over))
    return max(idx, 1)  # index 0 cannot cross: it passed the previous round's check


def _truncate_at(seg: TrajectorySegment, rec: WindowRecord,
                 idx: int) -> tuple[TrajectorySegment, WindowRecord]:
    short = TrajectorySegment(times=seg.times[: idx + 1], states=seg.states[: idx + 1])
    return short, WindowRecord(
        t_start=rec.t_start,
        t_end=short.t_end,
        picard_iters=rec.picard_iters,
        observed_ratios=rec.observed_ratios,
        end_strong_norm=short.states[-1].strong_norm,
    )
