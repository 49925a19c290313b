"""
Adaptive integration of Hamilton and Lagrange flows
Dormand-Prince 5(4) with the standard step controller, dense output from
the pair's order-4 Hermite-type continuous extension, and conservation drift
reports over the sampled trajectory.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from config import config
from diffcore import ScalarField
from errors import ConfigError, ConvergenceError, DomainError, NumericError, StepSizeUnderflowError
from exprdsl import primal
from geometry import JetPoint, PhasePoint
from hamiltonian import HamiltonianSystem, hamilton_rhs
from lagrangian import LagrangianSystem, lagrange_dynamics

logger = logging.getLogger(__name__)

HAMILTONIAN = "hamiltonian"
LAGRANGIAN = "lagrangian"

# Dormand-Prince tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# fifth minus fourth order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# continuous extension
_D = np.array([-12715105075 / 11282082432, 0.0, 87487479700 / 32700410799, -10690763975 / 1880347072,
               701980252875 / 199316789632, -1453857185 / 822651844, 69997945 / 29380423])

Rhs = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Trajectory:
    """Dense samples of one integrated flow, in integration order"""
    kind: str
    n: int
    times: np.ndarray
    states: np.ndarray
    accepted: int
    rejected: int
    rtol: float
    atol: float

    def __len__(self) -> int:
        return len(self.times)

    def point(self, k: int) -> Union[PhasePoint, JetPoint]:
        t = float(self.times[k])
        q = tuple(float(x) for x in self.states[k, :self.n])
        rest = tuple(float(x) for x in self.states[k, self.n:])
        if self.kind == HAMILTONIAN:
            return PhasePoint(t, q, rest)
        return JetPoint(t, q, rest)

    def points(self) -> List[Union[PhasePoint, JetPoint]]:
        return [self.point(k) for k in range(len(self))]

    @property
    def final(self) -> Union[PhasePoint, JetPoint]:
        return self.point(len(self) - 1)

    def column_names(self) -> List[str]:
        second = "p" if self.kind == HAMILTONIAN else "qt"
        return ["t"] + [f"q{i}" for i in range(1, self.n + 1)] + [f"{second}{i}" for i in range(1, self.n + 1)]


@dataclass(frozen=True)
class QuantityDrift:
    name: str
    initial: float
    max_abs_drift: float
    relative_drift: float
    passed: bool
    failed_samples: int = 0


@dataclass(frozen=True)
class ConservationReport:
    """Drift of monitored quantities along a trajectory"""
    tolerance: float
    quantities: Tuple[QuantityDrift, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(q.passed for q in self.quantities)

    def __getitem__(self, name: str) -> QuantityDrift:
        for q in self.quantities:
            if q.name == name:
                return q
        raise KeyError(name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tol": self.tolerance,
            "pass": self.passed,
            "quantities": [
                {"name": q.name, "initial": q.initial, "max_abs_drift": q.max_abs_drift,
                 "relative_drift": q.relative_drift, "pass": q.passed, "failed_samples": q.failed_samples}
                for q in self.quantities
            ],
        }


def _error_norm(err: np.ndarray, y0: np.ndarray, y1: np.ndarray, rtol: float, atol: float) -> float:
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _initial_step(rhs: Rhs, t0: float, y0: np.ndarray, f0: np.ndarray, direction: float,
                  rtol: float, atol: float, span: float) -> float:
    scale = atol + rtol * np.abs(y0)
    d0 = float(np.sqrt(np.mean((y0 / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / scale) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    try:
        f1 = rhs(t0 + direction * h0, y0 + direction * h0 * f0)
        d2 = float(np.sqrt(np.mean(((f1 - f0) / scale) ** 2))) / h0
    except DomainError:
        return h0
    if not np.isfinite(d2):
        return h0
    big = max(d1, d2)
    h1 = max(1e-6, h0 * 1e-3) if big <= 1e-15 else (0.01 / big) ** 0.2
    return min(100.0 * h0, h1, span)


def dopri5(rhs: Rhs, t0: float, y0: Sequence[float], t_end: float, rtol: float, atol: float,
           samples: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray, int, int]:
    """Integrate y' = rhs(t, y) from t0 to t_end; returns (times, states, accepted, rejected)"""
    settings = config.get_integrator_config()
    if samples is None:
        samples = int(settings.get("samples", 1000))
    safety = float(settings.get("safety", 0.9))
    min_factor = float(settings.get("min_factor", 0.2))
    max_factor = float(settings.get("max_factor", 5.0))
    max_steps = int(settings.get("max_steps", 1_000_000))
    if rtol <= 0 or atol <= 0:
        raise ConfigError(f"Tolerances must be positive (rtol={rtol}, atol={atol})")
    if samples < 2:
        raise ConfigError(f"Need at least two samples, got {samples}")
    if t_end == t0:
        raise ConfigError("Integration span is empty")

    direction = 1.0 if t_end > t0 else -1.0
    span = abs(t_end - t0)
    grid = np.linspace(t0, t_end, samples)
    grid[-1] = t_end
    y = np.array(y0, dtype=float)
    out = np.empty((samples, y.size))
    out[0] = y
    next_sample = 1

    t = float(t0)
    f = rhs(t, y)
    h = _initial_step(rhs, t, y, f, direction, rtol, atol, span)
    accepted = rejected = 0
    last_rejected = False

    while next_sample < samples:
        if accepted + rejected >= max_steps:
            raise ConvergenceError(f"Step limit {max_steps} reached at t={t:.17g}", h)
        if h < 16.0 * np.finfo(float).eps * max(1.0, abs(t)):
            raise StepSizeUnderflowError(t, h)
        remaining = abs(t_end - t)
        final_step = h >= remaining
        if final_step:
            h = remaining
        dt = direction * h

        k = [f]
        err_norm = np.inf
        y_new = y
        try:
            for s in range(1, 7):
                ys = y + dt * sum(a * k[j] for j, a in enumerate(_A[s]) if a != 0.0)
                if not np.all(np.isfinite(ys)):
                    raise DomainError("non-finite stage state")
                k.append(rhs(t + _C[s] * dt, ys))
            y_new = y + dt * (_B @ np.array(k))
            if np.all(np.isfinite(y_new)) and np.all(np.isfinite(k[6])):
                err_norm = _error_norm(dt * (_E @ np.array(k)), y, y_new, rtol, atol)
        except DomainError as e:
            logger.debug("Stage left the domain at t=%.17g, h=%.3e: %s", t, h, e)

        if err_norm <= 1.0:
            t_new = t_end if final_step else t + dt
            kk = np.array(k)
            ydiff = y_new - y
            bspl = dt * k[0] - ydiff
            cont = (y, ydiff, bspl, ydiff - dt * k[6] - bspl, dt * (_D @ kk))
            while next_sample < samples and direction * (grid[next_sample] - t_new) <= 0.0:
                if next_sample == samples - 1 and final_step:
                    out[next_sample] = y_new
                else:
                    theta = (grid[next_sample] - t) / dt
                    theta1 = 1.0 - theta
                    out[next_sample] = cont[0] + theta * (cont[1] + theta1 * (cont[2] + theta * (cont[3] + theta1 * cont[4])))
                next_sample += 1
            t, y, f = t_new, y_new, k[6]
            accepted += 1
            factor = max_factor if err_norm == 0.0 else min(max_factor, safety * err_norm ** -0.2)
            if last_rejected:
                factor = min(1.0, factor)
            last_rejected = False
        else:
            rejected += 1
            factor = min_factor if not np.isfinite(err_norm) else max(min_factor, safety * err_norm ** -0.2)
            factor = min(factor, 1.0)
            last_rejected = True
        h = h * max(min_factor, factor)

    logger.info("Integrated to t=%.17g: %d accepted, %d rejected steps", t_end, accepted, rejected)
    return grid, out, accepted, rejected


def _tolerances(rtol: Optional[float], atol: Optional[float]) -> Tuple[float, float]:
    settings = config.get_integrator_config()
    return (float(settings.get("rtol", 1e-10)) if rtol is None else float(rtol),
            float(settings.get("atol", 1e-12)) if atol is None else float(atol))


def integrate_hamiltonian(sys: HamiltonianSystem, start: PhasePoint, t_end: float,
                          rtol: Optional[float] = None, atol: Optional[float] = None,
                          samples: Optional[int] = None) -> Trajectory:
    """Integrate the Hamilton equation from a phase point"""
    if start.n != sys.n:
        raise ConfigError(f"Start point dimension {start.n} does not match system dimension {sys.n}")
    rtol, atol = _tolerances(rtol, atol)
    n = sys.n

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        qdot, pdot = hamilton_rhs(sys, PhasePoint(t, tuple(y[:n]), tuple(y[n:])))
        return np.concatenate([qdot, pdot])

    times, states, acc, rej = dopri5(rhs, start.t, start.state(), t_end, rtol, atol, samples)
    return Trajectory(HAMILTONIAN, n, times, states, acc, rej, rtol, atol)


def integrate_lagrangian(sys: LagrangianSystem, start: JetPoint, t_end: float,
                         rtol: Optional[float] = None, atol: Optional[float] = None,
                         samples: Optional[int] = None) -> Trajectory:
    """Integrate (q, qt) with accelerations from the Lagrange equation"""
    if start.n != sys.n:
        raise ConfigError(f"Start point dimension {start.n} does not match system dimension {sys.n}")
    rtol, atol = _tolerances(rtol, atol)
    n = sys.n

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        qtt = lagrange_dynamics(sys, JetPoint(t, tuple(y[:n]), tuple(y[n:])))
        return np.concatenate([y[n:], qtt])

    y0 = np.array(start.q + start.qt)
    times, states, acc, rej = dopri5(rhs, start.t, y0, t_end, rtol, atol, samples)
    return Trajectory(LAGRANGIAN, n, times, states, acc, rej, rtol, atol)


Monitor = Union[ScalarField, Callable[[Any], float]]


def _monitor_items(monitors: Union[Mapping[str, Monitor], Sequence[Tuple[str, Monitor]]]) -> List[Tuple[str, Monitor]]:
    if isinstance(monitors, Mapping):
        return list(monitors.items())
    return list(monitors)


def drift_report(traj: Trajectory, monitors: Union[Mapping[str, Monitor], Sequence[Tuple[str, Monitor]]],
                 tol: float) -> ConservationReport:
    """Max |value - initial| of every monitor over the trajectory samples.

    A monitor is a ScalarField on the trajectory's frame or any callable of a
    trajectory point.
    """
    points = traj.points()
    results = []
    for name, monitor in _monitor_items(monitors):
        values = []
        failed = 0
        for pt in points:
            try:
                values.append(primal(monitor(pt)))
            except NumericError as e:
                failed += 1
                logger.warning("Monitor %s failed at t=%.17g: %s", name, pt.t, e)
        if not values:
            results.append(QuantityDrift(name, float("nan"), float("inf"), float("inf"), False, failed))
            continue
        arr = np.array(values)
        initial = float(arr[0])
        drift = float(np.max(np.abs(arr - initial)))
        relative = drift / abs(initial) if initial != 0.0 else drift
        results.append(QuantityDrift(name, initial, drift, relative, drift <= tol and failed == 0, failed))
    return ConservationReport(float(tol), tuple(results))
