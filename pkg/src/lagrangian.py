"""
First-order Lagrangian systems
Euler-Lagrange residuals, Legendre map, regularity, the first variational
formula, symmetry and Noether currents, and energy functions.

The ``*_b`` helpers work on name -> value bindings whose entries may be dual
numbers of an enclosing differentiation pass; the public operations take
point records and return plain floats or numpy arrays.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from config import config
from diffcore import ScalarField, differentiate, second_derivatives
from errors import ConfigError, SingularMatrixError
from exprdsl import primal
from geometry import (Jet2Point, JetPoint, ReferenceFrame, VectorFieldQ,
                      config_frame, frame_scalars, jet_frame, prolong_scalars)

logger = logging.getLogger(__name__)

Bindings = Mapping[str, Any]


@dataclass(frozen=True)
class LagrangianSystem:
    """Lagrangian L(t, q, qt) with optional external force f_i(t, q, qt)"""
    n: int
    L: ScalarField
    params: Mapping[str, float] = field(default_factory=dict)
    force: Optional[Tuple[ScalarField, ...]] = None
    name: str = ""

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"Degrees of freedom must be positive, got {self.n}")
        frame = set(jet_frame(self.n))
        if set(self.L.frame) - frame:
            raise ConfigError(f"Lagrangian frame {self.L.frame} is not inside {jet_frame(self.n)}")
        if self.force is not None:
            if len(self.force) != self.n:
                raise ConfigError(f"Force needs {self.n} components, got {len(self.force)}")
            for f in self.force:
                if set(f.frame) - frame:
                    raise ConfigError(f"Force component {f.name!r} leaves the velocity space")

    @classmethod
    def from_text(cls, n: int, text: str, params: Optional[Mapping[str, float]] = None,
                  force: Optional[Sequence[str]] = None, name: str = "") -> "LagrangianSystem":
        params = dict(params or {})
        frame = jet_frame(n)
        forces = None
        if force is not None:
            forces = tuple(ScalarField.from_text(s, frame, params) for s in force)
        return cls(n, ScalarField.from_text(text, frame, params, "L"), params, forces, name)

    @property
    def qt_names(self) -> Tuple[str, ...]:
        return tuple(f"qt{i}" for i in range(1, self.n + 1))

    def value(self, at: Any) -> float:
        return primal(self.L.evaluate(at))


# ---------------------------------------------------------------------------
# binding-level helpers

def momenta_b(sys: LagrangianSystem, b: Bindings) -> List[Any]:
    _, pi = differentiate(sys.L.evaluate, b, sys.qt_names)
    return pi


def total_derivative_b(func: Callable[[Bindings], Any], b: Bindings, n: int) -> Any:
    """d_t F = d_t F + qt^i d_i F + qtt^i d^t_i F at bindings over the second jet"""
    _, d = differentiate(func, b, jet_frame(n))
    total = d[0]
    for i in range(n):
        total = total + b[f"qt{i + 1}"] * d[1 + i] + b[f"qtt{i + 1}"] * d[1 + n + i]
    return total


def _sigma_b(sigma: Optional[ScalarField], b: Bindings) -> Any:
    return 0.0 if sigma is None else sigma.evaluate(b)


def el_operator_b(sys: LagrangianSystem, b: Bindings) -> List[Any]:
    """Force-free Lagrange operator components d_i L - d_t pi_i"""
    n = sys.n
    _, dL = differentiate(sys.L.evaluate, b, config_frame(n))
    out = []
    for i in range(n):
        dt_pi = total_derivative_b(lambda m, i=i: momenta_b(sys, m)[i], b, n)
        out.append(dL[1 + i] - dt_pi)
    return out


def current_core_b(sys: LagrangianSystem, v: VectorFieldQ, b: Bindings) -> Any:
    """pi_i (u^i - ut qt^i) + ut L"""
    pi = momenta_b(sys, b)
    ui, _ = prolong_scalars(v, b)
    total = v.ut * sys.L.evaluate(b) if v.ut else 0.0
    for i in range(sys.n):
        total = total + pi[i] * (ui[i] - v.ut * b[f"qt{i + 1}"])
    return total


def symmetry_current_b(sys: LagrangianSystem, v: VectorFieldQ, sigma: Optional[ScalarField],
                       b: Bindings) -> Any:
    return -(current_core_b(sys, v, b) - _sigma_b(sigma, b))


def lie_derivative_b(sys: LagrangianSystem, v: VectorFieldQ, b: Bindings) -> Any:
    n = sys.n
    _, d = differentiate(sys.L.evaluate, b, jet_frame(n))
    ui, dtui = prolong_scalars(v, b)
    total = v.ut * d[0]
    for i in range(n):
        total = total + ui[i] * d[1 + i] + dtui[i] * d[1 + n + i]
    return total


def _check_dim(sys: LagrangianSystem, n: int) -> None:
    if n != sys.n:
        raise ConfigError(f"Point dimension {n} does not match system dimension {sys.n}")


# ---------------------------------------------------------------------------
# operations

def momenta(sys: LagrangianSystem, at: JetPoint) -> np.ndarray:
    """Legendre map pi_i = dL/dqt^i"""
    _check_dim(sys, at.n)
    return np.array([primal(x) for x in momenta_b(sys, at.bindings())])


def el_residual(sys: LagrangianSystem, at: Jet2Point) -> np.ndarray:
    """Euler-Lagrange residual d_i L - d_t pi_i + f_i"""
    _check_dim(sys, at.n)
    b = at.bindings()
    eps = [primal(x) for x in el_operator_b(sys, b)]
    if sys.force is not None:
        eps = [e + primal(f.evaluate(b)) for e, f in zip(eps, sys.force)]
    return np.array(eps)


def velocity_hessian(sys: LagrangianSystem, at: JetPoint) -> np.ndarray:
    """pi_ji = d^2 L / dqt^j dqt^i"""
    _check_dim(sys, at.n)
    _, _, hess = second_derivatives(sys.L.evaluate, {**sys.params, **at.bindings()}, sys.qt_names)
    return hess


def regularity(sys: LagrangianSystem, at: JetPoint) -> float:
    """Determinant of the velocity Hessian"""
    return float(np.linalg.det(velocity_hessian(sys, at)))


def _singular(det: float, matrix: np.ndarray) -> bool:
    tol = float(config.get("tolerances.regular_det", 1e-12))
    scale = max(1.0, float(np.linalg.norm(matrix, ord=np.inf))) ** matrix.shape[0]
    return abs(det) < tol * scale


def is_regular(sys: LagrangianSystem, at: JetPoint) -> bool:
    hess = velocity_hessian(sys, at)
    return not _singular(float(np.linalg.det(hess)), hess)


def lagrange_dynamics(sys: LagrangianSystem, at: JetPoint) -> np.ndarray:
    """Accelerations solving pi_ji qtt^j = d_i L - d_t pi_i - qt^j d_j pi_i + f_i"""
    _check_dim(sys, at.n)
    n = sys.n
    b = {**sys.params, **at.bindings()}
    _, g, hess = second_derivatives(sys.L.evaluate, b, jet_frame(n))
    v0 = 1 + n
    mass = hess[v0:, v0:]
    det = float(np.linalg.det(mass))
    if _singular(det, mass):
        raise SingularMatrixError(f"Velocity Hessian is singular at t={at.t!r} (det={det:.3e})")
    rhs = g[1:v0] - hess[v0:, 0] - hess[v0:, 1:v0] @ np.array(at.qt)
    if sys.force is not None:
        rhs = rhs + np.array([primal(f.evaluate(b)) for f in sys.force])
    return np.linalg.solve(mass, rhs)


def lie_derivative_L(sys: LagrangianSystem, v: VectorFieldQ, at: Jet2Point) -> float:
    """[ut d_t + u^i d_i + d_t u^i d^t_i] L"""
    _check_dim(sys, at.n)
    return primal(lie_derivative_b(sys, v, at.bindings()))


def variational_identity_residual(sys: LagrangianSystem, v: VectorFieldQ, at: Jet2Point) -> float:
    """Lie derivative minus (u^i - qt^i ut) eps_i + d_t(pi_i (u^i - ut qt^i) + ut L)"""
    _check_dim(sys, at.n)
    b = at.bindings()
    lhs = lie_derivative_b(sys, v, b)
    eps = el_operator_b(sys, b)
    ui, _ = prolong_scalars(v, b)
    rhs = total_derivative_b(lambda m: current_core_b(sys, v, m), b, sys.n)
    for i in range(sys.n):
        rhs = rhs + (ui[i] - b[f"qt{i + 1}"] * v.ut) * eps[i]
    return primal(lhs - rhs)


def symmetry_residual(sys: LagrangianSystem, v: VectorFieldQ, sigma: Optional[ScalarField],
                      at: Jet2Point) -> float:
    """Lie derivative of L minus d_t sigma; zero for a symmetry"""
    _check_dim(sys, at.n)
    b = at.bindings()
    lhs = lie_derivative_b(sys, v, b)
    if sigma is not None:
        lhs = lhs - total_derivative_b(sigma.evaluate, b, sys.n)
    return primal(lhs)


def symmetry_current(sys: LagrangianSystem, v: VectorFieldQ, sigma: Optional[ScalarField],
                     at: JetPoint) -> float:
    """J = -(pi_i (u^i - ut qt^i) + ut L - sigma)"""
    _check_dim(sys, at.n)
    return primal(symmetry_current_b(sys, v, sigma, at.bindings()))


def noether_current(sys: LagrangianSystem, v: VectorFieldQ, at: JetPoint) -> float:
    """J = -pi_i v^i for a vertical field"""
    if not v.vertical:
        raise ConfigError(f"Noether current needs a vertical field, {v.name!r} has ut=1")
    return symmetry_current(sys, v, None, at)


def energy_function(sys: LagrangianSystem, g: ReferenceFrame, at: JetPoint) -> float:
    """E_G = pi_i (qt^i - G^i) - L"""
    _check_dim(sys, at.n)
    b = at.bindings()
    pi = momenta_b(sys, b)
    gamma = frame_scalars(g, b)
    total = -sys.L.evaluate(b)
    for i in range(sys.n):
        total = total + pi[i] * (at.qt[i] - gamma[i])
    return primal(total)


def canonical_energy(sys: LagrangianSystem, at: JetPoint) -> float:
    """pi_i qt^i - L"""
    return energy_function(sys, ReferenceFrame.rest(sys.n), at)


def frame_shift(sys: LagrangianSystem, g1: ReferenceFrame, g2: ReferenceFrame, at: JetPoint) -> float:
    """E_G1 - E_G2 - J_(G1 - G2); vanishes identically"""
    e1 = energy_function(sys, g1, at)
    e2 = energy_function(sys, g2, at)
    return e1 - e2 - noether_current(sys, g1.minus(g2), at)


def total_derivative(func: Callable[[Bindings], Any], at: Jet2Point) -> float:
    """Total time derivative of a function on the velocity space"""
    return primal(total_derivative_b(func, at.bindings(), at.n))


def on_shell(sys: LagrangianSystem, at: JetPoint) -> Jet2Point:
    """Second-jet point with accelerations from the Lagrange equation"""
    return Jet2Point(at.t, at.q, at.qt, tuple(lagrange_dynamics(sys, at)))


def current_balance_residual(sys: LagrangianSystem, v: VectorFieldQ, sigma: Optional[ScalarField],
                             at: JetPoint) -> float:
    """On-shell d_t J + (u^i - qt^i ut) f_i; zero for a symmetry under an external force"""
    j2 = on_shell(sys, at)
    b = j2.bindings()
    d_j = total_derivative_b(lambda m: symmetry_current_b(sys, v, sigma, m), b, sys.n)
    out = primal(d_j)
    if sys.force is not None:
        ui, _ = prolong_scalars(v, b)
        for i, f in enumerate(sys.force):
            out += (primal(ui[i]) - at.qt[i] * v.ut) * primal(f.evaluate(b))
    logger.debug("Current balance for %s at t=%r: %.3e", v.name, at.t, out)
    return out
