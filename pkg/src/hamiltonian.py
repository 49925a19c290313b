"""
Non-autonomous Hamiltonian systems on V*Q
Hamilton equation, the degenerate Poisson bracket, integrals of motion,
Hamiltonian symmetry currents, inverse Noether, the homogeneous formalism on
T*Q and the hyperregular Legendre correspondence.

Bracket convention: {f, g} = d^i f d_i g - d^i g d_i f with d^i = d/dp_i, so
{q1, p1} = -1. The Hamiltonian vector field of f, d^i f d_i - d_i f d^i,
applied to g gives {f, g}.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from config import config
from diffcore import ScalarField, differentiate, second_derivatives
from errors import ConfigError, ConvergenceError, SingularMatrixError
from exprdsl import primal
from geometry import (ExtendedPhasePoint, JetPoint, LiftedValues, PhasePoint,
                      ReferenceFrame, VectorFieldQ, VectorFieldV, extended_frame,
                      frame_scalars, lifted_field, phase_frame)
from lagrangian import LagrangianSystem, _singular

logger = logging.getLogger(__name__)

Bindings = Mapping[str, Any]
Evaluator = Callable[[Bindings], Any]


@dataclass(frozen=True)
class HamiltonianSystem:
    """Hamiltonian H(t, q, p)"""
    n: int
    H: ScalarField
    params: Mapping[str, float] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"Degrees of freedom must be positive, got {self.n}")
        if set(self.H.frame) - set(phase_frame(self.n)):
            raise ConfigError(f"Hamiltonian frame {self.H.frame} is not inside {phase_frame(self.n)}")

    @classmethod
    def from_text(cls, n: int, text: str, params: Optional[Mapping[str, float]] = None,
                  name: str = "") -> "HamiltonianSystem":
        params = dict(params or {})
        return cls(n, ScalarField.from_text(text, phase_frame(n), params, "H"), params, name)

    def value(self, at: Any) -> float:
        return primal(self.H.evaluate(at))


@dataclass(frozen=True)
class InverseNoether:
    """Symmetry -theta_phi, its sigma and the resulting current at one point"""
    field: LiftedValues
    sigma: float
    current: float


# ---------------------------------------------------------------------------
# binding-level helpers

def phase_partials_b(func: Evaluator, b: Bindings, n: int) -> Tuple[Any, Any, List[Any], List[Any]]:
    """Value, d_t, d_i and d^i of func"""
    value, d = differentiate(func, b, phase_frame(n))
    return value, d[0], d[1:1 + n], d[1 + n:]


def poisson_b(f: Evaluator, g: Evaluator, b: Bindings, n: int) -> Any:
    _, _, fq, fp = phase_partials_b(f, b, n)
    _, _, gq, gp = phase_partials_b(g, b, n)
    total = 0.0
    for i in range(n):
        total = total + fp[i] * gq[i] - gp[i] * fq[i]
    return total


def hamiltonian_vf_b(f: Evaluator, b: Bindings, n: int) -> Tuple[List[Any], List[Any]]:
    """Components (u^i, u_i) = (d^i f, -d_i f)"""
    _, _, fq, fp = phase_partials_b(f, b, n)
    return list(fp), [-x for x in fq]


def _dim(at: Any, n: Optional[int] = None) -> int:
    if n is not None and at.n != n:
        raise ConfigError(f"Point dimension {at.n} does not match system dimension {n}")
    return at.n


# ---------------------------------------------------------------------------
# Hamilton equation and Poisson structure

def hamilton_rhs(sys: HamiltonianSystem, at: PhasePoint) -> Tuple[np.ndarray, np.ndarray]:
    """(qdot, pdot) = (d^i H, -d_i H)"""
    n = _dim(at, sys.n)
    _, _, hq, hp = phase_partials_b(sys.H.evaluate, at.bindings(), n)
    return np.array([primal(x) for x in hp]), -np.array([primal(x) for x in hq])


def poisson_bracket_V(f: ScalarField, g: ScalarField, at: PhasePoint) -> float:
    return primal(poisson_b(f.evaluate, g.evaluate, at.bindings(), at.n))


def hamiltonian_vf(f: ScalarField, at: PhasePoint) -> LiftedValues:
    """Vertical field d^i f d_i - d_i f d^i at a point"""
    ui, li = hamiltonian_vf_b(f.evaluate, at.bindings(), at.n)
    return LiftedValues(0, np.array([primal(x) for x in ui]), np.array([primal(x) for x in li]))


def iom_residual(sys: HamiltonianSystem, phi: ScalarField, at: PhasePoint) -> float:
    """d_t phi + {H, phi}; vanishes identically for an integral of motion"""
    n = _dim(at, sys.n)
    b = at.bindings()
    _, dt, _, _ = phase_partials_b(phi.evaluate, b, n)
    return primal(dt + poisson_b(sys.H.evaluate, phi.evaluate, b, n))


def flow_commutator_residual(f: ScalarField, g: ScalarField, at: PhasePoint) -> float:
    """Max-norm of [theta_f, theta_g] - theta_{f,g} over the (q, p) components"""
    n = at.n
    b = at.bindings()
    names = phase_frame(n)[1:]

    def components(func: Evaluator) -> Callable[[Bindings], List[Any]]:
        def comps(m: Bindings) -> List[Any]:
            ui, li = hamiltonian_vf_b(func, m, n)
            return ui + li
        return comps

    def jac(comps: Callable[[Bindings], List[Any]]) -> Tuple[List[Any], List[List[Any]]]:
        values = comps(b)
        rows = [differentiate(lambda m, k=k: comps(m)[k], b, names)[1] for k in range(2 * n)]
        return values, rows

    xf, jf = jac(components(f.evaluate))
    xg, jg = jac(components(g.evaluate))
    xfg = components(lambda m: poisson_b(f.evaluate, g.evaluate, m, n))(b)
    worst = 0.0
    for k in range(2 * n):
        bracket = sum(primal(xf[j]) * primal(jg[k][j]) - primal(xg[j]) * primal(jf[k][j]) for j in range(2 * n))
        worst = max(worst, abs(bracket - primal(xfg[k])))
    return worst


# ---------------------------------------------------------------------------
# symmetries and currents

def ham_symmetry_current(sys: HamiltonianSystem, v: VectorFieldV, sigma: Optional[ScalarField],
                         at: PhasePoint) -> float:
    """J = -p_i u^i + ut H + sigma"""
    n = _dim(at, sys.n)
    b = at.bindings()
    total = v.ut * primal(sys.H.evaluate(b)) if v.ut else 0.0
    for i in range(n):
        total -= at.p[i] * primal(v.ui[i].evaluate(b))
    if sigma is not None:
        total += primal(sigma.evaluate(b))
    return total


def symmetry_necessary_residual(v: VectorFieldV, at: PhasePoint) -> float:
    """d^i u_i + d_i u^i, which vanishes for every Hamiltonian symmetry"""
    n = at.n
    b = at.bindings()
    total = 0.0
    for i in range(n):
        _, _, uq, _ = phase_partials_b(v.ui[i].evaluate, b, n)
        _, _, _, lp = phase_partials_b(v.li[i].evaluate, b, n)
        total += primal(uq[i]) + primal(lp[i])
    return total


def inverse_noether(sys: HamiltonianSystem, phi: ScalarField, at: PhasePoint) -> InverseNoether:
    """Symmetry -theta_phi with sigma = phi - p_i d^i phi; its current equals phi"""
    n = _dim(at, sys.n)
    value, _, fq, fp = phase_partials_b(phi.evaluate, at.bindings(), n)
    ui = -np.array([primal(x) for x in fp])
    li = np.array([primal(x) for x in fq])
    sigma = primal(value) - float(np.dot(at.p, -ui))
    current = -float(np.dot(at.p, ui)) + sigma
    return InverseNoether(LiftedValues(0, ui, li), sigma, current)


def inverse_noether_field(phi: ScalarField, n: int, name: str = "") -> Tuple[VectorFieldV, ScalarField]:
    """The field -theta_phi and its sigma as evaluable fields"""
    frame = phase_frame(n)

    def upper(i: int) -> ScalarField:
        return ScalarField(frame, lambda m: -hamiltonian_vf_b(phi.evaluate, m, n)[0][i], {})

    def lower(i: int) -> ScalarField:
        return ScalarField(frame, lambda m: -hamiltonian_vf_b(phi.evaluate, m, n)[1][i], {})

    def sigma_body(m: Bindings) -> Any:
        value, _, _, fp = phase_partials_b(phi.evaluate, m, n)
        total = value
        for i in range(n):
            total = total - m[f"p{i + 1}"] * fp[i]
        return total

    label = name or phi.name
    field_ = VectorFieldV(0, tuple(upper(i) for i in range(n)), tuple(lower(i) for i in range(n)),
                          f"-theta({label})")
    return field_, ScalarField(frame, sigma_body, {}, f"sigma({label})")


def lift_symmetry(v: VectorFieldQ) -> VectorFieldV:
    """Canonical lift of v as a field on V*Q"""
    return lifted_field(v)


def hamiltonian_function_relative(sys: HamiltonianSystem, g: ReferenceFrame, at: PhasePoint) -> float:
    """H - p_i G^i"""
    _dim(at, sys.n)
    b = at.bindings()
    gamma = [primal(x) for x in frame_scalars(g, b)]
    return primal(sys.H.evaluate(b)) - float(np.dot(at.p, gamma))


# ---------------------------------------------------------------------------
# homogeneous formalism

def homogeneous_hamiltonian(sys: HamiltonianSystem, at: ExtendedPhasePoint) -> float:
    """H* = p0 + H"""
    _dim(at, sys.n)
    return at.p0 + primal(sys.H.evaluate(at.bindings()))


def homogeneous_field(sys: HamiltonianSystem) -> ScalarField:
    return ScalarField(extended_frame(sys.n), lambda m: m["p0"] + sys.H.evaluate(m), {}, "H*")


def poisson_bracket_T(f: ScalarField, g: ScalarField, at: ExtendedPhasePoint) -> float:
    """d^0 f d_t g - d^0 g d_t f + d^i f d_i g - d^i g d_i f"""
    n = at.n
    frame = extended_frame(n)
    b = at.bindings()
    _, df = differentiate(f.evaluate, b, frame)
    _, dg = differentiate(g.evaluate, b, frame)
    p0 = 1 + n
    total = primal(df[p0]) * primal(dg[0]) - primal(dg[p0]) * primal(df[0])
    for i in range(n):
        total += primal(df[p0 + 1 + i]) * primal(dg[1 + i]) - primal(dg[p0 + 1 + i]) * primal(df[1 + i])
    return total


# ---------------------------------------------------------------------------
# hyperregular Legendre correspondence

def _legendre_residual(lsys: LagrangianSystem, base: Bindings, qt: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    b = dict(base)
    b.update({f"qt{i + 1}": float(x) for i, x in enumerate(qt)})
    _, pi, hess = second_derivatives(lsys.L.evaluate, b, lsys.qt_names)
    return pi, hess


def _solve_velocity(lsys: LagrangianSystem, t: float, q: Sequence[float], p: Sequence[float],
                    guess: Optional[Sequence[float]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Damped Newton on pi(t, q, qt) = p; returns qt and the velocity Hessian there"""
    tol_cfg = config.get_tolerances()
    tol = float(tol_cfg.get("legendre_residual", 1e-12))
    max_iter = int(tol_cfg.get("legendre_max_iter", 50))
    n = lsys.n
    target = np.array(p, dtype=float)
    tol = max(tol, 4.0 * np.finfo(float).eps * (1.0 + float(np.max(np.abs(target)))))
    base = {**lsys.params, "t": float(t), **{f"q{i + 1}": float(x) for i, x in enumerate(q)}}
    qt = np.array(guess if guess is not None else p, dtype=float)
    if qt.shape != (n,):
        raise ConfigError(f"Velocity guess needs {n} entries")

    pi, hess = _legendre_residual(lsys, base, qt)
    res = pi - target
    norm = float(np.max(np.abs(res)))
    for iteration in range(max_iter + 1):
        if norm <= tol:
            logger.debug("Legendre inverse converged in %d iteration(s)", iteration)
            return qt, hess
        if iteration == max_iter:
            break
        det = float(np.linalg.det(hess))
        if _singular(det, hess):
            raise SingularMatrixError(f"Legendre map Jacobian is singular (det={det:.3e})")
        step = np.linalg.solve(hess, res)
        scale = 1.0
        while True:
            trial = qt - scale * step
            pi_t, hess_t = _legendre_residual(lsys, base, trial)
            res_t = pi_t - target
            norm_t = float(np.max(np.abs(res_t)))
            if norm_t < norm or scale < 1e-4:
                break
            scale *= 0.5
        qt, hess, res, norm = trial, hess_t, res_t, norm_t
    raise ConvergenceError(f"Legendre inverse did not converge in {max_iter} iterations", norm)


def legendre_inverse(lsys: LagrangianSystem, at: PhasePoint, guess: Optional[Sequence[float]] = None) -> JetPoint:
    """Velocity point whose momenta equal at.p"""
    if at.n != lsys.n:
        raise ConfigError(f"Point dimension {at.n} does not match system dimension {lsys.n}")
    qt, _ = _solve_velocity(lsys, at.t, at.q, at.p, guess)
    return JetPoint(at.t, at.q, tuple(float(x) for x in qt))


def associated_hamiltonian(lsys: LagrangianSystem) -> HamiltonianSystem:
    """H(t, q, p) = p qt* - L(t, q, qt*) with qt* from the inverse Legendre map.

    Derivatives pass through one Newton correction taken in dual arithmetic,
    so the velocity carries exact first derivatives and H exact first and
    second derivatives.
    """
    n = lsys.n

    def body(m: Bindings) -> Any:
        t = primal(m["t"])
        q = [primal(m[f"q{i + 1}"]) for i in range(n)]
        p = [primal(m[f"p{i + 1}"]) for i in range(n)]
        qt0, hess = _solve_velocity(lsys, t, q, p)
        inv = np.linalg.inv(hess)
        jet = {**lsys.params, **{k: v for k, v in m.items()}}
        jet.update({f"qt{i + 1}": float(qt0[i]) for i in range(n)})
        _, pi = differentiate(lsys.L.evaluate, jet, lsys.qt_names)
        qt = []
        for i in range(n):
            corr: Any = float(qt0[i])
            for j in range(n):
                corr = corr - float(inv[i, j]) * (pi[j] - m[f"p{j + 1}"])
            qt.append(corr)
        jet.update({f"qt{i + 1}": qt[i] for i in range(n)})
        total = -lsys.L.evaluate(jet)
        for i in range(n):
            total = total + m[f"p{i + 1}"] * qt[i]
        return total

    h = ScalarField(phase_frame(n), body, {}, f"H[{lsys.name or 'L'}]")
    return HamiltonianSystem(n, h, dict(lsys.params), f"{lsys.name}:associated")
