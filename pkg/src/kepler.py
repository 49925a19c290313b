"""
Global Kepler system
Built-in Lagrangian and Hamiltonian, integrals of motion, region
classification, momentum maps, Lie algebra structure checks and the
action-angle charts on the bound region U- and the unbound region U+.

Chart on U- : (I, x1, gamma, alpha) with gamma = atan2(x2, x3)
Chart on U+ : (I, x1, lambda, tau) with lambda = artanh(x3 / x2)

The cyclic coordinates alpha and tau are flow times of the action measured
from a section through the orbit chosen so that they Poisson-commute with
x1 and the angle. The chart functions below are written once over plain or
dual scalars, so the bivector check differentiates straight through them.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np

from config import config
from diffcore import ScalarField, asinh, atan2, atanh, differentiate, sqrt
from errors import ChartDomainError, ConfigError, ConvergenceError, DomainError, ExcludedRegionError
from exprdsl import primal
from geometry import Jet2Point, PhasePoint, VectorFieldQ, VectorFieldV, config_frame, jet_frame, phase_frame
from hamiltonian import HamiltonianSystem, inverse_noether_field, poisson_b
from lagrangian import LagrangianSystem, noether_current, on_shell, symmetry_residual, total_derivative

logger = logging.getLogger(__name__)

# The U+ cyclic coordinate is the hyperbolic eccentric-anomaly form
# s - a^(3/2) e sinh(a^(-3/2) s) multiplied by this factor, so that it
# advances at unit rate along the flow.
TAU_ORIENTATION = -1

# Below this eccentricity the perihelion direction is undefined
CIRCULAR_ECCENTRICITY = 1e-12

Bindings = Mapping[str, Any]


class Region(enum.Enum):
    MINUS = "minus"
    PLUS = "plus"
    EXCLUDED = "excluded"


@dataclass(frozen=True)
class KeplerInvariants:
    H: float
    M12: float
    A1: float
    A2: float
    Asq: float
    Msq: float
    a: Optional[float]
    e: float

    def to_dict(self) -> Dict[str, Any]:
        return {"H": self.H, "M12": self.M12, "A1": self.A1, "A2": self.A2, "Asq": self.Asq,
                "Msq": self.Msq, "a": self.a, "e": self.e}


@dataclass(frozen=True)
class ActionAngleState:
    """Chart values; angle is gamma on U- and lambda on U+, cyclic is alpha or tau"""
    region: Region
    I: float
    x1: float
    angle: float
    cyclic: float
    period: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        names = ("gamma", "alpha") if self.region is Region.MINUS else ("lambda", "tau")
        return {"region": self.region.value, "I": self.I, "x1": self.x1,
                names[0]: self.angle, names[1]: self.cyclic, "period": self.period}


@dataclass(frozen=True)
class KeplerLagrangianReport:
    """Worst residuals of the velocity-space Kepler identities at one point"""
    symmetry: float
    current: float
    runge_lenz: float

    @property
    def worst(self) -> float:
        return max(self.symmetry, self.current, self.runge_lenz)


# ---------------------------------------------------------------------------
# expression texts

def _r2(prefix: str, dim: int) -> str:
    return " + ".join(f"{prefix}{i}^2" for i in range(1, dim + 1))


def _dot(a: str, b: str, dim: int) -> str:
    return " + ".join(f"{a}{i}*{b}{i}" for i in range(1, dim + 1))


def _check_dim(dim: int) -> None:
    if dim not in (2, 3):
        raise ConfigError(f"Kepler system is available in dimension 2 or 3, got {dim}")


def momentum_text(a: int, b: int, vel: str = "p") -> str:
    """M^a_b = q^a v_b - q^b v_a"""
    return f"q{a}*{vel}{b} - q{b}*{vel}{a}"


def runge_lenz_text(a: int, dim: int, vel: str = "p") -> str:
    """A^a = q^a v^2 - v_a (v.q) - q^a / r"""
    return (f"q{a}*({_r2(vel, dim)}) - {vel}{a}*({_dot(vel, 'q', dim)})"
            f" - q{a}/sqrt({_r2('q', dim)})")


def kepler_system(dim: int = 2) -> Tuple[LagrangianSystem, HamiltonianSystem]:
    """L = qt^2/2 + 1/r and H = p^2/2 - 1/r"""
    _check_dim(dim)
    lsys = LagrangianSystem.from_text(dim, f"0.5*({_r2('qt', dim)}) + 1/sqrt({_r2('q', dim)})",
                                      name=f"kepler{dim}d")
    hsys = HamiltonianSystem.from_text(dim, f"0.5*({_r2('p', dim)}) - 1/sqrt({_r2('q', dim)})",
                                       name=f"kepler{dim}d")
    return lsys, hsys


def _pairs(dim: int) -> List[Tuple[int, int]]:
    return [(a, b) for a in range(1, dim + 1) for b in range(a + 1, dim + 1)]


def integral_fields(dim: int = 2) -> Dict[str, ScalarField]:
    """H, the orbital momenta M^a_b and the Runge-Lenz components A^a on the phase space"""
    _check_dim(dim)
    frame = phase_frame(dim)
    _, hsys = kepler_system(dim)
    fields = {"H": hsys.H}
    for a, b in _pairs(dim):
        fields[f"M{a}{b}"] = ScalarField.from_text(momentum_text(a, b), frame, name=f"M{a}{b}")
    for a in range(1, dim + 1):
        fields[f"A{a}"] = ScalarField.from_text(runge_lenz_text(a, dim), frame, name=f"A{a}")
    return fields


def orbital_momenta_3d() -> Dict[str, ScalarField]:
    return {k: v for k, v in integral_fields(3).items() if k.startswith("M")}


def runge_lenz_3d() -> Dict[str, ScalarField]:
    return {k: v for k, v in integral_fields(3).items() if k.startswith("A")}


def rotation_fields(dim: int = 2) -> List[Tuple[str, VectorFieldQ]]:
    """v^a_b = q^b d_a - q^a d_b for a < b"""
    _check_dim(dim)
    frame = config_frame(dim)
    out = []
    for a, b in _pairs(dim):
        comps = []
        for i in range(1, dim + 1):
            text = f"q{b}" if i == a else f"-q{a}" if i == b else "0"
            comps.append(ScalarField.from_text(text, frame))
        out.append((f"v{a}{b}", VectorFieldQ(0, tuple(comps), f"v{a}{b}")))
    return out


def runge_lenz_fields(dim: int = 2) -> List[Tuple[str, VectorFieldV, ScalarField]]:
    """Vertical Hamiltonian symmetries -theta_A with the sigma making their currents A^a"""
    fields = integral_fields(dim)
    out = []
    for a in range(1, dim + 1):
        v, sigma = inverse_noether_field(fields[f"A{a}"], dim, f"A{a}")
        out.append((f"A{a}", v, sigma))
    return out


# ---------------------------------------------------------------------------
# invariants and regions (planar)

def _require_planar(at: PhasePoint) -> None:
    if at.n != 2:
        raise ConfigError(f"Planar Kepler operations need a 2-dimensional point, got {at.n}")


def _basics_b(b: Bindings) -> Dict[str, Any]:
    q1, q2, p1, p2 = b["q1"], b["q2"], b["p1"], b["p2"]
    rsq = q1 * q1 + q2 * q2
    if primal(rsq) == 0.0:
        raise DomainError("Kepler potential is singular at r = 0")
    r = sqrt(rsq)
    psq = p1 * p1 + p2 * p2
    pq = p1 * q1 + p2 * q2
    return {
        "r": r, "pq": pq,
        "H": 0.5 * psq - 1.0 / r,
        "M": q1 * p2 - q2 * p1,
        "A1": q1 * psq - p1 * pq - q1 / r,
        "A2": q2 * psq - p2 * pq - q2 / r,
    }


def _excluded_eps(eps: Optional[float]) -> float:
    return float(config.get("tolerances.excluded_eps", 1e-10)) if eps is None else float(eps)


def _region_of(h: float, m: float, eps: float) -> Region:
    if abs(m) <= eps or abs(h) <= eps:
        return Region.EXCLUDED
    return Region.MINUS if h < 0 else Region.PLUS


def invariants(at: PhasePoint) -> KeplerInvariants:
    _require_planar(at)
    v = {k: primal(x) for k, x in _basics_b(at.bindings()).items()}
    h, m = v["H"], v["M"]
    asq = v["A1"] ** 2 + v["A2"] ** 2
    a = None
    if abs(h) > _excluded_eps(None):
        a = -1.0 / (2.0 * h) if h < 0 else 1.0 / (2.0 * h)
    return KeplerInvariants(h, m, v["A1"], v["A2"], asq, m * m, a, math.sqrt(asq))


def classify(at: PhasePoint, eps: Optional[float] = None) -> Region:
    """U- (H < 0), U+ (H > 0) or excluded (M12 = 0 or H = 0 within eps)"""
    _require_planar(at)
    v = _basics_b(at.bindings())
    return _region_of(primal(v["H"]), primal(v["M"]), _excluded_eps(eps))


def _region_b(v: Mapping[str, Any]) -> Region:
    h, m = primal(v["H"]), primal(v["M"])
    region = _region_of(h, m, _excluded_eps(None))
    if region is Region.EXCLUDED:
        raise ExcludedRegionError(m, h)
    return region


def _scaled_b(v: Mapping[str, Any], region: Region) -> Tuple[Any, Any]:
    s = sqrt(-2.0 * v["H"]) if region is Region.MINUS else sqrt(2.0 * v["H"])
    return v["A1"] / s, v["A2"] / s


def _momentum_map_b(v: Mapping[str, Any], region: Region) -> Tuple[Any, Any, Any]:
    k1, k2 = _scaled_b(v, region)
    return -k1, -k2, -v["M"]


def scaled_integrals(at: PhasePoint) -> Tuple[float, float]:
    """(L1, L2) = A / sqrt(-2H) on U-, (K1, K2) = A / sqrt(2H) on U+"""
    _require_planar(at)
    v = _basics_b(at.bindings())
    k1, k2 = _scaled_b(v, _region_b(v))
    return primal(k1), primal(k2)


def momentum_map(at: PhasePoint) -> Tuple[float, float, float]:
    """(-L1, -L2, -M12) on U-, (-K1, -K2, -M12) on U+"""
    _require_planar(at)
    v = _basics_b(at.bindings())
    return tuple(primal(x) for x in _momentum_map_b(v, _region_b(v)))


def region_fields(region: Region) -> Dict[str, ScalarField]:
    """Scaled integrals and momentum map components as fields on one region"""
    if region is Region.EXCLUDED:
        raise ConfigError("The excluded region carries no scaled integrals")
    frame = phase_frame(2)
    names = ("L1", "L2") if region is Region.MINUS else ("K1", "K2")

    def scaled(i: int):
        return lambda m: _scaled_b(_basics_b(m), region)[i]

    def mapped(i: int):
        return lambda m: _momentum_map_b(_basics_b(m), region)[i]

    out = {names[i]: ScalarField(frame, scaled(i), {}, names[i]) for i in range(2)}
    out.update({f"x{i + 1}": ScalarField(frame, mapped(i), {}, f"x{i + 1}") for i in range(3)})
    return out


# ---------------------------------------------------------------------------
# Lie algebra structure

def _bracket(f, g, b: Bindings) -> float:
    return primal(poisson_b(f, g, b, 2))


def structure_residuals(at: PhasePoint) -> Dict[str, float]:
    """Bracket relations among the integrals minus their closed forms.

    {M12, A_i} = eta_2i A1 - eta_1i A2 and {A1, A2} = 2 H M12 everywhere;
    {L1, L2} = -M12 on U-, {K1, K2} = M12 on U+, with M12 acting on the
    scaled pair as on A.
    """
    _require_planar(at)
    b = at.bindings()
    base = _basics_b(b)
    region = _region_b(base)
    fields = integral_fields(2)
    m12, a1, a2 = fields["M12"].evaluate, fields["A1"].evaluate, fields["A2"].evaluate
    h = primal(base["H"])
    mv, a1v, a2v = primal(base["M"]), primal(base["A1"]), primal(base["A2"])
    out = {
        "{M12,A1}": _bracket(m12, a1, b) + a2v,
        "{M12,A2}": _bracket(m12, a2, b) - a1v,
        "{A1,A2}": _bracket(a1, a2, b) - 2.0 * h * mv,
    }
    rf = region_fields(region)
    n1, n2 = ("L1", "L2") if region is Region.MINUS else ("K1", "K2")
    s1, s2 = rf[n1].evaluate, rf[n2].evaluate
    s1v, s2v = primal(s1(b)), primal(s2(b))
    sign = -1.0 if region is Region.MINUS else 1.0
    out[f"{{M12,{n1}}}"] = _bracket(m12, s1, b) + s2v
    out[f"{{M12,{n2}}}"] = _bracket(m12, s2, b) - s1v
    out[f"{{{n1},{n2}}}"] = _bracket(s1, s2, b) - sign * mv
    return out


def casimir_residual(at: PhasePoint) -> float:
    """M^2 + L^2 + 1/(2H) on U-, K^2 - M^2 - 1/(2H) on U+"""
    _require_planar(at)
    v = _basics_b(at.bindings())
    region = _region_b(v)
    k1, k2 = (primal(x) for x in _scaled_b(v, region))
    m, h = primal(v["M"]), primal(v["H"])
    if region is Region.MINUS:
        return m * m + k1 * k1 + k2 * k2 + 1.0 / (2.0 * h)
    return k1 * k1 + k2 * k2 - m * m - 1.0 / (2.0 * h)


def lie_poisson_residual(at: PhasePoint) -> float:
    """Max deviation of {x_i, x_j} from the Lie-Poisson bivector on the momentum-map base"""
    _require_planar(at)
    b = at.bindings()
    region = _region_b(_basics_b(b))
    rf = region_fields(region)
    x = [rf[f"x{i}"].evaluate for i in (1, 2, 3)]
    xv = [primal(f(b)) for f in x]
    s3 = 1.0 if region is Region.MINUS else -1.0
    return max(abs(_bracket(x[0], x[1], b) - s3 * xv[2]),
               abs(_bracket(x[1], x[2], b) - xv[0]),
               abs(_bracket(x[2], x[0], b) - xv[1]))


# ---------------------------------------------------------------------------
# action-angle charts

def eccentric_anomaly(r: float, a: float, e: float, outgoing: bool = True, kind: str = "elliptic",
                      seed: Optional[float] = None) -> float:
    """Solve r = a(1 - e cos E) or r = a(e cosh E - 1) for E >= 0, negated when incoming.

    Newton steps that leave the monotone bracket fall back to bisection.
    """
    tol = float(config.get("tolerances.anomaly_tol", 1e-13))
    if kind == "elliptic":
        if not 0.0 <= e < 1.0:
            raise ConfigError(f"Elliptic anomaly needs 0 <= e < 1, got {e}")
        lo, hi = 0.0, math.pi

        def g(x: float) -> Tuple[float, float]:
            return a * (1.0 - e * math.cos(x)) - r, a * e * math.sin(x)
    elif kind == "hyperbolic":
        if e <= 1.0:
            raise ConfigError(f"Hyperbolic anomaly needs e > 1, got {e}")
        lo, hi = 0.0, 1.0
        if r / a + 1.0 >= e:
            hi = math.acosh((r / a + 1.0) / e) + 1.0

        def g(x: float) -> Tuple[float, float]:
            return a * (e * math.cosh(x) - 1.0) - r, a * e * math.sinh(x)
    else:
        raise ConfigError(f"Unknown orbit kind {kind!r}")

    g_lo, g_hi = g(lo)[0], g(hi)[0]
    if g_lo > 0.0 or g_hi < 0.0:
        raise ChartDomainError(f"radius inside the {kind} orbit range", r)
    if g_lo == 0.0 or (kind == "elliptic" and e == 0.0):
        return 0.0

    x = min(max(seed if seed is not None else 0.5 * (lo + hi), lo), hi)
    for _ in range(200):
        val, slope = g(x)
        if val > 0.0:
            hi = x
        else:
            lo = x
        step = val / slope if slope != 0.0 else math.inf
        nxt = x - step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - x) <= tol * max(1.0, abs(x)) or hi - lo <= tol:
            x = nxt
            break
        x = nxt
    else:
        raise ConvergenceError("Eccentric anomaly iteration did not converge", abs(g(x)[0]))
    return x if outgoing else -x


def _chart_b(b: Bindings) -> Tuple[Region, Any, Any, Any, Any, Optional[float]]:
    """(region, I, x1, angle, cyclic, period) over plain or dual bindings"""
    v = _basics_b(b)
    region = _region_b(v)
    x1, x2, x3 = _momentum_map_b(v, region)
    m, pq, r = v["M"], v["pq"], v["r"]
    a1, a2 = v["A1"], v["A2"]
    x2v, x3v = primal(x2), primal(x3)

    if region is Region.MINUS:
        if x2v * x2v + x3v * x3v <= 0.0:
            raise ChartDomainError("x2^2 + x3^2 > 0", x2v * x2v + x3v * x3v)
        action = -0.5 / (x1 * x1 + x2 * x2 + x3 * x3)
        # +0.0 keeps a signed-zero x2 from giving -pi
        angle = atan2(x2 + 0.0, x3)
        a = -0.5 / action
        root = sqrt(a)
        a32 = a * root
        ecc = math.hypot(primal(a1), primal(a2))
        if ecc < CIRCULAR_ECCENTRICITY:
            phi = atan2(b["q2"], b["q1"])
            cyclic = a32 * phi if primal(m) > 0 else a32 * (math.pi - phi)
        else:
            big_e = atan2(pq / root, 1.0 - r / a)
            cyclic = a32 * (big_e - pq / root + atan2(root * a2, m * a1))
        period = 2.0 * math.pi * primal(a32)
        return region, action, x1, angle, cyclic, period

    if x2v <= 0.0:
        raise ChartDomainError("x2 > 0", x2v)
    if x2v * x2v <= x3v * x3v:
        raise ChartDomainError("x2^2 > x3^2", x2v * x2v - x3v * x3v)
    action = 0.5 / (x1 * x1 + x2 * x2 - x3 * x3)
    angle = atanh(x3 / x2)
    a = 0.5 / action
    root = sqrt(a)
    a32 = a * root
    ecc = sqrt(a1 * a1 + a2 * a2)
    big_f = asinh(pq / (root * ecc))
    source_form = a32 * (big_f - pq / root)
    cyclic = TAU_ORIENTATION * source_form + a32 * atanh(m * a1 / (root * a2))
    return region, action, x1, angle, cyclic, None


def action_angle(at: PhasePoint) -> ActionAngleState:
    """Action-angle chart values at a phase point of U- or U+"""
    _require_planar(at)
    region, action, x1, angle, cyclic, period = _chart_b(at.bindings())
    return ActionAngleState(region, primal(action), primal(x1), primal(angle), primal(cyclic), period)


def _chart_jacobian(at: PhasePoint) -> Tuple[Region, np.ndarray]:
    b = at.bindings()
    names = phase_frame(2)[1:]
    region = _chart_b(b)[0]
    rows = []
    for k in range(1, 5):
        _, d = differentiate(lambda m, k=k: _chart_b(m)[k], b, names)
        rows.append([primal(x) for x in d])
    return region, np.array(rows)


# {q_i, p_j} = -delta_ij in (q1, q2, p1, p2) order
_CANONICAL = np.block([[np.zeros((2, 2)), -np.eye(2)], [np.eye(2), np.zeros((2, 2))]])


def _block_form(region: Region) -> np.ndarray:
    """Target brackets among (I, x1, angle, cyclic)"""
    target = np.zeros((4, 4))
    target[0, 3], target[3, 0] = 1.0, -1.0
    s = 1.0 if region is Region.MINUS else -1.0
    target[1, 2], target[2, 1] = s, -s
    return target


def bivector_residual(at: PhasePoint) -> float:
    """Max deviation of the pushed-forward canonical bivector from the block form.

    On U- the target is d_I ^ d_alpha + d_x1 ^ d_gamma; on U+ it is
    d_I ^ d_tau - d_x1 ^ d_lambda.
    """
    _require_planar(at)
    region, jac = _chart_jacobian(at)
    pushed = jac @ _CANONICAL @ jac.T
    return float(np.max(np.abs(pushed - _block_form(region))))


def _closed_form_field(state: ActionAngleState, index: int) -> np.ndarray:
    """theta_{x_i} in chart components (d_I, d_x1, d_angle, d_cyclic)"""
    i, x1, ang = state.I, state.x1, state.angle
    if state.region is Region.MINUS:
        if index == 1:
            return np.array([0.0, 0.0, 1.0, 0.0])
        rad = math.sqrt(-1.0 / (2.0 * i) - x1 * x1)
        s, c = math.sin(ang), math.cos(ang)
        if index == 2:
            return np.array([0.0, -rad * c, -x1 * s / rad, s / (4.0 * i * i * rad)])
        return np.array([0.0, rad * s, -x1 * c / rad, c / (4.0 * i * i * rad)])
    if index == 1:
        return np.array([0.0, 0.0, -1.0, 0.0])
    rho = math.sqrt(1.0 / (2.0 * i) - x1 * x1)
    ch, sh = math.cosh(ang), math.sinh(ang)
    if index == 2:
        return np.array([0.0, rho * sh, x1 * ch / rho, -ch / (4.0 * i * i * rho)])
    return np.array([0.0, rho * ch, x1 * sh / rho, -sh / (4.0 * i * i * rho)])


def chart_vector_field_residual(at: PhasePoint, index: int) -> float:
    """Pushforward of theta_{x_index} through the chart against its closed form"""
    if index not in (1, 2, 3):
        raise ConfigError(f"Momentum map index must be 1, 2 or 3, got {index}")
    _require_planar(at)
    region, jac = _chart_jacobian(at)
    b = at.bindings()
    xf = region_fields(region)[f"x{index}"]
    _, d = differentiate(xf.evaluate, b, phase_frame(2)[1:])
    grad_x = np.array([primal(x) for x in d])
    # theta_f has (q, p) components (d^i f, -d_i f)
    theta = np.concatenate([grad_x[2:], -grad_x[:2]])
    pushed = jac @ theta
    return float(np.max(np.abs(pushed - _closed_form_field(action_angle(at), index))))


def orbit_table(traj) -> List[Tuple[float, float, float, float, float]]:
    """Rows (t, cyclic, I, x1, angle) along a planar Hamiltonian trajectory, cyclic unwrapped"""
    if traj.kind != "hamiltonian" or traj.n != 2:
        raise ConfigError("Orbit tables need a planar Hamiltonian trajectory")
    states = [action_angle(pt) for pt in traj.points()]
    regions = {s.region for s in states}
    if len(regions) != 1:
        raise ChartDomainError("trajectory stays in one region", float(len(regions)))
    cyclic = np.array([s.cyclic for s in states])
    period = states[0].period
    if period is not None:
        cyclic = np.unwrap(cyclic, period=period)
    return [(float(t), float(c), s.I, s.x1, s.angle) for t, c, s in zip(traj.times, cyclic, states)]


# ---------------------------------------------------------------------------
# velocity-space checks

def lagrangian_kepler_checks(at: Jet2Point) -> KeplerLagrangianReport:
    """Rotations are exact symmetries with currents M^a_b; A^a is conserved on shell"""
    dim = at.n
    _check_dim(dim)
    lsys, _ = kepler_system(dim)
    frame = jet_frame(dim)
    jet = at.jet
    sym = cur = 0.0
    for (a, b), (_, v) in zip(_pairs(dim), rotation_fields(dim)):
        sym = max(sym, abs(symmetry_residual(lsys, v, None, at)))
        m_ab = ScalarField.from_text(momentum_text(a, b, "qt"), frame)
        cur = max(cur, abs(noether_current(lsys, v, jet) - primal(m_ab.evaluate(jet))))
    shell = on_shell(lsys, jet)
    rl = 0.0
    for a in range(1, dim + 1):
        a_field = ScalarField.from_text(runge_lenz_text(a, dim, "qt"), frame)
        rl = max(rl, abs(total_derivative(a_field.evaluate, shell)))
    return KeplerLagrangianReport(sym, cur, rl)
