"""
Geometry of the velocity and phase spaces
Evaluation points, reference frames, vector fields on Q and V*Q, jet
prolongation and the canonical lift.

All bundles here are trivial over the time axis, so one global chart is used:
(t, q1..qn) on Q, (t, q, qt) on J1Q, (t, q, qt, qtt) on J2Q, (t, q, p) on V*Q
and (t, q, p0, p) on T*Q.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from diffcore import ScalarField, differentiate
from errors import ConfigError
from exprdsl import primal


def config_frame(n: int) -> Tuple[str, ...]:
    return ("t",) + tuple(f"q{i}" for i in range(1, n + 1))


def jet_frame(n: int) -> Tuple[str, ...]:
    return config_frame(n) + tuple(f"qt{i}" for i in range(1, n + 1))


def jet2_frame(n: int) -> Tuple[str, ...]:
    return jet_frame(n) + tuple(f"qtt{i}" for i in range(1, n + 1))


def phase_frame(n: int) -> Tuple[str, ...]:
    return config_frame(n) + tuple(f"p{i}" for i in range(1, n + 1))


def extended_frame(n: int) -> Tuple[str, ...]:
    return config_frame(n) + ("p0",) + tuple(f"p{i}" for i in range(1, n + 1))


def _vector(values: Sequence[float], label: str) -> Tuple[float, ...]:
    out = tuple(float(v) for v in values)
    if not all(math.isfinite(v) for v in out):
        raise ConfigError(f"Non-finite entry in {label}: {out}")
    return out


def _block(prefix: str, values: Sequence[Any]) -> Dict[str, Any]:
    return {f"{prefix}{i}": v for i, v in enumerate(values, start=1)}


@dataclass(frozen=True)
class JetPoint:
    """Point (t, q, qt) of the velocity space"""
    t: float
    q: Tuple[float, ...]
    qt: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "q", _vector(self.q, "q"))
        object.__setattr__(self, "qt", _vector(self.qt, "qt"))
        if len(self.q) < 1 or len(self.q) != len(self.qt):
            raise ConfigError(f"Inconsistent jet dimensions: q={len(self.q)}, qt={len(self.qt)}")

    @property
    def n(self) -> int:
        return len(self.q)

    def bindings(self) -> Dict[str, Any]:
        return {"t": self.t, **_block("q", self.q), **_block("qt", self.qt)}


@dataclass(frozen=True)
class Jet2Point:
    """Point (t, q, qt, qtt) of the second jet space"""
    t: float
    q: Tuple[float, ...]
    qt: Tuple[float, ...]
    qtt: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "q", _vector(self.q, "q"))
        object.__setattr__(self, "qt", _vector(self.qt, "qt"))
        object.__setattr__(self, "qtt", _vector(self.qtt, "qtt"))
        if len(self.q) < 1 or not len(self.q) == len(self.qt) == len(self.qtt):
            raise ConfigError("Inconsistent second-jet dimensions")

    @property
    def n(self) -> int:
        return len(self.q)

    @property
    def jet(self) -> JetPoint:
        return JetPoint(self.t, self.q, self.qt)

    def bindings(self) -> Dict[str, Any]:
        return {**self.jet.bindings(), **_block("qtt", self.qtt)}


@dataclass(frozen=True)
class PhasePoint:
    """Point (t, q, p) of the phase space V*Q"""
    t: float
    q: Tuple[float, ...]
    p: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "q", _vector(self.q, "q"))
        object.__setattr__(self, "p", _vector(self.p, "p"))
        if len(self.q) < 1 or len(self.q) != len(self.p):
            raise ConfigError(f"Inconsistent phase dimensions: q={len(self.q)}, p={len(self.p)}")

    @property
    def n(self) -> int:
        return len(self.q)

    def bindings(self) -> Dict[str, Any]:
        return {"t": self.t, **_block("q", self.q), **_block("p", self.p)}

    def state(self) -> np.ndarray:
        return np.array(self.q + self.p)


@dataclass(frozen=True)
class ExtendedPhasePoint:
    """Point (t, q, p0, p) of the homogeneous phase space T*Q"""
    t: float
    q: Tuple[float, ...]
    p: Tuple[float, ...]
    p0: float

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "q", _vector(self.q, "q"))
        object.__setattr__(self, "p", _vector(self.p, "p"))
        object.__setattr__(self, "p0", float(self.p0))
        if len(self.q) < 1 or len(self.q) != len(self.p):
            raise ConfigError("Inconsistent extended phase dimensions")

    @property
    def n(self) -> int:
        return len(self.q)

    @property
    def phase(self) -> PhasePoint:
        return PhasePoint(self.t, self.q, self.p)

    def bindings(self) -> Dict[str, Any]:
        return {**self.phase.bindings(), "p0": self.p0}


def _check_frame(fields: Sequence[ScalarField], frame: Tuple[str, ...], label: str) -> None:
    for f in fields:
        extra = set(f.frame) - set(frame)
        if extra:
            raise ConfigError(f"{label} component {f.name!r} depends on {sorted(extra)} outside {frame}")


def _check_ut(ut: int) -> int:
    if ut not in (0, 1):
        raise ConfigError(f"Temporal component must be 0 or 1, got {ut!r}")
    return int(ut)


def _sum_field(a: ScalarField, b: ScalarField, frame: Tuple[str, ...]) -> ScalarField:
    return ScalarField(frame, lambda m: a.evaluate(m) + b.evaluate(m), {}, f"({a.name}) + ({b.name})")


@dataclass(frozen=True)
class VectorFieldQ:
    """Vector field ut d_t + ui d_i on Q with ut in {0, 1}"""
    ut: int
    ui: Tuple[ScalarField, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "ut", _check_ut(self.ut))
        object.__setattr__(self, "ui", tuple(self.ui))
        _check_frame(self.ui, config_frame(self.n), "Vector field")

    @classmethod
    def from_texts(cls, ut: int, texts: Sequence[str], params: Optional[Mapping[str, float]] = None,
                   name: str = "") -> "VectorFieldQ":
        frame = config_frame(len(texts))
        return cls(ut, tuple(ScalarField.from_text(s, frame, params) for s in texts), name)

    @classmethod
    def zero(cls, n: int) -> "VectorFieldQ":
        frame = config_frame(n)
        return cls(0, tuple(ScalarField.constant(0.0, frame) for _ in range(n)), "zero")

    @property
    def n(self) -> int:
        return len(self.ui)

    @property
    def vertical(self) -> bool:
        return self.ut == 0

    def plus(self, other: "VectorFieldQ") -> "VectorFieldQ":
        """Sum of two fields; temporal parts must add up to 0 or 1"""
        frame = config_frame(self.n)
        return VectorFieldQ(self.ut + other.ut,
                            tuple(_sum_field(a, b, frame) for a, b in zip(self.ui, other.ui)),
                            f"{self.name}+{other.name}")


@dataclass(frozen=True)
class VectorFieldV:
    """Vector field ut d_t + ui d_i + li d^i on V*Q with ut in {0, 1}"""
    ut: int
    ui: Tuple[ScalarField, ...]
    li: Tuple[ScalarField, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "ut", _check_ut(self.ut))
        object.__setattr__(self, "ui", tuple(self.ui))
        object.__setattr__(self, "li", tuple(self.li))
        if len(self.ui) != len(self.li):
            raise ConfigError("Vector field on V*Q needs as many lowered as upper components")
        _check_frame(self.ui + self.li, phase_frame(self.n), "Phase vector field")

    @classmethod
    def from_texts(cls, ut: int, upper: Sequence[str], lower: Sequence[str],
                   params: Optional[Mapping[str, float]] = None, name: str = "") -> "VectorFieldV":
        frame = phase_frame(len(upper))
        return cls(ut,
                   tuple(ScalarField.from_text(s, frame, params) for s in upper),
                   tuple(ScalarField.from_text(s, frame, params) for s in lower),
                   name)

    @property
    def n(self) -> int:
        return len(self.ui)


@dataclass(frozen=True)
class ReferenceFrame:
    """Connection d_t + G^i d_i on Q -> R"""
    Gi: Tuple[ScalarField, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "Gi", tuple(self.Gi))
        _check_frame(self.Gi, config_frame(self.n), "Reference frame")

    @classmethod
    def from_texts(cls, texts: Sequence[str], params: Optional[Mapping[str, float]] = None,
                   name: str = "") -> "ReferenceFrame":
        frame = config_frame(len(texts))
        return cls(tuple(ScalarField.from_text(s, frame, params) for s in texts), name)

    @classmethod
    def rest(cls, n: int) -> "ReferenceFrame":
        frame = config_frame(n)
        return cls(tuple(ScalarField.constant(0.0, frame) for _ in range(n)), "rest")

    @property
    def n(self) -> int:
        return len(self.Gi)

    def as_vector_field(self) -> VectorFieldQ:
        return VectorFieldQ(1, self.Gi, self.name)

    def minus(self, other: "ReferenceFrame") -> VectorFieldQ:
        """Vertical field G - G'"""
        frame = config_frame(self.n)
        comps = tuple(ScalarField(frame, (lambda a, b: lambda m: a.evaluate(m) - b.evaluate(m))(a, b), {},
                                  f"({a.name}) - ({b.name})")
                      for a, b in zip(self.Gi, other.Gi))
        return VectorFieldQ(0, comps, f"{self.name}-{other.name}")


@dataclass(frozen=True)
class Prolongation:
    """Values of the first jet prolongation of a field on Q"""
    ut: int
    ui: np.ndarray
    dtui: np.ndarray


@dataclass(frozen=True)
class LiftedValues:
    """Component values (ut, ui, li) of a field on V*Q"""
    ut: int
    ui: np.ndarray
    li: np.ndarray


# ---------------------------------------------------------------------------
# operations generic over plain and dual bindings

def prolong_scalars(v: VectorFieldQ, b: Mapping[str, Any]) -> Tuple[List[Any], List[Any]]:
    """Components u^i and d_t u^i = d_t u^i + qt^j d_j u^i at bindings containing t, q, qt"""
    frame = config_frame(v.n)
    values, totals = [], []
    for comp in v.ui:
        value, d = differentiate(comp.evaluate, b, frame)
        total = d[0]
        for j in range(v.n):
            total = total + b[f"qt{j + 1}"] * d[j + 1]
        values.append(value)
        totals.append(total)
    return values, totals


def lift_scalars(v: VectorFieldQ, b: Mapping[str, Any]) -> Tuple[List[Any], List[Any]]:
    """Components u^i and lowered u_i = -p_j d_i u^j at bindings containing t, q, p"""
    frame = config_frame(v.n)
    values, lowered = [], [0.0] * v.n
    for j, comp in enumerate(v.ui):
        value, d = differentiate(comp.evaluate, b, frame)
        values.append(value)
        for i in range(v.n):
            lowered[i] = lowered[i] - b[f"p{j + 1}"] * d[i + 1]
    return values, lowered


def frame_scalars(g: ReferenceFrame, b: Mapping[str, Any]) -> List[Any]:
    return [comp.evaluate(b) for comp in g.Gi]


def jet_prolong(v: VectorFieldQ, at: Any) -> Prolongation:
    """First jet prolongation values at a (second) jet point"""
    values, totals = prolong_scalars(v, at.bindings())
    return Prolongation(v.ut, np.array([primal(x) for x in values]), np.array([primal(x) for x in totals]))


def canonical_lift(v: VectorFieldQ, at: PhasePoint) -> LiftedValues:
    """Canonical lift of v onto V*Q evaluated at a phase point"""
    values, lowered = lift_scalars(v, at.bindings())
    return LiftedValues(v.ut, np.array([primal(x) for x in values]), np.array([primal(x) for x in lowered]))


def relative_velocity(g: ReferenceFrame, at: JetPoint) -> np.ndarray:
    """qt - G(t, q)"""
    gamma = frame_scalars(g, at.bindings())
    return np.array(at.qt) - np.array([primal(x) for x in gamma])


def lifted_field(v: VectorFieldQ) -> VectorFieldV:
    """The canonical lift as a field on V*Q, usable wherever a VectorFieldV is expected"""
    n = v.n
    frame = phase_frame(n)

    def upper(i: int) -> ScalarField:
        return ScalarField(frame, lambda m: v.ui[i].evaluate(m), {}, v.ui[i].name)

    def lower(i: int) -> ScalarField:
        return ScalarField(frame, lambda m: lift_scalars(v, m)[1][i], {}, f"lift_{i + 1}({v.name})")

    return VectorFieldV(v.ut, tuple(upper(i) for i in range(n)), tuple(lower(i) for i in range(n)),
                        f"lift({v.name})")
