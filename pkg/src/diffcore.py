"""
Forward-mode automatic differentiation
Tagged dual numbers, scalar fields over coordinate frames, gradients and a
finite-difference oracle for cross-checking them.

A ``Dual`` carries a value and one derivative slot per active variable. Each
differentiation pass draws a fresh tag; duals with a lower tag met during a
pass are constants at that level, which is what makes nested passes (second
derivatives, total time derivatives of momenta) safe.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from config import config
from errors import ConfigError, DomainError
from exprdsl import Expr, apply_function, eval_expression, free_variables, parse_expression, power, primal

logger = logging.getLogger(__name__)

_TAGS = itertools.count(1)


class Dual:
    """Dual number value + sum_k derivs[k] eps_k at one tag level"""

    __slots__ = ("value", "derivs", "tag")

    def __init__(self, value: Any, derivs: Tuple[Any, ...], tag: int):
        self.value = value
        self.derivs = tuple(derivs)
        self.tag = tag

    def primal(self) -> Any:
        return self.value

    def __repr__(self) -> str:
        return f"Dual({self.value!r}, {self.derivs!r}, tag={self.tag})"

    def _chain(self, fv: Any, dfv: Any) -> "Dual":
        return Dual(fv, tuple(dfv * d for d in self.derivs), self.tag)

    # arithmetic -----------------------------------------------------------

    def __add__(self, other: Any) -> "Dual":
        if isinstance(other, Dual):
            if other.tag == self.tag:
                return Dual(self.value + other.value,
                            tuple(a + b for a, b in zip(self.derivs, other.derivs)), self.tag)
            if other.tag > self.tag:
                return Dual(self + other.value, other.derivs, other.tag)
        return Dual(self.value + other, self.derivs, self.tag)

    def __radd__(self, other: Any) -> "Dual":
        return self.__add__(other)

    def __neg__(self) -> "Dual":
        return Dual(-self.value, tuple(-d for d in self.derivs), self.tag)

    def __sub__(self, other: Any) -> "Dual":
        return self.__add__(-other)

    def __rsub__(self, other: Any) -> "Dual":
        return (-self).__add__(other)

    def __mul__(self, other: Any) -> "Dual":
        if isinstance(other, Dual):
            if other.tag == self.tag:
                return Dual(self.value * other.value,
                            tuple(self.value * b + other.value * a
                                  for a, b in zip(self.derivs, other.derivs)), self.tag)
            if other.tag > self.tag:
                return Dual(self * other.value, tuple(self * d for d in other.derivs), other.tag)
        return Dual(self.value * other, tuple(d * other for d in self.derivs), self.tag)

    def __rmul__(self, other: Any) -> "Dual":
        return self.__mul__(other)

    def reciprocal(self) -> "Dual":
        if primal(self.value) == 0.0:
            raise DomainError("division by zero")
        inv = 1.0 / self.value
        return self._chain(inv, -(inv * inv))

    def __truediv__(self, other: Any) -> "Dual":
        if isinstance(other, Dual):
            return self * other.reciprocal()
        if primal(other) == 0.0:
            raise DomainError("division by zero")
        return self * (1.0 / other)

    def __rtruediv__(self, other: Any) -> "Dual":
        return self.reciprocal() * other

    def __pow__(self, other: Any) -> Any:
        return power(self, other)

    def __rpow__(self, other: Any) -> Any:
        return power(other, self)

    def __abs__(self) -> "Dual":
        # derivative of abs at the kink is taken as 0
        v = primal(self.value)
        sign = 1.0 if v > 0 else (-1.0 if v < 0 else 0.0)
        return self._chain(abs(self.value), sign)

    # functions -------------------------------------------------------------

    def sin(self) -> "Dual":
        return self._chain(sin(self.value), cos(self.value))

    def cos(self) -> "Dual":
        return self._chain(cos(self.value), -sin(self.value))

    def tan(self) -> "Dual":
        t = tan(self.value)
        return self._chain(t, 1.0 + t * t)

    def sinh(self) -> "Dual":
        return self._chain(sinh(self.value), cosh(self.value))

    def cosh(self) -> "Dual":
        return self._chain(cosh(self.value), sinh(self.value))

    def exp(self) -> "Dual":
        e = exp(self.value)
        return self._chain(e, e)

    def log(self) -> "Dual":
        return self._chain(log(self.value), 1.0 / self.value)

    def sqrt(self) -> "Dual":
        if primal(self.value) == 0.0:
            raise DomainError("sqrt is not differentiable at 0")
        s = sqrt(self.value)
        return self._chain(s, 0.5 / s)

    def asinh(self) -> "Dual":
        return self._chain(asinh(self.value), 1.0 / sqrt(1.0 + self.value * self.value))

    def atanh(self) -> "Dual":
        return self._chain(atanh(self.value), 1.0 / (1.0 - self.value * self.value))

    @staticmethod
    def atan2(y: Any, x: Any) -> "Dual":
        tag = max(z.tag for z in (y, x) if isinstance(z, Dual))
        yv, dy = _split(y, tag)
        xv, dx = _split(x, tag)
        n = len(dy) if dy is not None else len(dx)
        dy = dy if dy is not None else (0.0,) * n
        dx = dx if dx is not None else (0.0,) * n
        r2 = xv * xv + yv * yv
        if primal(r2) == 0.0:
            raise DomainError("atan2 is not differentiable at the origin")
        return Dual(atan2(yv, xv), tuple((xv * b - yv * a) / r2 for a, b in zip(dx, dy)), tag)


def _split(x: Any, tag: int) -> Tuple[Any, Optional[Tuple[Any, ...]]]:
    """Value and derivative slots of x at the given tag level"""
    if isinstance(x, Dual) and x.tag == tag:
        return x.value, x.derivs
    return x, None


# scalar math usable on plain floats and duals alike

def sin(x: Any) -> Any:
    return apply_function("sin", [x])


def cos(x: Any) -> Any:
    return apply_function("cos", [x])


def tan(x: Any) -> Any:
    return apply_function("tan", [x])


def sinh(x: Any) -> Any:
    return apply_function("sinh", [x])


def cosh(x: Any) -> Any:
    return apply_function("cosh", [x])


def exp(x: Any) -> Any:
    return apply_function("exp", [x])


def log(x: Any) -> Any:
    return apply_function("log", [x])


def sqrt(x: Any) -> Any:
    return apply_function("sqrt", [x])


def atan2(y: Any, x: Any) -> Any:
    return apply_function("atan2", [y, x])


def asinh(x: Any) -> Any:
    if isinstance(x, Dual):
        return x.asinh()
    return math.asinh(x)


def atanh(x: Any) -> Any:
    if isinstance(x, Dual):
        return x.atanh()
    if not -1.0 < x < 1.0:
        raise DomainError(f"atanh argument {x!r} outside (-1, 1)")
    return math.atanh(x)


# ---------------------------------------------------------------------------
# scalar fields

Evaluator = Callable[[Mapping[str, Any]], Any]


@dataclass(frozen=True)
class ScalarField:
    """Differentiable real map over one coordinate frame"""

    frame: Tuple[str, ...]
    body: Union[Expr, Evaluator]
    params: Mapping[str, float] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if not callable(self.body):
            unknown = free_variables(self.body) - set(self.frame) - set(self.params)
            if unknown:
                raise ConfigError(
                    f"Field {self.name or '<anonymous>'} uses variables outside its frame: {sorted(unknown)}")

    @classmethod
    def from_text(cls, text: str, frame: Sequence[str], params: Optional[Mapping[str, float]] = None,
                  name: str = "") -> "ScalarField":
        """Build a field from expression source"""
        return cls(tuple(frame), parse_expression(text), dict(params or {}), name or text)

    @classmethod
    def constant(cls, value: float, frame: Sequence[str], name: str = "") -> "ScalarField":
        return cls(tuple(frame), lambda b: value, {}, name or repr(value))

    def evaluate(self, at: Any) -> Any:
        """Value at a point (point record, name mapping, or sequence in frame order)"""
        b: Dict[str, Any] = dict(self.params)
        b.update(point_bindings(at, self.frame))
        if callable(self.body):
            return self.body(b)
        return eval_expression(self.body, b)

    __call__ = evaluate

    def on_frame(self, frame: Sequence[str]) -> "ScalarField":
        """Same function viewed on a larger frame (pull-back by projection)"""
        missing = set(self.frame) - set(frame)
        if missing:
            raise ConfigError(f"Frame {tuple(frame)} lacks variables {sorted(missing)}")
        return ScalarField(tuple(frame), self.body, self.params, self.name)


def point_bindings(at: Any, frame: Sequence[str]) -> Dict[str, Any]:
    """Name -> value mapping for a point given in any supported form"""
    if hasattr(at, "bindings"):
        return at.bindings()
    if isinstance(at, Mapping):
        return dict(at)
    values = list(at)
    if len(values) != len(frame):
        raise ConfigError(f"Point has {len(values)} entries, frame {tuple(frame)} needs {len(frame)}")
    return dict(zip(frame, values))


# ---------------------------------------------------------------------------
# differentiation

def differentiate(func: Evaluator, point: Mapping[str, Any], wrt: Sequence[str]) -> Tuple[Any, List[Any]]:
    """Value and partial derivatives of func at point with respect to wrt, in one sweep.

    Entries of point may themselves be duals of an enclosing pass; the
    returned value and derivatives are then scalars of that outer level.
    """
    tag = next(_TAGS)
    n = len(wrt)
    seeded = dict(point)
    for k, name in enumerate(wrt):
        seeded[name] = Dual(point[name], tuple(1.0 if j == k else 0.0 for j in range(n)), tag)
    out = func(seeded)
    value, derivs = _split(out, tag)
    if derivs is None:
        return out, [0.0] * n
    return value, list(derivs)


def second_derivatives(func: Evaluator, point: Mapping[str, Any],
                       wrt: Sequence[str]) -> Tuple[float, np.ndarray, np.ndarray]:
    """Value, gradient and matrix of second partials by nesting two dual passes.

    Only plain points are accepted; used where the dynamics needs pi_ji.
    """
    tag = next(_TAGS)
    n = len(wrt)
    seeded = dict(point)
    for k, name in enumerate(wrt):
        seeded[name] = Dual(float(point[name]), tuple(1.0 if j == k else 0.0 for j in range(n)), tag)
    value, inner = differentiate(func, seeded, wrt)
    grad_ = np.zeros(n)
    hess = np.zeros((n, n))
    for i, entry in enumerate(inner):
        v, d = _split(entry, tag)
        grad_[i] = primal(v)
        if d is not None:
            hess[i, :] = [primal(x) for x in d]
    return primal(value), grad_, hess


def grad(f: ScalarField, at: Any) -> np.ndarray:
    """Full gradient of f at a plain point, in frame order"""
    point = {**f.params, **point_bindings(at, f.frame)}
    _, derivs = differentiate(lambda b: f.evaluate(b), point, f.frame)
    return np.array([primal(d) for d in derivs], dtype=float)


def fd_gradient_oracle(f: ScalarField, at: Any, h: Optional[float] = None) -> np.ndarray:
    """Central differences with step h*(1+|x_i|) per frame variable"""
    if h is None:
        h = float(config.get("fd.step", 1e-6))
    if h <= 0:
        raise ConfigError(f"Finite-difference step must be positive, got {h}")
    point = point_bindings(at, f.frame)
    out = np.zeros(len(f.frame))
    for i, name in enumerate(f.frame):
        x = float(point[name])
        step = h * (1.0 + abs(x))
        plus = dict(point)
        minus = dict(point)
        plus[name] = x + step
        minus[name] = x - step
        out[i] = (primal(f.evaluate(plus)) - primal(f.evaluate(minus))) / (2.0 * step)
    return out


def jacobian(fields: Sequence[ScalarField], at: Any) -> np.ndarray:
    """Rows are gradients of the fields; all fields share one frame"""
    if not fields:
        return np.zeros((0, 0))
    frame = fields[0].frame
    for f in fields[1:]:
        if f.frame != frame:
            raise ConfigError(f"Jacobian fields must share a frame: {f.frame} != {frame}")
    return np.vstack([grad(f, at) for f in fields])
