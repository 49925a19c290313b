"""
Check suites
Seeded sampling of velocity-space and phase-space points, the named checks
that dispatch to the mechanics operations, and the reproducible CheckReport.

Sampling uses numpy's PCG64 bit generator seeded with the report seed, so a
report reproduces on every platform numpy supports.
"""
from __future__ import annotations

import itertools
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from config import config
from diffcore import ScalarField, fd_gradient_oracle, grad
from errors import ConfigError, NumericError
from exprdsl import primal
from geometry import (Jet2Point, JetPoint, PhasePoint, ReferenceFrame, VectorFieldQ,
                      frame_scalars, phase_frame)
from hamiltonian import (HamiltonianSystem, ham_symmetry_current, inverse_noether,
                         inverse_noether_field, iom_residual, lift_symmetry,
                         symmetry_necessary_residual)
from lagrangian import frame_shift, symmetry_residual, variational_identity_residual
import kepler
from systems import Symmetry, System

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCES: Dict[str, float] = {
    "gradients": 1e-6,
    "variational-identity": 1e-10,
    "symmetry": 1e-10,
    "iom": 1e-10,
    "inverse-noether": 1e-12,
    "brackets-so3": 1e-9,
    "brackets-so21": 1e-9,
    "casimir": 1e-12,
    "bivector": 1e-6,
    "kepler-lagrangian": 1e-9,
    "frame-shift": 1e-12,
    "necessary-condition": 1e-10,
}

CHECK_IDS: Tuple[str, ...] = tuple(DEFAULT_TOLERANCES)

# which coordinates a check reads; decides what worst_point reports
JET, JET2, PHASE, ALL = "jet", "jet2", "phase", "all"


@dataclass(frozen=True)
class Sample:
    """One draw: a second-jet point and a phase point sharing (t, q)"""
    jet2: Jet2Point
    phase: PhasePoint

    @property
    def jet(self) -> JetPoint:
        return self.jet2.jet

    def bindings(self, kind: str) -> Dict[str, float]:
        if kind == PHASE:
            return self.phase.bindings()
        if kind == JET:
            return self.jet.bindings()
        b = self.jet2.bindings()
        if kind == ALL:
            b.update(self.phase.bindings())
        return b


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one check run; identical inputs give byte-identical JSON"""
    check: str
    system: str
    seed: int
    samples: int
    tol: float
    max_abs_residual: float
    worst_point: Dict[str, Any]
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "check": self.check,
            "system": self.system,
            "seed": self.seed,
            "samples": self.samples,
            "tol": self.tol,
            "max_abs_residual": self.max_abs_residual,
            "worst_point": self.worst_point,
            "pass": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True)
class CheckOptions:
    """Selections forwarded from the command line"""
    symmetry: Optional[str] = None
    integral: Optional[str] = None
    frame: Optional[str] = None


Residual = Callable[[Sample], Union[float, "Scaled"]]
Accept = Callable[[Sample], bool]


@dataclass
class CheckPlan:
    """Residual functions evaluated at every sample, with per-sample admission tests"""
    kind: str
    items: List[Tuple[str, Residual]]
    accepts: List[Optional[Accept]] = field(default_factory=lambda: [None])


# ---------------------------------------------------------------------------
# sampling

class PointSampler:
    """Uniform draws in the sampling box with rejection"""

    def __init__(self, dim: int, sampling: Mapping[str, Any], seed: int):
        self.dim = dim
        self.sampling = sampling
        self.rng = np.random.Generator(np.random.PCG64(seed))
        self.min_radius = float(sampling.get("min_radius", 0.0))
        self.max_tries = int(sampling.get("max_tries", 10000))

    def _box(self, key: str) -> Tuple[float, float]:
        box = self.sampling.get(key, [-2.0, 2.0])
        try:
            lo, hi = (float(x) for x in box)
        except (TypeError, ValueError):
            raise ConfigError(f"Sampling box {key} must be a [low, high] pair, got {box!r}") from None
        if not lo <= hi:
            raise ConfigError(f"Sampling box {key} is empty: [{lo}, {hi}]")
        return lo, hi

    def _vector(self, key: str) -> Tuple[float, ...]:
        lo, hi = self._box(key)
        return tuple(float(x) for x in self.rng.uniform(lo, hi, size=self.dim))

    def _draw_once(self) -> Optional[Sample]:
        lo, hi = self._box("t_box")
        t = float(self.rng.uniform(lo, hi))
        q = self._vector("q_box")
        qt = self._vector("qt_box")
        qtt = self._vector("qtt_box")
        p = self._vector("p_box")
        if math.sqrt(sum(x * x for x in q)) < self.min_radius:
            return None
        return Sample(Jet2Point(t, q, qt, qtt), PhasePoint(t, q, p))

    def draw(self, accept: Optional[Accept] = None) -> Sample:
        for _ in range(self.max_tries):
            sample = self._draw_once()
            if sample is None:
                continue
            if accept is None:
                return sample
            try:
                if accept(sample):
                    return sample
            except NumericError:
                continue
        logger.warning("No admissible point in %d tries", self.max_tries)
        raise ConfigError(f"Sampling box yields no admissible point in {self.max_tries} tries")


# ---------------------------------------------------------------------------
# helpers

@dataclass(frozen=True)
class Scaled:
    """Residual measured against max(1, |scale|) of the quantity it compares"""
    value: float
    scale: float

    @property
    def divisor(self) -> float:
        return max(1.0, abs(self.scale))

    def __float__(self) -> float:
        return abs(self.value) / self.divisor


def _hamiltonian(system: System) -> HamiltonianSystem:
    return system.hamiltonian_system()


def _phase_field(system: System, text: str) -> ScalarField:
    params = system.hamiltonian_system().params
    return ScalarField.from_text(text, phase_frame(system.dim), params, text)


def _integrals(system: System, opts: CheckOptions) -> Dict[str, ScalarField]:
    if opts.integral is None:
        return dict(system.integrals)
    if opts.integral in system.integrals:
        return {opts.integral: system.integrals[opts.integral]}
    return {opts.integral: _phase_field(system, opts.integral)}


def _symmetries(system: System, opts: CheckOptions) -> List[Symmetry]:
    if opts.symmetry is not None:
        return [system.symmetry(opts.symmetry)]
    return [system.symmetries[name] for name in sorted(system.symmetries)]


def _frames(system: System) -> Dict[str, ReferenceFrame]:
    frames = {"rest": system.frame("rest")}
    frames.update(system.frames)
    return frames


def frame_function(hsys: HamiltonianSystem, g: ReferenceFrame) -> ScalarField:
    """H_G = H - p_i G^i as a differentiable phase-space field"""
    n = hsys.n

    def body(m):
        gamma = frame_scalars(g, m)
        total = hsys.H.evaluate(m)
        for i in range(n):
            total = total - m[f"p{i + 1}"] * gamma[i]
        return total

    return ScalarField(phase_frame(n), body, {}, f"H_{g.name or 'frame'}")


def current_field(hsys: HamiltonianSystem, sym: Symmetry) -> ScalarField:
    """Current -p_i u^i + ut H + sigma of a phase-space symmetry as a field"""
    v = sym.field
    n = hsys.n

    def body(m):
        total = v.ut * hsys.H.evaluate(m) if v.ut else 0.0
        for i in range(n):
            total = total - m[f"p{i + 1}"] * v.ui[i].evaluate(m)
        if sym.sigma is not None:
            total = total + sym.sigma.evaluate(m)
        return total

    return ScalarField(phase_frame(n), body, {}, f"J_{sym.name}")


def _domain_accept(system: System) -> Accept:
    """Rejects points where the Lagrangian or Hamiltonian cannot be evaluated"""
    lsys = system.lagrangian
    hsys = system.hamiltonian

    def accept(s: Sample) -> bool:
        values = []
        if lsys is not None:
            values.append(primal(lsys.L.evaluate(s.jet)))
        if hsys is not None:
            values.append(primal(hsys.H.evaluate(s.phase)))
        return all(math.isfinite(v) for v in values)

    return accept


def _require_kepler(system: System, planar: bool = True) -> None:
    allowed = ("kepler2d",) if planar else ("kepler2d", "kepler3d")
    if system.builtin not in allowed:
        raise ConfigError(f"Check needs a built-in Kepler system ({', '.join(allowed)}), got {system.name}")


def _region_accept(region: kepler.Region, margin: float, chart: bool = False) -> Accept:
    def accept(s: Sample) -> bool:
        inv = kepler.invariants(s.phase)
        if kepler.classify(s.phase) is not region:
            return False
        if abs(inv.H) < margin or abs(inv.M12) < margin:
            return False
        if not chart:
            return True
        if inv.e < margin:
            return False
        _, x2, x3 = kepler.momentum_map(s.phase)
        if region is kepler.Region.PLUS:
            if x2 < margin or x2 * x2 - x3 * x3 < margin * x2 * x2:
                return False
            # origin shift of tau is an artanh of this ratio
            if abs(inv.M12 * inv.A1) >= (1.0 - margin) * math.sqrt(inv.a) * abs(inv.A2):
                return False
        kepler.action_angle(s.phase)
        return True

    return accept


def _margin(system: System) -> float:
    return float(system.sampling_config().get("chart_margin", 0.05))


# ---------------------------------------------------------------------------
# plans

def _plan_gradients(system: System, opts: CheckOptions, seed: int) -> CheckPlan:
    def rel_error(f: ScalarField, at: Any) -> Scaled:
        ad = grad(f, at)
        fd = fd_gradient_oracle(f, at)
        return Scaled(float(np.max(np.abs(ad - fd))), float(np.max(np.abs(ad))))

    items: List[Tuple[str, Residual]] = []
    if system.lagrangian is not None:
        items.append(("L", lambda s, f=system.lagrangian.L: rel_error(f, s.jet)))
    if system.hamiltonian is not None:
        items.append(("H", lambda s, f=system.hamiltonian.H: rel_error(f, s.phase)))
    for name, f in sorted(system.integrals.items()):
        items.append((name, lambda s, f=f: rel_error(f, s.phase)))
    for name, f in sorted(system.velocity_integrals.items()):
        items.append((name, lambda s, f=f: rel_error(f, s.jet)))
    return CheckPlan(ALL, items, [_domain_accept(system)])


def random_fields(dim: int, count: int, seed: int) -> List[VectorFieldQ]:
    """Quadratic polynomial fields on Q with seeded coefficients"""
    rng = np.random.Generator(np.random.PCG64(seed))
    names = ["t"] + [f"q{i}" for i in range(1, dim + 1)]
    monomials = names + [f"{a}*{b}" for a, b in itertools.combinations_with_replacement(names, 2)]
    fields = []
    for k in range(count):
        ut = int(rng.integers(0, 2))
        texts = []
        for _ in range(dim):
            coeffs = rng.uniform(-1.0, 1.0, size=len(monomials) + 1)
            terms = [f"({float(coeffs[0])!r})"]
            terms += [f"({float(c)!r})*{m}" for c, m in zip(coeffs[1:], monomials)]
            texts.append(" + ".join(terms))
        fields.append(VectorFieldQ.from_texts(ut, texts, name=f"random{k}"))
    return fields


def _plan_variational(system: System, opts: CheckOptions, seed: int) -> CheckPlan:
    lsys = system.lagrangian_system()
    fields = [s.field for s in _symmetries(system, opts) if not s.on_phase_space]
    fields += random_fields(system.dim, 3, seed)
    items = [(v.name, lambda s, v=v: variational_identity_residual(lsys, v, s.jet2)) for v in fields]
    return CheckPlan(JET2, items, [_domain_accept(system)])


def _plan_symmetry(system: System, opts: CheckOptions, seed: int) -> CheckPlan:
    items: List[Tuple[str, Residual]] = []
    kinds = set()
    for sym in _symmetries(system, opts):
        if sym.on_phase_space:
            hsys = _hamiltonian(system)
            current = current_field(hsys, sym)
            items.append((sym.name, lambda s, j=current: iom_residual(hsys, j, s.phase)))
            kinds.add(PHASE)
        else:
            lsys = system.lagrangian_system()
            items.append((sym.name, lambda s, y=sym: symmetry_residual(lsys, y.field, y.sigma, s.jet2)))
            kinds.add(JET2)
    if not items:
        raise ConfigError(f"System {system.name} declares no symmetries")
    kind = kinds.pop() if len(kinds) == 1 else ALL
    return CheckPlan(kind, items, [_domain_accept(system)])


def _plan_iom(system: System, opts: CheckOptions, seed: int) -> CheckPlan:
    hsys = _hamiltonian(system)
    integrals = _integrals(system, opts)
    if not integrals:
        raise ConfigError(f"System {system.name} declares no integrals; pass one with --integral")
    items = [(name, lambda s, f=f: iom_residual(hsys, f, s.phase)) for name, f in sorted(integrals.items())]
    return CheckPlan(PHASE, items, [_domain_accept(system)])


def _plan_inverse_noether(system: System, opts: CheckOptions, seed: int) -> CheckPlan:
    hsys = _hamiltonian(system)
    targets = _integrals(system, opts)
    if opts.integral is None:
        for name, g in sorted(_frames(system).items()):
            targets[f"H_{name}"] = frame_function(hsys, g)
    items: List[Tuple[str, Residual]] = []
    for name, phi in sorted(targets.items()):
        v, sigma = inverse_noether_field(phi, system.dim, name)

        def residual(s: Sample, phi=phi, v=v, sigma=sigma) -> Scaled:
            value = primal(phi.evaluate(s.phase))
            via_field = ham_symmetry_current(hsys, v, sigma, s.phase)
            pointwise = inverse_noether(hsys, phi, s.phase).current
            worst = max(abs(via_field - value), abs(pointwise - value))
            return Scaled(worst, value)

        items.append((name, residual))
    return CheckPlan(PHASE, items, [_domain_accept(system)])


def _plan_brackets(region: kepler.Region) -> Callable[[System, CheckOptions, int], CheckPlan]:
    def plan(system: System, opts: CheckOptions, seed: int) -> CheckPlan:
        _require_kepler(system)
        items: List[Tuple[str, Residual]] = [
            ("structure", lambda s: max(abs(x) for x in kepler.structure_residuals(s.phase).values())),
            ("lie-poisson", lambda s: kepler.lie_poisson_residual(s.phase)),
        ]
        return CheckPlan(PHASE, items, [_region_accept(region, _margin(system))])

    return plan


def _plan_casimir(system: System, opts: CheckOptions, seed: int) -> CheckPlan:
    _require_kepler(system)

    def casimir(s: Sample) -> Scaled:
        inv = kepler.invariants(s.phase)
        k1, k2 = kepler.scaled_integrals(s.phase)
        scale = max(inv.Msq, k1 * k1 + k2 * k2, 1.0 / (2.0 * abs(inv.H)))
        return Scaled(kepler.casimir_residual(s.phase), scale)

    def runge_lenz_norm(s: Sample) -> Scaled:
        inv = kepler.invariants(s.phase)
        return Scaled(inv.Asq - (2.0 * inv.Msq * inv.H + 1.0), inv.Asq)

    def action_is_energy(s: Sample) -> Scaled:
        inv = kepler.invariants(s.phase)
        return Scaled(kepler.action_angle(s.phase).I - inv.H, inv.H)

    items = [("casimir", casimir), ("Asq", runge_lenz_norm), ("I-H", action_is_energy)]
    margin = _margin(system)
    accepts = [_region_accept(kepler.Region.MINUS, margin, chart=True),
               _region_accept(kepler.Region.PLUS, margin, chart=True)]
    return CheckPlan(PHASE, items, accepts)


def _plan_bivector(system: System, opts: CheckOptions, seed: int) -> CheckPlan:
    _require_kepler(system)
    items: List[Tuple[str, Residual]] = [("bivector", lambda s: kepler.bivector_residual(s.phase))]
    for index in (1, 2, 3):
        items.append((f"theta_x{index}", lambda s, i=index: kepler.chart_vector_field_residual(s.phase, i)))
    margin = _margin(system)
    accepts = [_region_accept(kepler.Region.MINUS, margin, chart=True),
               _region_accept(kepler.Region.PLUS, margin, chart=True)]
    return CheckPlan(PHASE, items, accepts)


def _plan_kepler_lagrangian(system: System, opts: CheckOptions, seed: int) -> CheckPlan:
    _require_kepler(system, planar=False)
    items: List[Tuple[str, Residual]] = [
        ("symmetry", lambda s: kepler.lagrangian_kepler_checks(s.jet2).symmetry),
        ("current", lambda s: kepler.lagrangian_kepler_checks(s.jet2).current),
        ("runge-lenz", lambda s: kepler.lagrangian_kepler_checks(s.jet2).runge_lenz),
    ]
    return CheckPlan(JET, items, [_domain_accept(system)])


def _plan_frame_shift(system: System, opts: CheckOptions, seed: int) -> CheckPlan:
    lsys = system.lagrangian_system()
    frames = _frames(system)
    if opts.frame is not None:
        chosen = system.frame(opts.frame)
        pairs = [(opts.frame, chosen, name, g) for name, g in sorted(frames.items()) if name != opts.frame]
    else:
        pairs = [(n1, g1, n2, g2) for (n1, g1), (n2, g2) in itertools.permutations(sorted(frames.items()), 2)]
    if not pairs:
        raise ConfigError(f"System {system.name} needs a frame besides rest for a frame-shift check")
    items = [(f"{n1}-{n2}", lambda s, g1=g1, g2=g2: frame_shift(lsys, g1, g2, s.jet))
             for n1, g1, n2, g2 in pairs]
    return CheckPlan(JET, items, [_domain_accept(system)])


def _plan_necessary(system: System, opts: CheckOptions, seed: int) -> CheckPlan:
    fields = []
    for sym in _symmetries(system, opts):
        fields.append(sym.field if sym.on_phase_space else lift_symmetry(sym.field))
    if opts.symmetry is None:
        for name, phi in sorted(_integrals(system, opts).items()):
            fields.append(inverse_noether_field(phi, system.dim, name)[0])
    if not fields:
        raise ConfigError(f"System {system.name} declares no symmetries or integrals")
    items = [(v.name, lambda s, v=v: symmetry_necessary_residual(v, s.phase)) for v in fields]
    return CheckPlan(PHASE, items, [_domain_accept(system)])


PLANS: Dict[str, Callable[[System, CheckOptions, int], CheckPlan]] = {
    "gradients": _plan_gradients,
    "variational-identity": _plan_variational,
    "symmetry": _plan_symmetry,
    "iom": _plan_iom,
    "inverse-noether": _plan_inverse_noether,
    "brackets-so3": _plan_brackets(kepler.Region.MINUS),
    "brackets-so21": _plan_brackets(kepler.Region.PLUS),
    "casimir": _plan_casimir,
    "bivector": _plan_bivector,
    "kepler-lagrangian": _plan_kepler_lagrangian,
    "frame-shift": _plan_frame_shift,
    "necessary-condition": _plan_necessary,
}


# ---------------------------------------------------------------------------
# runner

def _evaluate(plan: CheckPlan, sample: Sample) -> Tuple[float, str, Optional[float]]:
    """(worst residual, its item, divisor when that item is scaled)"""
    worst, label, divisor = 0.0, "", None
    for name, residual in plan.items:
        result = residual(sample)
        value = abs(float(result))
        scale = result.divisor if isinstance(result, Scaled) else None
        if not math.isfinite(value):
            return math.inf, name, scale
        if value >= worst:
            worst, label, divisor = value, name, scale
    return worst, label, divisor


def draw_samples(plan: CheckPlan, sampler: PointSampler, count: int) -> List[Sample]:
    """Admissible samples, admission tests cycling with the sample index"""
    return [sampler.draw(plan.accepts[k % len(plan.accepts)]) for k in range(count)]


def run_check(system: System, check_id: str, samples: Optional[int] = None, tol: Optional[float] = None,
              seed: Optional[int] = None, options: Optional[CheckOptions] = None,
              workers: Optional[int] = None) -> CheckReport:
    """Sample, evaluate and aggregate one named check"""
    if check_id not in PLANS:
        raise ConfigError(f"Unknown check {check_id!r}; known: {', '.join(CHECK_IDS)}")
    samples = int(config.get("checks.samples", 100)) if samples is None else int(samples)
    seed = int(config.get("checks.seed", 0)) if seed is None else int(seed)
    tol = DEFAULT_TOLERANCES[check_id] if tol is None else float(tol)
    workers = int(config.get("checks.workers", 1)) if workers is None else int(workers)
    if samples < 1:
        raise ConfigError(f"Sample count must be positive, got {samples}")
    if not tol > 0:
        raise ConfigError(f"Tolerance must be positive, got {tol}")

    logger.info("Running %s on %s: %d samples, seed %d, tol %g", check_id, system.name, samples, seed, tol)
    plan = PLANS[check_id](system, options or CheckOptions(), seed)
    sampler = PointSampler(system.dim, system.sampling_config(), seed)
    points = draw_samples(plan, sampler, samples)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda s: _evaluate(plan, s), points))
    else:
        results = [_evaluate(plan, s) for s in points]

    k = max(range(len(results)), key=lambda i: results[i][0])
    worst, label, divisor = results[k]
    worst_point: Dict[str, Any] = {"item": label}
    if divisor is not None:
        # max_abs_residual is |residual| / scaled_by for this item
        worst_point["scaled_by"] = divisor
    worst_point.update(points[k].bindings(plan.kind))
    report = CheckReport(check_id, system.name, seed, samples, tol, worst, worst_point, worst <= tol)
    logger.info("%s on %s: max residual %.3e (%s)", check_id, system.name, worst,
                "pass" if report.passed else "fail")
    return report


def run_checks(system: System, check_ids: Sequence[str], **kwargs: Any) -> List[CheckReport]:
    return [run_check(system, c, **kwargs) for c in check_ids]
