"""
System definitions
JSON definition files, the registry of built-in systems, and a manager that
lists and loads both.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple, Union

from config import config, default_config_dir
from diffcore import ScalarField
from errors import ConfigError, DefinitionError
from geometry import (ReferenceFrame, VectorFieldQ, VectorFieldV, jet_frame,
                      phase_frame)
from hamiltonian import HamiltonianSystem, associated_hamiltonian
from lagrangian import LagrangianSystem, symmetry_current, energy_function
import kepler

logger = logging.getLogger(__name__)

SYSTEMS_SUBDIR = "systems"

DEFINITION_KEYS = {"name", "dim", "kind", "lagrangian", "hamiltonian", "params", "force",
                   "frames", "symmetries", "integrals", "sampling"}
SYMMETRY_KEYS = {"ut", "ui", "li", "sigma"}
SAMPLING_KEYS = {"q_box", "p_box", "qt_box", "qtt_box", "t_box", "min_radius", "chart_margin", "max_tries"}


@dataclass(frozen=True)
class Symmetry:
    """Candidate symmetry: a field on Q (sigma on the velocity space) or on V*Q (sigma on the phase space)"""
    name: str
    field: Union[VectorFieldQ, VectorFieldV]
    sigma: Optional[ScalarField] = None

    @property
    def on_phase_space(self) -> bool:
        return isinstance(self.field, VectorFieldV)


@dataclass
class System:
    """A loaded system with everything the checks and integrators need"""
    name: str
    dim: int
    lagrangian: Optional[LagrangianSystem] = None
    hamiltonian: Optional[HamiltonianSystem] = None
    frames: Dict[str, ReferenceFrame] = field(default_factory=dict)
    symmetries: Dict[str, Symmetry] = field(default_factory=dict)
    integrals: Dict[str, ScalarField] = field(default_factory=dict)
    velocity_integrals: Dict[str, ScalarField] = field(default_factory=dict)
    sampling: Dict[str, Any] = field(default_factory=dict)
    builtin: Optional[str] = None

    def hamiltonian_system(self) -> HamiltonianSystem:
        """Declared Hamiltonian, else the one associated with the Lagrangian"""
        if self.hamiltonian is None:
            if self.lagrangian is None:
                raise ConfigError(f"System {self.name} has neither a Lagrangian nor a Hamiltonian")
            self.hamiltonian = associated_hamiltonian(self.lagrangian)
        return self.hamiltonian

    def lagrangian_system(self) -> LagrangianSystem:
        if self.lagrangian is None:
            raise ConfigError(f"System {self.name} has no Lagrangian")
        return self.lagrangian

    def symmetry(self, name: str) -> Symmetry:
        try:
            return self.symmetries[name]
        except KeyError:
            raise ConfigError(f"System {self.name} has no symmetry {name!r}; "
                              f"known: {sorted(self.symmetries)}") from None

    def frame(self, name: str) -> ReferenceFrame:
        if name == "rest":
            return self.frames.get("rest", ReferenceFrame.rest(self.dim))
        try:
            return self.frames[name]
        except KeyError:
            raise ConfigError(f"System {self.name} has no frame {name!r}; known: {sorted(self.frames)}") from None

    def sampling_config(self) -> Dict[str, Any]:
        merged = dict(config.get_sampling_config())
        merged.update(self.sampling)
        return merged

    def phase_monitors(self) -> Dict[str, ScalarField]:
        monitors = {"H": self.hamiltonian_system().H}
        monitors.update(self.integrals)
        return monitors

    def jet_monitors(self) -> Dict[str, Callable[[Any], float]]:
        """Energy functions, symmetry currents and velocity-space integrals"""
        lsys = self.lagrangian_system()
        monitors: Dict[str, Callable[[Any], float]] = {}
        for name, g in sorted(self.frames.items()):
            monitors[f"E_{name}"] = lambda pt, g=g: energy_function(lsys, g, pt)
        for name, sym in sorted(self.symmetries.items()):
            if not sym.on_phase_space:
                monitors[f"J_{name}"] = lambda pt, s=sym: symmetry_current(lsys, s.field, s.sigma, pt)
        monitors.update(self.velocity_integrals)
        return monitors


# ---------------------------------------------------------------------------
# definition files

def _require(data: Mapping[str, Any], key: str, kind: type, where: str) -> Any:
    if key not in data:
        raise DefinitionError(f"{where}: missing key {key!r}")
    value = data[key]
    if not isinstance(value, kind):
        raise DefinitionError(f"{where}: {key!r} must be {kind.__name__}")
    return value


def _texts(value: Any, dim: int, where: str) -> List[str]:
    if not isinstance(value, list) or len(value) != dim or not all(isinstance(s, str) for s in value):
        raise DefinitionError(f"{where}: expected a list of {dim} expression strings")
    return value


def _symmetry_from(name: str, entry: Mapping[str, Any], dim: int, params: Mapping[str, float]) -> Symmetry:
    where = f"symmetry {name!r}"
    unknown = set(entry) - SYMMETRY_KEYS
    if unknown:
        raise DefinitionError(f"{where}: unknown keys {sorted(unknown)}")
    ut = entry.get("ut", 0)
    ui = _texts(entry.get("ui"), dim, where)
    sigma_text = entry.get("sigma")
    if "li" in entry:
        li = _texts(entry["li"], dim, where)
        v: Union[VectorFieldQ, VectorFieldV] = VectorFieldV.from_texts(ut, ui, li, params, name)
        sigma_frame = phase_frame(dim)
    else:
        v = VectorFieldQ.from_texts(ut, ui, params, name)
        sigma_frame = jet_frame(dim)
    sigma = ScalarField.from_text(sigma_text, sigma_frame, params, f"sigma_{name}") if sigma_text else None
    return Symmetry(name, v, sigma)


def system_from_dict(data: Mapping[str, Any]) -> System:
    """Validate a definition mapping and build the system it describes"""
    if not isinstance(data, Mapping):
        raise DefinitionError("System definition must be a JSON object")
    unknown = set(data) - DEFINITION_KEYS
    if unknown:
        raise DefinitionError(f"Unknown keys in system definition: {sorted(unknown)}")
    name = _require(data, "name", str, "definition")
    kind = _require(data, "kind", str, name)

    if kind.startswith("builtin:"):
        system = builtin_system(kind.split(":", 1)[1])
        system.name = name
        if "sampling" in data:
            system.sampling.update(_sampling_from(data["sampling"], name))
        return system

    dim = _require(data, "dim", int, name)
    if dim < 1:
        raise DefinitionError(f"{name}: dim must be positive")
    params = data.get("params", {})
    if not isinstance(params, Mapping) or not all(isinstance(v, (int, float)) for v in params.values()):
        raise DefinitionError(f"{name}: params must map names to numbers")
    params = {k: float(v) for k, v in params.items()}

    system = System(name, dim)
    if kind == "lagrangian":
        force = _texts(data["force"], dim, f"{name} force") if "force" in data else None
        system.lagrangian = LagrangianSystem.from_text(dim, _require(data, "lagrangian", str, name),
                                                       params, force, name)
        if "hamiltonian" in data:
            system.hamiltonian = HamiltonianSystem.from_text(dim, _require(data, "hamiltonian", str, name),
                                                             params, name)
    elif kind == "hamiltonian":
        if "lagrangian" in data or "force" in data:
            raise DefinitionError(f"{name}: a hamiltonian definition takes no lagrangian or force")
        system.hamiltonian = HamiltonianSystem.from_text(dim, _require(data, "hamiltonian", str, name),
                                                         params, name)
    else:
        raise DefinitionError(f"{name}: kind must be lagrangian, hamiltonian or builtin:<id>, got {kind!r}")

    for fname, texts in data.get("frames", {}).items():
        system.frames[fname] = ReferenceFrame.from_texts(_texts(texts, dim, f"frame {fname!r}"), params, fname)
    for sname, entry in data.get("symmetries", {}).items():
        if not isinstance(entry, Mapping):
            raise DefinitionError(f"symmetry {sname!r} must be an object")
        system.symmetries[sname] = _symmetry_from(sname, entry, dim, params)
    for iname, text in data.get("integrals", {}).items():
        if not isinstance(text, str):
            raise DefinitionError(f"integral {iname!r} must be an expression string")
        system.integrals[iname] = ScalarField.from_text(text, phase_frame(dim), params, iname)
    if "sampling" in data:
        system.sampling = _sampling_from(data["sampling"], name)
    logger.debug("Built system %s (dim %d, kind %s)", name, dim, kind)
    return system


def _sampling_from(value: Any, name: str) -> Dict[str, Any]:
    if not isinstance(value, Mapping):
        raise DefinitionError(f"{name}: sampling must be an object")
    unknown = set(value) - SAMPLING_KEYS
    if unknown:
        raise DefinitionError(f"{name}: unknown sampling keys {sorted(unknown)}")
    return dict(value)


def load_definition(path: Union[str, Path]) -> System:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise DefinitionError(f"{path}: invalid JSON ({e})") from None
    except OSError as e:
        raise ConfigError(f"Cannot read system definition {path}: {e}") from None
    return system_from_dict(data)


# ---------------------------------------------------------------------------
# built-in systems

def _kepler(dim: int) -> System:
    lsys, hsys = kepler.kepler_system(dim)
    system = System(f"kepler{dim}d", dim, lsys, hsys, builtin=f"kepler{dim}d")
    system.frames["rest"] = ReferenceFrame.rest(dim)
    system.frames["shift"] = ReferenceFrame.from_texts(["1"] + ["0"] * (dim - 1), name="shift")
    for name, v in kepler.rotation_fields(dim):
        system.symmetries[name] = Symmetry(name, v)
    for name, v, sigma in kepler.runge_lenz_fields(dim):
        system.symmetries[f"rl{name[1:]}"] = Symmetry(f"rl{name[1:]}", v, sigma)
    fields = kepler.integral_fields(dim)
    system.integrals.update({k: v for k, v in fields.items() if k != "H"})
    frame = jet_frame(dim)
    for a in range(1, dim + 1):
        system.velocity_integrals[f"A{a}"] = ScalarField.from_text(kepler.runge_lenz_text(a, dim, "qt"), frame,
                                                                   name=f"A{a}")
    return system


def _oscillator() -> System:
    lsys = LagrangianSystem.from_text(1, "0.5*qt1^2 - 0.5*q1^2", name="oscillator")
    hsys = HamiltonianSystem.from_text(1, "0.5*p1^2 + 0.5*q1^2", name="oscillator")
    system = System("oscillator", 1, lsys, hsys, builtin="oscillator")
    system.frames["rest"] = ReferenceFrame.rest(1)
    system.symmetries["time"] = Symmetry("time", VectorFieldQ.from_texts(1, ["0"], name="time"))
    return system


def _free_particle() -> System:
    lsys = LagrangianSystem.from_text(2, "0.5*(qt1^2 + qt2^2)", name="free_particle")
    hsys = HamiltonianSystem.from_text(2, "0.5*(p1^2 + p2^2)", name="free_particle")
    system = System("free_particle", 2, lsys, hsys, builtin="free_particle")
    system.frames["rest"] = ReferenceFrame.rest(2)
    system.frames["drift"] = ReferenceFrame.from_texts(["1", "0"], name="drift")
    system.symmetries["translation1"] = Symmetry("translation1", VectorFieldQ.from_texts(0, ["1", "0"]))
    system.symmetries["translation2"] = Symmetry("translation2", VectorFieldQ.from_texts(0, ["0", "1"]))
    system.symmetries["rotation"] = Symmetry("rotation", VectorFieldQ.from_texts(0, ["-q2", "q1"]))
    # Galilean boost: Lie derivative of L is d_t(q1)
    system.symmetries["boost1"] = Symmetry("boost1", VectorFieldQ.from_texts(0, ["t", "0"]),
                                           ScalarField.from_text("q1", jet_frame(2)))
    frame = phase_frame(2)
    for name, text in (("p1", "p1"), ("p2", "p2"), ("M12", "q1*p2 - q2*p1")):
        system.integrals[name] = ScalarField.from_text(text, frame, name=name)
    return system


def _havas(k: float = 1.0, m0: float = 1.0) -> System:
    params = {"k": k, "m0": m0}
    lsys = LagrangianSystem.from_text(1, "0.5*m0*exp(k*t/m0)*qt1^2", params, name="havas")
    hsys = HamiltonianSystem.from_text(1, "0.5*exp(-k*t/m0)*p1^2/m0", params, name="havas")
    system = System("havas", 1, lsys, hsys, builtin="havas")
    system.frames = {"rest": ReferenceFrame.rest(1),
                     "frame": ReferenceFrame.from_texts(["-(k/(2*m0))*q1"], params, "frame")}
    system.symmetries["frame"] = Symmetry("frame", VectorFieldQ.from_texts(1, ["-(k/(2*m0))*q1"], params, "frame"))
    system.integrals["E_frame"] = ScalarField.from_text("0.5*exp(-k*t/m0)*p1^2/m0 + (k/(2*m0))*q1*p1",
                                                        phase_frame(1), params, "E_frame")
    system.velocity_integrals["E_frame_closed"] = ScalarField.from_text(
        "0.5*m0*exp(k*t/m0)*qt1*(qt1 + (k/m0)*q1)", jet_frame(1), params, "E_frame_closed")
    return system


def _quadratic_frame(m: float = 1.0, w: float = 1.0) -> System:
    params = {"m": m, "w": w}
    lsys = LagrangianSystem.from_text(2, "0.5*m*((qt1 + w*q2)^2 + (qt2 - w*q1)^2)", params,
                                      name="quadratic_frame")
    hsys = HamiltonianSystem.from_text(2, "0.5*(p1^2 + p2^2)/m - w*q2*p1 + w*q1*p2", params,
                                       name="quadratic_frame")
    system = System("quadratic_frame", 2, lsys, hsys, builtin="quadratic_frame")
    gamma = ["-w*q2", "w*q1"]
    system.frames = {"rest": ReferenceFrame.rest(2), "frame": ReferenceFrame.from_texts(gamma, params, "frame")}
    system.symmetries["frame"] = Symmetry("frame", VectorFieldQ.from_texts(1, gamma, params, "frame"))
    system.integrals["E_frame"] = ScalarField.from_text("0.5*(p1^2 + p2^2)/m", phase_frame(2), params, "E_frame")
    return system


BUILTINS: Dict[str, Callable[[], System]] = {
    "kepler2d": lambda: _kepler(2),
    "kepler3d": lambda: _kepler(3),
    "oscillator": _oscillator,
    "free_particle": _free_particle,
    "havas": _havas,
    "quadratic_frame": _quadratic_frame,
}


def builtin_system(builtin_id: str) -> System:
    try:
        factory = BUILTINS[builtin_id]
    except KeyError:
        raise DefinitionError(f"Unknown built-in system {builtin_id!r}; known: {sorted(BUILTINS)}") from None
    return factory()


class SystemManager:
    """Lists and loads built-in systems and JSON definitions from the config directory"""

    def __init__(self, directory: Optional[Union[str, Path]] = None):
        self.directory = Path(directory) if directory is not None else default_config_dir() / SYSTEMS_SUBDIR

    def definition_files(self) -> List[Path]:
        if not self.directory.is_dir():
            return []
        return sorted(self.directory.glob("*.json"))

    def list_systems(self) -> List[Tuple[str, str]]:
        """(name, source) pairs, built-ins first"""
        entries = [(name, "builtin") for name in BUILTINS]
        for path in self.definition_files():
            try:
                with open(path, "r", encoding="utf-8") as f:
                    name = json.load(f).get("name", path.stem)
            except (OSError, json.JSONDecodeError, AttributeError) as e:
                logger.warning("Skipping unreadable definition %s: %s", path, e)
                continue
            entries.append((str(name), str(path)))
        return entries

    def get_system(self, ref: str) -> System:
        """Resolve a built-in id, a definition file path, or a definition name in the directory"""
        if ref in BUILTINS:
            return builtin_system(ref)
        path = Path(ref)
        if path.suffix == ".json" and path.exists():
            return load_definition(path)
        for name, source in self.list_systems():
            if name == ref and source != "builtin":
                return load_definition(source)
        raise ConfigError(f"Unknown system {ref!r}")
