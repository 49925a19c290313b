import json

import pytest

from errors import ConfigError, DefinitionError
from geometry import PhasePoint
from systems import BUILTINS, SystemManager, builtin_system, load_definition, system_from_dict

PENDULUM = {
    "name": "pendulum",
    "dim": 1,
    "kind": "lagrangian",
    "lagrangian": "0.5*m*qt1^2 + m*g*cos(q1)",
    "params": {"m": 1.0, "g": 9.81},
    "frames": {"rest": ["0"]},
    "symmetries": {"time": {"ut": 1, "ui": ["0"]}},
    "integrals": {"E": "0.5*p1^2/m - m*g*cos(q1)"},
    "sampling": {"q_box": [-1.0, 1.0]},
}


def test_builtins_are_complete():
    assert sorted(BUILTINS) == ["free_particle", "havas", "kepler2d", "kepler3d", "oscillator", "quadratic_frame"]
    for name in BUILTINS:
        system = builtin_system(name)
        assert system.builtin == name
        assert system.hamiltonian is not None and system.lagrangian is not None


def test_definition_round_trip(tmp_path):
    path = tmp_path / "pendulum.json"
    path.write_text(json.dumps(PENDULUM), encoding="utf-8")
    system = load_definition(path)
    assert system.name == "pendulum" and system.dim == 1
    assert system.symmetry("time").field.ut == 1
    assert system.sampling_config()["q_box"] == [-1.0, 1.0]
    assert system.sampling_config()["p_box"] == [-2.0, 2.0]
    # the Hamiltonian comes from the Legendre map
    hsys = system.hamiltonian_system()
    at = PhasePoint(0.0, (0.3,), (1.2,))
    assert hsys.value(at) == pytest.approx(system.integrals["E"].evaluate(at), abs=1e-12)


def test_unknown_keys_are_rejected():
    with pytest.raises(DefinitionError):
        system_from_dict({**PENDULUM, "colour": "red"})
    with pytest.raises(DefinitionError):
        system_from_dict({**PENDULUM, "symmetries": {"s": {"ut": 0, "ui": ["1"], "extra": "x"}}})


def test_definition_errors():
    with pytest.raises(DefinitionError):
        system_from_dict({"name": "x", "kind": "lagrangian", "dim": 1})
    with pytest.raises(DefinitionError):
        system_from_dict({**PENDULUM, "kind": "newtonian"})
    with pytest.raises(DefinitionError):
        system_from_dict({**PENDULUM, "frames": {"bad": ["0", "1"]}})
    with pytest.raises(ConfigError):
        system_from_dict({**PENDULUM, "lagrangian": "qt1^2 + z"})
    with pytest.raises(DefinitionError):
        system_from_dict({"name": "k", "kind": "builtin:kepler9d"})


def test_builtin_kind_renames(tmp_path):
    system = system_from_dict({"name": "my_kepler", "kind": "builtin:kepler2d", "sampling": {"min_radius": 0.5}})
    assert system.name == "my_kepler"
    assert system.builtin == "kepler2d"
    assert system.sampling_config()["min_radius"] == 0.5


def test_manager_lists_and_resolves(tmp_path):
    (tmp_path / "pendulum.json").write_text(json.dumps(PENDULUM), encoding="utf-8")
    (tmp_path / "broken.json").write_text("{not json", encoding="utf-8")
    manager = SystemManager(tmp_path)
    listed = dict(manager.list_systems())
    assert listed["kepler2d"] == "builtin"
    assert listed["pendulum"].endswith("pendulum.json")
    assert "broken" not in listed
    assert manager.get_system("pendulum").dim == 1
    assert manager.get_system(str(tmp_path / "pendulum.json")).name == "pendulum"
    with pytest.raises(ConfigError):
        manager.get_system("nowhere")


def test_monitors(kepler2d, havas):
    assert set(kepler2d.phase_monitors()) == {"H", "M12", "A1", "A2"}
    jet = havas.jet_monitors()
    assert {"E_rest", "E_frame", "J_frame", "E_frame_closed"} <= set(jet)
