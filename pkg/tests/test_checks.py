import json

import pytest

from checks import CHECK_IDS, CheckOptions, PointSampler, Scaled, run_check
from errors import ConfigError
from systems import builtin_system, system_from_dict

FAST = {"samples": 10, "seed": 3}


def test_known_check_ids():
    assert CHECK_IDS == ("gradients", "variational-identity", "symmetry", "iom", "inverse-noether",
                         "brackets-so3", "brackets-so21", "casimir", "bivector", "kepler-lagrangian",
                         "frame-shift", "necessary-condition")


def test_sampler_is_reproducible_and_respects_radius():
    cfg = {"q_box": [-0.2, 0.2], "min_radius": 0.1, "max_tries": 1000}
    draws = [[PointSampler(2, cfg, 11).draw() for _ in range(5)] for _ in range(2)]
    assert draws[0] == draws[1]
    for s in draws[0]:
        assert sum(x * x for x in s.phase.q) >= 0.01
        assert s.phase.q == s.jet.q and s.phase.t == s.jet.t


def test_sampler_gives_up():
    sampler = PointSampler(2, {"q_box": [0.0, 0.01], "min_radius": 1.0, "max_tries": 50}, 0)
    with pytest.raises(ConfigError):
        sampler.draw()


@pytest.mark.parametrize("system,check", [
    ("kepler2d", "gradients"),
    ("havas", "variational-identity"),
    ("kepler2d", "symmetry"),
    ("kepler2d", "iom"),
    ("kepler2d", "inverse-noether"),
    ("kepler2d", "brackets-so3"),
    ("kepler2d", "brackets-so21"),
    ("kepler2d", "casimir"),
    ("kepler2d", "bivector"),
    ("kepler3d", "kepler-lagrangian"),
    ("quadratic_frame", "frame-shift"),
    ("kepler2d", "necessary-condition"),
    ("free_particle", "symmetry"),
    ("quadratic_frame", "iom"),
])
def test_checks_pass_on_builtins(system, check):
    report = run_check(builtin_system(system), check, **FAST)
    assert report.passed, report.to_dict()
    assert report.samples == 10


def test_reports_are_byte_identical():
    system = builtin_system("kepler2d")
    first = run_check(system, "brackets-so3", **FAST).to_json()
    second = run_check(builtin_system("kepler2d"), "brackets-so3", **FAST).to_json()
    assert first == second
    data = json.loads(first)
    assert list(data) == ["check", "system", "seed", "samples", "tol", "max_abs_residual", "worst_point", "pass"]


def test_scaled_residual_divides_by_at_least_one():
    assert float(Scaled(-2e-12, 4.0)) == pytest.approx(5e-13, rel=1e-15)
    assert Scaled(3e-13, -0.25).divisor == 1.0
    assert float(Scaled(3e-13, -0.25)) == 3e-13


def test_scaled_items_name_their_divisor():
    casimir = run_check(builtin_system("kepler2d"), "casimir", **FAST)
    divisor = casimir.worst_point["scaled_by"]
    assert divisor >= 1.0
    assert list(casimir.worst_point)[:2] == ["item", "scaled_by"]
    assert json.loads(casimir.to_json())["worst_point"]["scaled_by"] == divisor
    # integrals compare against zero, so their residual stays absolute
    iom = run_check(builtin_system("kepler2d"), "iom", **FAST)
    assert "scaled_by" not in iom.worst_point


def test_workers_do_not_change_the_report():
    system = builtin_system("kepler2d")
    serial = run_check(system, "iom", workers=1, **FAST)
    threaded = run_check(system, "iom", workers=4, **FAST)
    assert serial == threaded


def test_non_integral_fails():
    report = run_check(builtin_system("oscillator"), "iom", options=CheckOptions(integral="q1"), **FAST)
    assert not report.passed
    assert report.worst_point["item"] == "q1"


def test_havas_frame_symmetry_at_tight_tolerance():
    report = run_check(builtin_system("havas"), "symmetry", tol=1e-12, options=CheckOptions(symmetry="frame"),
                       **FAST)
    assert report.passed


def test_usage_errors():
    with pytest.raises(ConfigError):
        run_check(builtin_system("havas"), "brackets-so3", **FAST)
    with pytest.raises(ConfigError):
        run_check(builtin_system("havas"), "no-such-check", **FAST)
    with pytest.raises(ConfigError):
        run_check(builtin_system("oscillator"), "iom", **FAST)
    with pytest.raises(ConfigError):
        run_check(builtin_system("havas"), "symmetry", options=CheckOptions(symmetry="missing"), **FAST)
    with pytest.raises(ConfigError):
        run_check(builtin_system("havas"), "iom", samples=0)


def test_user_definition_checks():
    system = system_from_dict({
        "name": "damped_frame",
        "dim": 1,
        "kind": "lagrangian",
        "lagrangian": "0.5*exp(t)*qt1^2",
        "frames": {"frame": ["-0.5*q1"]},
        "symmetries": {"frame": {"ut": 1, "ui": ["-0.5*q1"]}},
        "integrals": {"E": "0.5*exp(-t)*p1^2 + 0.5*q1*p1"},
    })
    for check in ("symmetry", "iom", "frame-shift", "inverse-noether", "necessary-condition"):
        assert run_check(system, check, **FAST).passed, check
