import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from errors import ConfigError
from geometry import (ExtendedPhasePoint, Jet2Point, JetPoint, PhasePoint, ReferenceFrame, VectorFieldQ,
                      VectorFieldV, canonical_lift, frame_scalars, jet_prolong, lifted_field, relative_velocity)

coords = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False, allow_infinity=False)
jet_points = st.builds(lambda t, a, b, c, d: JetPoint(t, (a, b), (c, d)), coords, coords, coords, coords, coords)
phase_points = st.builds(lambda t, a, b, c, d: PhasePoint(t, (a, b), (c, d)), coords, coords, coords, coords,
                         coords)

# components depend on t explicitly so the prolongation picks up a d_t term
component_texts = st.builds(
    lambda a, b, c, d, k: f"({a})*q1*q2 + ({b})*sin(q{k}) + ({c})*t*q{3 - k}^2 + ({d})*exp(q1/4)",
    *[st.integers(min_value=-5, max_value=5)] * 4, st.sampled_from([1, 2]))
field_texts = st.lists(component_texts, min_size=2, max_size=2)


def test_points_validate_dimensions_and_finiteness():
    with pytest.raises(ConfigError):
        JetPoint(0.0, (1.0, 2.0), (1.0,))
    with pytest.raises(ConfigError):
        PhasePoint(0.0, (float("nan"),), (1.0,))
    ext = ExtendedPhasePoint(1.0, (1.0,), (2.0,), -3.0)
    assert ext.bindings() == {"t": 1.0, "q1": 1.0, "p1": 2.0, "p0": -3.0}
    assert ext.phase == PhasePoint(1.0, (1.0,), (2.0,))


def test_prolongation_of_rotation():
    v = VectorFieldQ.from_texts(0, ["-q2", "q1"], name="rot")
    pr = jet_prolong(v, JetPoint(0.0, (1.0, 2.0), (3.0, 4.0)))
    assert np.allclose(pr.ui, [-2.0, 1.0])
    assert np.allclose(pr.dtui, [-4.0, 3.0])


def test_prolongation_includes_explicit_time_dependence():
    v = VectorFieldQ.from_texts(1, ["t*q1"])
    pr = jet_prolong(v, JetPoint(2.0, (3.0,), (5.0,)))
    assert pr.ut == 1
    assert pr.dtui[0] == pytest.approx(3.0 + 5.0 * 2.0)


def test_canonical_lift_lowers_with_momenta():
    v = VectorFieldQ.from_texts(0, ["q1^2", "q1*q2"])
    lifted = canonical_lift(v, PhasePoint(0.0, (1.0, 2.0), (3.0, 5.0)))
    # u_i = -p_j d_i u^j
    assert np.allclose(lifted.li, [-(3.0 * 2.0 + 5.0 * 2.0), -(5.0 * 1.0)])
    field = lifted_field(v)
    assert isinstance(field, VectorFieldV)
    at = PhasePoint(0.0, (1.0, 2.0), (3.0, 5.0))
    assert [c.evaluate(at) for c in field.li] == pytest.approx(list(lifted.li))


def test_relative_velocity_and_frame_difference():
    g = ReferenceFrame.from_texts(["-q2", "q1"], name="rot")
    jet = JetPoint(0.0, (1.0, 2.0), (0.5, 0.5))
    assert np.allclose(relative_velocity(g, jet), [2.5, -0.5])
    diff = g.minus(ReferenceFrame.rest(2))
    assert diff.vertical
    assert [c.evaluate(jet) for c in diff.ui] == pytest.approx([-2.0, 1.0])


def test_field_components_stay_on_their_space():
    with pytest.raises(ConfigError):
        VectorFieldQ.from_texts(0, ["qt1"])
    with pytest.raises(ConfigError):
        VectorFieldQ.from_texts(2, ["q1"])


def test_second_jet_projection():
    j2 = Jet2Point(0.5, (1.0,), (2.0,), (3.0,))
    assert j2.jet == JetPoint(0.5, (1.0,), (2.0,))
    assert j2.bindings()["qtt1"] == 3.0


@settings(max_examples=40, deadline=None)
@given(field_texts, phase_points)
def test_lift_of_vertical_field_is_linear_in_momenta(texts, at):
    v = VectorFieldQ.from_texts(0, texts)
    doubled = PhasePoint(at.t, at.q, tuple(2.0 * p for p in at.p))
    once, twice = canonical_lift(v, at), canonical_lift(v, doubled)
    assert np.array_equal(twice.ui, once.ui)
    # exact up to subnormal rounding
    assert np.allclose(twice.li, 2.0 * once.li, rtol=0.0, atol=1e-300)


@settings(max_examples=40, deadline=None)
@given(field_texts, field_texts, st.sampled_from([0, 1]), jet_points)
def test_prolongation_is_additive(v_texts, w_texts, ut, at):
    v = VectorFieldQ.from_texts(ut, v_texts, name="v")
    w = VectorFieldQ.from_texts(0, w_texts, name="w")
    pv, pw, total = jet_prolong(v, at), jet_prolong(w, at), jet_prolong(v.plus(w), at)
    assert total.ut == ut
    assert np.allclose(total.ui, pv.ui + pw.ui, rtol=1e-12, atol=1e-12)
    assert np.allclose(total.dtui, pv.dtui + pw.dtui, rtol=1e-12, atol=1e-11)


@settings(max_examples=40, deadline=None)
@given(field_texts, jet_points)
def test_relative_velocity_restores_qt(texts, at):
    g = ReferenceFrame.from_texts(texts, name="g")
    gamma = np.array([float(x) for x in frame_scalars(g, at.bindings())])
    assert np.allclose(relative_velocity(g, at) + gamma, at.qt, rtol=0.0, atol=1e-12)
