import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mixsing.errors import InvalidInput
from mixsing.grid import Domain, build_grid
from mixsing.problem import (G_k, G_t_h, NonlinearitySpec, ProblemSpec, S_delta_k, SourceSpec, T_k,
                             V_delta_k, build_truncated_data, classify_regime, exponential_decay,
                             power_absorption, shifted_power, validate_hypotheses)

reals = st.floats(-1e6, 1e6, allow_nan=False)
pos = st.floats(1e-3, 1e3)


@given(pos, reals)
def test_truncation_identity(k, s):
    assert T_k(k, s) + G_k(k, s) == pytest.approx(s, rel=1e-15, abs=1e-9)
    assert abs(T_k(k, s)) <= k


@given(pos, pos, reals)
def test_S_and_V(delta, k, s):
    assert S_delta_k(delta, k, s) + V_delta_k(delta, k, s) == 1
    assert 0 <= S_delta_k(delta, k, s) <= 1
    if s <= k:
        assert S_delta_k(delta, k, s) == 0
    if s >= k + delta:
        assert S_delta_k(delta, k, s) == 1


@given(st.floats(0, 10), pos, reals)
def test_level_set_test_function(t, h, th):
    v = G_t_h(t, h, th)
    assert 0 <= v <= h
    if th <= t:
        assert v == 0
    if th >= t + h:
        assert v == h


def test_regime_example():
    r = classify_regime(0.5, 2, 5)
    assert r.q_threshold == 0.0
    assert r.m_threshold == 10 / 6.5
    assert r.p_exponent == 15.0
    assert r.case == "i" and r.genuine_gain


def test_regime_cases_and_conventions():
    assert classify_regime(1.0, 2, 3).q_threshold == -1
    assert classify_regime(0.5, 2, 3).case == "ii"
    r = classify_regime(0.5, 2, 4)
    assert r.case == "iii" and r.p_exponent is None
    with pytest.raises(InvalidInput) as e:
        classify_regime(0.5, 1, 3)
    assert e.value.code == "outside-theory"
    assert classify_regime(1.0, 1, 3).case is None


@given(st.floats(0, 0.99), st.floats(1.01, 10), st.integers(3, 12))
def test_gain_matches_defining_inequality(gamma, m, n):
    r = classify_regime(gamma, m, n)
    if r.case == "i":
        assert r.genuine_gain == (r.q_threshold + 1 < r.p_exponent)
        # the defining inequality is equivalent to m above the consistent threshold
        if abs(m - r.m_threshold_consistent) > 1e-9:
            assert r.genuine_gain == (m > r.m_threshold_consistent)


def test_scalar_map_derivatives():
    t = np.linspace(0.1, 3, 50)
    for fmap in (power_absorption(2.5), shifted_power(0.7, 0.3), exponential_decay(1.5, 2.0)):
        num = (fmap(t + 1e-6) - fmap(t - 1e-6)) / 2e-6
        np.testing.assert_allclose(fmap.derivative(t), num, rtol=1e-6)


def _spec(**kw):
    nl = kw.pop("nl", NonlinearitySpec(0.5, 2.0))
    f = kw.pop("f", SourceSpec("polynomial", {"coefficients": [1, 0, 1]}))
    return ProblemSpec(Domain.interval(-1, 1), kw.pop("s", 0.25), nl, f, **kw)


def test_truncated_data():
    g = build_grid(Domain.interval(-1, 1), 8)
    spec = _spec(f=SourceSpec("constant", {"value": 5.0}))
    d = build_truncated_data(spec, 2, 3.0, g)
    np.testing.assert_allclose(d.f_n.values, 2.0)
    t = np.array([-1.0, 0.0, 1.0, 2.0, 10.0])
    np.testing.assert_allclose(d.g_k(t), [0, 0, 1, 3, 3])
    np.testing.assert_allclose(d.h_reg(t), (np.maximum(t, 0) + 0.5) ** -0.5)
    tr = build_truncated_data(_spec(h_form="truncation"), 4, 3.0, g)
    np.testing.assert_allclose(tr.h_reg(np.array([0.0, 1 / 64, 1.0])), [4.0, 4.0, 1.0])


def test_validation_model_passes():
    rep = validate_hypotheses(_spec())
    assert rep.passed
    assert {c.name for c in rep.checks} >= {"h1", "h2", "Hf-integrability", "g1-exponent"}


def test_validation_failures():
    assert not validate_hypotheses(_spec(m=1.0)).passed  # θ < 1 needs m > 1
    low_q = _spec(nl=NonlinearitySpec(0.1, 0.2), m=1.5)  # q below (1 − mθ)/(m − 1) = 1.7
    assert "g1-exponent" in [c.name for c in validate_hypotheses(low_q).failures()]
    neg = _spec(f=SourceSpec("polynomial", {"coefficients": [-1, 0, 1]}))
    assert "f-nonnegative" in [c.name for c in validate_hypotheses(neg).failures()]
    sing = _spec(f=SourceSpec("radial_power", {"exponent": 0.6, "center": [0.05]}), m=2.0)
    assert "Hf-integrability" in [c.name for c in validate_hypotheses(sing).failures()]


def test_validation_custom_mode():
    nl = NonlinearitySpec(0.5, 2.0, theta=0.5, mode="custom", g=power_absorption(2.0),
                          h=shifted_power(0.5, 0.0), singular_at_zero=True)
    assert validate_hypotheses(_spec(nl=nl)).passed
    grow = NonlinearitySpec(0.5, 2.0, theta=0.5, mode="custom", g=power_absorption(2.0),
                            h=exponential_decay(-1.0), singular_at_zero=False)
    names = [c.name for c in validate_hypotheses(_spec(nl=grow)).failures()]
    assert "h-nonincreasing" in names and "h2" in names
    with pytest.raises(InvalidInput):
        NonlinearitySpec(0.5, 2.0, mode="custom")
    # t^40 overflows on the sampling grid; infinite samples must not read as a decrease
    steep = NonlinearitySpec(0.5, 40.0, theta=0.5, mode="custom", g=power_absorption(40.0),
                             h=shifted_power(0.5, 0.0), singular_at_zero=True)
    rep = {c.name: c.status for c in validate_hypotheses(_spec(nl=steep)).checks}
    assert rep["g-nondecreasing"] != "fail"


def test_spec_errors():
    with pytest.raises(InvalidInput):
        _spec(s=1.0)
    with pytest.raises(InvalidInput):
        _spec(h_form="other")
    with pytest.raises(InvalidInput):
        SourceSpec("nope").callable(1)


def test_source_presets_2d():
    g = build_grid(Domain.rectangle(-1, 1, -1, 1), 4)
    poly = SourceSpec("polynomial", {"terms": [[1, 0, 0], [2, 1, 1]]}).sample(g, nonnegative=False)
    x, y = g.interior_nodes.T
    np.testing.assert_allclose(poly.values, 1 + 2 * x * y)
    gb = SourceSpec("gaussian", {"amplitude": 2, "width": 0.5, "center": [0, 0]}).sample(g)
    assert gb.values.max() == pytest.approx(2.0)
    assert SourceSpec("radial_power", {"exponent": 0.5}).in_Lm(3, 2)
    assert not SourceSpec("radial_power", {"exponent": 0.5}).in_Lm(4, 2)
    assert math.isclose(SourceSpec("constant", {"value": 3}).sample(g).values.sum(), 27)
