import math

import numpy as np
import pytest
import sympy as sp

from lavgap.errors import PreconditionError, UnknownExampleError
from lavgap.examples import (alberti_phi_t_nu, alberti_q, alberti_t_nu, alberti_y_nu_tail,
                             get_example, list_examples, mania_eps, mania_phi_end, mania_s0,
                             mania_tau0, mania_w11_head, mania_w11_head_bound, mania_w11_tail,
                             mania_y_nu, power)


def test_registry():
    names = list_examples()
    assert {"mania", "alberti", "baseline", "power"} <= set(names)
    with pytest.raises(UnknownExampleError):
        get_example("nope")
    with pytest.raises(PreconditionError):
        get_example("mania", q=3)
    assert get_example("power", q=3.0, a=0.8).lagrangian.name
    with pytest.raises(PreconditionError):
        get_example("power", q=3.0)


@pytest.mark.parametrize("nu", [2.0, 4.0, 8.0, 100.0])
def test_mania_closed_forms_consistent(nu):
    assert mania_s0(nu) == pytest.approx(1 / (math.sqrt(3) * nu**1.5), rel=1e-15)
    assert mania_tau0(nu) == pytest.approx((1 / (3 * nu)) ** 1.5, rel=1e-15)
    assert mania_eps(nu) == pytest.approx(mania_phi_end(nu) - 1, abs=1e-15)
    s0 = mania_s0(nu)
    # continuity of y_nu at s0 and slope nu on the head
    left, right = mania_y_nu([s0 * (1 - 1e-12), s0 * (1 + 1e-12)], nu)
    assert left == pytest.approx(right, abs=1e-9)
    assert mania_w11_head(nu) <= mania_w11_head_bound(nu)


def test_mania_w11_tail_against_sympy():
    s = sp.symbols("s", positive=True)
    nu = sp.Integer(100)
    s0 = 1 / (sp.sqrt(3) * nu ** sp.Rational(3, 2))
    c = 2 / (3 * sp.sqrt(3) * nu ** sp.Rational(3, 2))
    # y' >= y_nu' on the tail, so the absolute value drops
    tail = sp.integrate(sp.diff(s ** sp.Rational(1, 3) - (s - c) ** sp.Rational(1, 3), s),
                        (s, s0, 1))
    assert mania_w11_tail(100.0) == pytest.approx(abs(float(tail)), rel=1e-12)


def test_alberti_closed_forms():
    assert alberti_q(0.5) == 1.0
    assert alberti_t_nu(2.0) == 0.9375
    assert alberti_phi_t_nu(2.0) == pytest.approx(1 - 1 / 8)
    np.testing.assert_allclose(alberti_y_nu_tail(np.array([1.0, 0.9]), 2.0), [1.0, 0.8])


def test_power_energy_formula():
    for q, a in ((2.0, 0.6), (3.0, 0.8), (1.0, 0.5)):
        e = power(q=q, a=a)
        s = sp.symbols("s", positive=True)
        exact = sp.integrate((sp.Rational(a).limit_denominator() * s ** (sp.Rational(a).limit_denominator() - 1)) ** sp.Rational(q).limit_denominator(), (s, 0, 1))
        assert e.analytic.F_y == pytest.approx(float(exact), rel=1e-12)


def test_specs_are_consistent():
    for name in ("mania", "alberti", "baseline"):
        spec = get_example(name)
        y = spec.trajectory
        assert float(y.value(y.t)) == spec.X
        if spec.Y is not None:
            assert float(y.value(y.T)) == spec.Y
