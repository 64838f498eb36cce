import math

import pytest

from addcoal.cost_engine import DISPLACEMENT_TABLE_COST, ConditionalCost, Functional
from addcoal.smoluchowski import (
    QuadratureError,
    alpha_to_time,
    moment,
    phi_closed_form,
    phi_comparison_curve,
    phi_curve_quadrature,
    phi_displacement_floor,
    phi_classical_table,
    phi_quadrature,
    q,
    q_vector,
    smoluchowski_rhs,
    tagged_size_prob,
)

LOG2 = math.log(2.0)


def test_q_initial_condition():
    assert q(1, 0.0) == 1.0
    for k in range(2, 12):
        assert q(k, 0.0) == 0.0


def test_q_monomer_value():
    # q(1, t) = exp(-t - (1 - e^-t)); at t = log 2 this is 0.5 e^-0.5
    expected = 0.5 * math.exp(-0.5)
    assert abs(q(1, LOG2) - expected) < 1e-15
    assert abs(expected - 0.30327) < 5e-6


def test_q_nonnegative_and_vector_consistency():
    for t in (0.05, 0.7, 2.5):
        qv = q_vector(64, t)
        assert (qv >= 0.0).all()
        for k in (1, 2, 5, 40):
            assert abs(qv[k - 1] - q(k, t)) < 1e-15


def test_q_rejects_bad_args():
    with pytest.raises(ValueError):
        q(0, 1.0)
    with pytest.raises(ValueError):
        q(1, -0.1)


def test_moments_closed_form():
    assert moment(0.0, 0) == 1.0
    assert moment(1.0, 1) == 1.0
    assert abs(moment(1.0, 2) - math.e**2) < 1e-12
    assert abs(moment(1.0, 2) - 7.38906) < 5e-6


@pytest.mark.parametrize("t", [0.1, 1.0, 3.0])
@pytest.mark.parametrize("p", [0, 1, 2])
def test_moments_truncated_sum(t, p):
    assert abs(moment(t, p, "sum", tol=1e-11) - moment(t, p)) < 1e-8


def test_alpha_to_time():
    assert alpha_to_time(0.0) == 0.0
    assert abs(alpha_to_time(0.5) - LOG2) < 1e-15
    assert abs(alpha_to_time(1.0 - math.exp(-1.0)) - 1.0) < 1e-15
    with pytest.raises(ValueError):
        alpha_to_time(1.0)
    with pytest.raises(ValueError):
        alpha_to_time(-0.2)


def test_tagged_size_prob_identity():
    alpha = 0.3
    for k in range(2, 11):
        via_q = (k - 1) / alpha * q(k, alpha_to_time(alpha))
        assert abs(tagged_size_prob(k, alpha) - via_q) < 1e-12


def test_tagged_size_prob_sums_to_one():
    for alpha in (0.2, 0.5, 0.8):
        total = sum(tagged_size_prob(k, alpha) for k in range(2, 4000))
        assert abs(total - 1.0) < 1e-8


def test_tagged_size_prob_edges():
    assert tagged_size_prob(1, 0.4) == 0.0
    assert tagged_size_prob(2, 0.0) == 1.0  # the first merge makes a 2-cluster
    assert abs(tagged_size_prob(2, 1e-9) - 1.0) < 1e-6


def test_phi_closed_form_values():
    assert phi_closed_form(Functional.QF, 0.0) == 0.0
    assert abs(phi_closed_form(Functional.PREY, 0.5) - LOG2) < 1e-15
    assert abs(phi_closed_form(Functional.QFB, 0.5) - LOG2) < 1e-15
    assert abs(phi_closed_form(Functional.PREDATOR, 0.5) - 1.0) < 1e-15
    assert abs(phi_closed_form(Functional.DISPLACEMENT, 0.5) - 0.5) < 1e-15
    assert abs(phi_closed_form(Functional.QF, 0.5) - (0.5 + 0.5 * LOG2)) < 1e-15
    assert abs(phi_closed_form(Functional.QF, 0.5) - 0.8466) < 1e-4


def test_phi_displacement_floor():
    # probe-distance convention: alpha/(2(1-alpha)) - alpha/2
    assert phi_displacement_floor(0.0) == 0.0
    assert abs(phi_displacement_floor(0.5) - 0.25) < 1e-15
    assert phi_comparison_curve(Functional.DISPLACEMENT, 0.5) == phi_displacement_floor(0.5)
    assert phi_comparison_curve(Functional.PREY, 0.5) == phi_closed_form(Functional.PREY, 0.5)


def test_phi_classical_table_offsets():
    # table entries for QF, Predator, Displacement sit 1/2, 1, 1/2 above
    # the phi(0) = 0 normalization, at every alpha
    for alpha in (0.0, 0.3, 0.7):
        assert abs(
            phi_classical_table(Functional.QF, alpha) - phi_closed_form(Functional.QF, alpha) - 0.5
        ) < 1e-12
        assert abs(
            phi_classical_table(Functional.PREDATOR, alpha)
            - phi_closed_form(Functional.PREDATOR, alpha) - 1.0
        ) < 1e-12
        assert abs(
            phi_classical_table(Functional.DISPLACEMENT, alpha)
            - phi_closed_form(Functional.DISPLACEMENT, alpha) - 0.5
        ) < 1e-12
    assert phi_classical_table(Functional.QFW, 0.5) is None


def test_phi_quadrature_zero_alpha():
    assert phi_quadrature(Functional.QF, 0.0).value == 0.0


@pytest.mark.parametrize("functional", [Functional.QF, Functional.PREY, Functional.PREDATOR])
@pytest.mark.parametrize("alpha", [0.3, 0.6, 0.9])
def test_phi_quadrature_matches_closed_forms(functional, alpha):
    res = phi_quadrature(functional, alpha, tol=1e-9)
    assert abs(res.value - phi_closed_form(functional, alpha)) < 1e-7


def test_phi_quadrature_displacement_floor_convention():
    res = phi_quadrature(Functional.DISPLACEMENT, 0.6, tol=1e-9)
    assert abs(res.value - phi_displacement_floor(0.6)) < 1e-7
    res = phi_quadrature(DISPLACEMENT_TABLE_COST, 0.6, tol=1e-9)
    assert abs(res.value - phi_closed_form(Functional.DISPLACEMENT, 0.6)) < 1e-7


def test_phi_quadrature_generic_cost_matches_specialized():
    generic_prey = ConditionalCost("my-prey", lambda x, y: 2.0 * x * y / (x + y), (1.0, 1, 0))
    a = phi_quadrature(generic_prey, 0.4, tol=1e-9).value
    b = phi_quadrature(Functional.PREY, 0.4, tol=1e-9).value
    assert abs(a - b) < 1e-8


def test_qfw_min_vs_max_kernels_differ():
    # the two candidate QFW kernels are empirically distinguishable
    generic_max = ConditionalCost("max-side", lambda x, y: 0.5 * (x + y) + 0.5 * abs(x - y),
                                  (1.0, 1, 1))
    v_min = phi_quadrature(Functional.QFW, 0.5, tol=1e-9).value
    v_max = phi_quadrature(generic_max, 0.5, tol=1e-9).value
    assert v_max - v_min > 0.1


def test_phi_quadrature_validation():
    with pytest.raises(ValueError):
        phi_quadrature(Functional.QF, 0.999)
    with pytest.raises(ValueError):
        phi_quadrature(Functional.QF, 0.5, tol=0.0)
    with pytest.raises(TypeError):
        phi_quadrature(lambda x, y: x, 0.5)


def test_phi_curve_monotone_and_consistent():
    grid = [0.1, 0.3, 0.5, 0.7, 0.9]
    curve = phi_curve_quadrature(Functional.QFW, grid, tol=1e-9)
    values = [r.value for r in curve]
    assert values[0] > 0.0
    assert all(a < b for a, b in zip(values, values[1:]))
    single = phi_quadrature(Functional.QFW, 0.5, tol=1e-9).value
    assert abs(values[2] - single) < 1e-7


def test_phi_curve_rejects_bad_grid():
    with pytest.raises(ValueError):
        phi_curve_quadrature(Functional.QF, [0.5, 0.5])
    with pytest.raises(ValueError):
        phi_curve_quadrature(Functional.QF, [0.2, 0.999])


def test_phi_closed_form_qfw_routes_to_quadrature():
    routed = phi_closed_form(Functional.QFW, 0.5)
    direct = phi_quadrature(Functional.QFW, 0.5).value
    assert abs(routed - direct) < 1e-12


def test_simpson_panel_budget_reported(monkeypatch):
    import addcoal.smoluchowski as sm

    monkeypatch.setattr(sm, "_MAX_PANELS", 64)
    with pytest.raises(QuadratureError):
        phi_quadrature(Functional.QFW, 0.5, tol=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3, 7, 14, 20])
def test_coagulation_ode(k):
    h = 1e-5
    lhs = (q(k, 1.0 + h) - q(k, 1.0 - h)) / (2.0 * h)
    assert abs(lhs - smoluchowski_rhs(k, 1.0)) < 1e-6
