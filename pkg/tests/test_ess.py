import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hgtlab.errors import ConvergenceError, DomainError
from hgtlab.ess import (
    DiscreteESS,
    check_hypothesis_37,
    classify,
    compute_constants,
    dimorphic_ess,
    fitness,
    fitness_derivative,
    fitness_values,
    gap_function,
    j2,
    j2_mu_derivative,
    monomorphic_ess,
    solve_system45,
    sweep,
    trimorphic_branch,
    trimorphic_ess,
    verify_ess,
)
from hgtlab.kernels import ModelParams, make_kernel

from oracles import REF_ROWS, dimorphic_oracle, tanh_constants, three_point_residual

ORACLE_ZH, ORACLE_D1, ORACLE_C1, ORACLE_MU1 = tanh_constants()


def test_constants_match_bisection_oracle(kc):
    assert kc.d1 == pytest.approx(ORACLE_D1, abs=1e-10)
    assert kc.C1 == pytest.approx(ORACLE_C1, abs=1e-10)
    assert kc.mu1 == pytest.approx(ORACLE_MU1, abs=1e-9)


def test_constants_frozen_values(kc):
    assert kc.d1 == pytest.approx(1.6061153, abs=1e-7)
    assert kc.C1 == pytest.approx(0.851161, abs=1e-6)
    assert kc.mu1 == pytest.approx(1.886970, abs=1e-6)
    # 1 / max tanh'' = 3 sqrt(3) / 4
    assert kc.C2 == pytest.approx(3 * math.sqrt(3) / 4, abs=1e-9)


def test_constants_ordering(kc):
    assert kc.d1 > kc.z_H
    assert kc.mu1 < 2
    assert kc.mu2 > kc.mu1
    assert 0 < kc.C1 < 1


def test_gap_has_single_sign_change(tanh, kc):
    z = np.arange(kc.z_H, 40.0, 1e-3)
    G = gap_function(tanh, z)
    assert np.count_nonzero(np.diff(np.sign(G)) != 0) == 1


def test_mu2_and_z3(kc):
    assert kc.mu2 == pytest.approx(4.03729, abs=1e-3)
    assert kc.z3 == pytest.approx(0.513, abs=5e-3)


def test_arctan_constants():
    kc = compute_constants(make_kernel("arctan"))
    assert kc.d1 > kc.z_H
    assert kc.mu1 < 2 < kc.mu2 + 1
    assert kc.mu2 > kc.mu1
    assert (kc.d1, kc.mu1) == pytest.approx((0.96448, 1.38469), abs=1e-5)


def test_j2_two_zero_maxima_at_mu1(tanh, kc):
    z = np.arange(-2.0, kc.mu1 + 5.0, 1e-4)
    J = j2(z, kc.mu1, tanh, kc)
    assert J.max() <= 1e-7
    peaks = np.nonzero((J[1:-1] >= J[:-2]) & (J[1:-1] >= J[2:]))[0] + 1
    top = [z[i] for i in peaks if J[i] > -1e-6]
    assert len(top) == 2
    assert sorted(top) == pytest.approx([kc.mu1 - kc.d1, kc.mu1], abs=1e-3)


def test_hypothesis_37(tanh, kc):
    assert check_hypothesis_37(tanh, kc, kc.mu2)
    assert check_hypothesis_37(tanh, kc, 6.0)
    assert j2_mu_derivative(tanh, kc, kc.mu2) > 0
    with pytest.raises(DomainError):
        check_hypothesis_37(tanh, kc, kc.mu2 - 0.1)


# ---------------------------------------------------------------------------
# closed-form equilibria


def test_monomorphic_scenario(kc):
    e = monomorphic_ess(ModelParams(0.5, 1.0), kc)
    assert e.valid and e.points == (0.25,) and e.rho0 == 0.9375


def test_monomorphic_no_transfer(kc):
    e = monomorphic_ess(ModelParams(0.0, 1.0), kc)
    assert e.valid and e.points == (0.0,) and e.rho0 == 1.0


def test_monomorphic_invalid_above_mu1(kc):
    e = monomorphic_ess(ModelParams(0.5, 0.065), kc)
    assert not e.valid and e.violated_condition == "mu > mu1"


def test_dimorphic_scenario(tanh, kc):
    e = dimorphic_ess(ModelParams(0.5, 0.065), kc, tanh)
    z1, z2, rho0, _ = dimorphic_oracle(0.5, 0.065)
    assert e.valid
    assert e.points == pytest.approx((z1, z2), abs=1e-9)
    assert e.rho0 == pytest.approx(rho0, abs=1e-9)
    assert e.points == pytest.approx((3.013, 1.407), abs=2e-2)
    assert e.rho0 == pytest.approx(0.527, abs=2e-2)


def test_dimorphic_degenerates_at_mu1(tanh, kc):
    p = ModelParams.from_mu(kc.mu1, 0.5)
    e = dimorphic_ess(p, kc, tanh)
    assert not e.valid and e.violated_condition == "mu <= mu1"
    assert e.points[0] == pytest.approx(kc.mu1, abs=1e-12)
    assert e.weights[1] == pytest.approx(0.0, abs=1e-15)


def test_dimorphic_invalid_above_mu2(tanh, kc):
    e = dimorphic_ess(ModelParams.from_mu(5.0, 0.5), kc, tanh)
    assert not e.valid and e.violated_condition == "mu > mu2"


def test_dimorphic_tau_threshold(tanh, kc):
    e = dimorphic_ess(ModelParams.from_mu(3.0, 50.0), kc, tanh)
    assert not e.valid and e.violated_condition == "tau >= tau2"


def test_dimorphic_continuity_at_mu1(tanh, kc):
    tau = 0.5
    e = dimorphic_ess(ModelParams.from_mu(kc.mu1 + 1e-6, tau), kc, tanh)
    z1, z2 = e.points
    a, b = e.weights
    expected = (kc.mu1, kc.mu1 - kc.d1, 1 - tau * kc.mu1 / 2, 0.0, 1 - tau * kc.mu1 / 2)
    assert (z1, z2, a, b, e.rho0) == pytest.approx(expected, abs=1e-4)


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=0.0, max_value=1.0, exclude_min=True))
def test_property_dimorphic_algebra(tanh, kc, s):
    mu = kc.mu1 + s * (kc.mu2 - kc.mu1)
    e = dimorphic_ess(ModelParams.from_mu(mu, 0.5), kc, tanh)
    assert e.points[0] - e.points[1] == pytest.approx(kc.d1, abs=1e-12)
    assert e.weights[0] - e.weights[1] == pytest.approx(e.rho0 * kc.mu1 / mu, abs=1e-12)
    assert e.rho0 == pytest.approx(sum(e.weights), abs=1e-15)


@settings(max_examples=25, deadline=None)
@given(st.one_of(st.just(0.0), st.floats(min_value=1e-3, max_value=1.0)))
def test_property_monomorphic_is_ess(tanh, kc, s):
    mu = s * kc.mu1
    p = ModelParams.from_mu(mu, 0.5) if mu > 0 else ModelParams(0.0, 1.0)
    e = monomorphic_ess(p, kc)
    assert e.valid
    assert verify_ess(e, p, tanh).valid


@settings(max_examples=15, deadline=None)
@given(st.floats(min_value=0.01, max_value=1.0))
def test_property_dimorphic_is_ess(tanh, kc, s):
    mu = kc.mu1 + s * (kc.mu2 - kc.mu1)
    p = ModelParams.from_mu(mu, 0.5)
    e = dimorphic_ess(p, kc, tanh)
    assert e.valid
    rep = verify_ess(e, p, tanh)
    assert rep.valid, rep.failures
    assert all(0 <= z <= min(mu, 2 * math.sqrt(mu)) for z in e.points)


# ---------------------------------------------------------------------------
# three-point system


def test_trimorphic_mu_4_16(tanh, kc):
    e = trimorphic_ess(ModelParams(0.5, 0.06), kc, tanh)
    assert e.points == pytest.approx((3.181, 1.581, 0.5532), abs=1e-2)
    assert e.fractions == pytest.approx((0.723, 0.2662, 0.011), abs=1e-2)
    assert e.rho0 == pytest.approx(0.52, abs=1e-2)


def test_trimorphic_starts_from_dimorphic(tanh, kc):
    mu = kc.mu2 + 1e-3
    sol = trimorphic_branch([mu], 0.5, kc=kc, kernel=tanh)[mu]
    d = dimorphic_ess(ModelParams.from_mu(kc.mu2, 0.5), kc, tanh)
    assert sol.fractions[2] == pytest.approx(0.0, abs=1e-3)
    assert sol.points[:2] == pytest.approx(d.points, abs=1e-2)
    assert sol.points[2] == pytest.approx(0.513, abs=5e-3)


def test_trimorphic_requires_mu_above_mu2(tanh, kc):
    with pytest.raises(DomainError):
        trimorphic_ess(ModelParams.from_mu(3.0, 0.5), kc, tanh)


def test_trimorphic_with_seed(tanh, kc):
    p = ModelParams.from_mu(5.0, 0.5)
    base = trimorphic_ess(p, kc, tanh)
    again = trimorphic_ess(p, kc, tanh, seed=base)
    assert again.points == pytest.approx(base.points, abs=1e-10)


def test_newton_divergence_reports_last_iterate(tanh):
    with pytest.raises(ConvergenceError) as exc:
        solve_system45(5.0, 0.05, tanh, np.array([0.0, 0.0, 0.0, 0.5, 0.5, 0.5]))
    assert exc.value.last_iterate is not None


def test_reference_mu5_row_is_not_a_root():
    # the reference row fails the stationarity equations; replacing z1 = 3.5396
    # by 3.5496 brings the residual down by two orders of magnitude
    mu, g, z1, z2, z3, f1, f2, f3, rho0 = REF_ROWS[4]
    reference = three_point_residual(mu, g, (z1, z2, z3), (f1, f2, f3), rho0)
    swapped = three_point_residual(mu, g, (3.5496, z2, z3), (f1, f2, f3), rho0)
    assert reference > 0.05
    assert swapped < reference / 50


def test_reference_other_rows_near_roots():
    for row in REF_ROWS[1:]:
        if row[0] == 5.0:
            continue
        mu, g, z1, z2, z3, f1, f2, f3, rho0 = row
        assert three_point_residual(mu, g, (z1, z2, z3), (f1, f2, f3), rho0) < 0.05


# ---------------------------------------------------------------------------
# fitness and verification


def test_fitness_monomorphic_first_order(tanh, kc):
    p = ModelParams(0.5, 1.0)
    e = monomorphic_ess(p, kc)
    z0, h = e.points[0], 1e-5
    F = lambda z: float(fitness_values(e, p, tanh, np.array([z]))[0])
    assert abs(F(z0)) <= 1e-9
    assert abs((F(z0 + h) - F(z0 - h)) / (2 * h)) <= 1e-9
    assert abs(float(fitness_derivative(e, p, tanh, np.array([z0]))[0])) <= 1e-12


def test_fitness_dimorphic_zeros(tanh, kc):
    p = ModelParams(0.5, 0.065)
    e = dimorphic_ess(p, kc, tanh)
    assert np.max(np.abs(fitness_values(e, p, tanh, np.array(e.points)))) <= 1e-9


def test_fitness_symmetric_measure(tanh):
    e = DiscreteESS((1.0, -1.0), (0.5, 0.5), 1.0)
    prof = fitness(e, ModelParams(0.5, 1.0), tanh, np.array([0.0]))
    assert prof.transfer[0] == 0.0


def test_fitness_empty_grid(tanh):
    e = DiscreteESS((0.0,), (1.0,), 1.0)
    with pytest.raises(DomainError):
        fitness(e, ModelParams(0.5, 1.0), tanh, np.array([]))


def test_verify_rejects_monomorphic_above_mu1(tanh, kc):
    p = ModelParams.from_mu(3.0, 0.5)
    e = monomorphic_ess(p, kc)
    rep = verify_ess(e, p, tanh)
    assert not rep.valid
    assert float(fitness_values(e, p, tanh, np.array([3.0 - kc.d1]))[0]) > 0
    assert rep.max_fitness_excursion > 0


def test_verify_rejects_candidate_at_6_3176(tanh, kc):
    p = ModelParams.from_mu(6.3176, 0.5)
    sol = trimorphic_branch([6.3176], 0.5, tanh, kc)[6.3176]
    rep = verify_ess(sol.to_ess(), p, tanh)
    assert not rep.valid
    assert rep.argmax == pytest.approx(0.7123, abs=5e-2)


def test_report_json_fields(tanh, kc):
    e = monomorphic_ess(ModelParams(0.5, 1.0), kc)
    d = e.to_dict()
    for key in ("points", "weights", "rho0", "morphism", "valid", "violated_condition"):
        assert key in d
    assert "max_fitness_excursion" in verify_ess(e, ModelParams(0.5, 1.0), tanh).to_dict()


def test_discrete_ess_sorted_decreasing():
    e = DiscreteESS((1.0, 3.0, 2.0), (0.1, 0.3, 0.2), 0.6)
    assert e.points == (3.0, 2.0, 1.0)
    assert e.weights == (0.3, 0.2, 0.1)


# ---------------------------------------------------------------------------
# sweep


def test_sweep_regimes(tanh, kc):
    rows = sweep([0.25, 1.0, 3.0, 3.5, 5.0, 6.25, 6.3176], 0.5, tanh, kc)
    regimes = [r.regime for r in rows]
    assert regimes == ["mono", "mono", "di", "di", "tri", "tri", "none"]
    assert [r.mu for r in rows] == sorted(r.mu for r in rows)


def test_classify_consistent_with_validity(tanh, kc):
    for mu in (0.5, 2.5, 4.5):
        p = ModelParams.from_mu(mu, 0.5)
        regime, e = classify(p, kc, tanh)
        assert e.valid == (regime != "none")
