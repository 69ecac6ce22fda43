import math

import numpy as np
import pytest

from noisescope.analytics import (
    COHERENT_STRENGTH_LIMIT,
    CoherentDecay,
    LongCorrelationDecay,
    ShortCorrelationDecay,
    closed_form_laws,
    dephased_single_qubit_state,
    dephasing_exponent,
    dephasing_kraus_pair,
    initial_decay_rate,
    linear_decay_fit,
    predicted_decay_rate,
    quadratic_strength_fit,
    saturating_decay_fit,
    single_qubit_fidelity,
    subset_decay_rate,
    system_fidelity,
)
from noisescope.linalg import PAULI_I, PAULI_X, PAULI_Y, PAULI_Z, ProductOperator, ValidationError
from noisescope.noise import Constant, Correlation, Gaussian, build_noise_model

from oracles import one_step_fidelity_mc, taylor_unitary


def op(n, assignments):
    return ProductOperator.from_assignments(n, assignments)


class TestInitialDecayRate:
    @pytest.mark.parametrize("weight", [1, 2, 3])
    def test_pure_weights(self, weight):
        # a weight-nu term fully inside a pure measured set contributes
        # (1 - 1/3^nu) chi^2
        n = 3
        assignments = {q: "X" for q in range(weight)}
        pred = initial_decay_rate(
            [(op(n, assignments), 0.01)], range(n), {q: 1.0 for q in range(n)}
        )
        assert pred.value == pytest.approx(0.01 * (1 - 3.0**-weight), rel=1e-14)

    def test_maximally_mixed_qubit_is_noise_blind(self):
        # one-body term on a measured qubit with purity 1/2 contributes 0
        pred = initial_decay_rate([(op(1, {0: "Z"}), 0.01)], [0], {0: 0.5})
        assert pred.value == 0.0

    def test_term_outside_measured_set_contributes_nothing(self):
        pred = initial_decay_rate(
            [(op(2, {1: "Z"}), 0.01)], [0], {0: 1.0}
        )
        assert pred.value == 0.0
        assert pred.contributions[0][1] == 0.0

    def test_neighbor_coupling_seen_at_two_thirds(self):
        # a two-body term with one leg outside the measured set counts as
        # a one-body term: (2/3) chi^2
        pred = initial_decay_rate(
            [(op(2, {0: "X", 1: "Z"}), 0.01)], [0], {0: 1.0}
        )
        assert pred.value == pytest.approx((2.0 / 3.0) * 0.01, rel=1e-14)

    def test_value_is_sum_of_contributions(self):
        rng = np.random.default_rng(0)
        terms = [
            (op(3, {0: "X"}), 0.01),
            (op(3, {0: "Z", 2: "Y"}), 0.02),
            (op(3, {1: "Y"}), 0.005),
        ]
        purities = {0: 1.0, 1: 0.7, 2: 0.5}
        pred = initial_decay_rate(terms, [0, 1, 2], purities)
        assert pred.value == pytest.approx(
            sum(c for _, c in pred.contributions), rel=1e-14
        )

    def test_imaginary_part_branch(self):
        # anti-Hermitian component: -im2 * (prod P + prod C)
        pred = initial_decay_rate([(op(1, {0: "Z"}), 0.0, 0.01)], [0], {0: 1.0})
        assert pred.value == pytest.approx(-0.01 * (1 + 1.0 / 3.0), rel=1e-14)

    def test_purity_range_validated(self):
        with pytest.raises(ValidationError):
            initial_decay_rate([(op(1, {0: "Z"}), 0.01)], [0], {0: 0.3})

    def test_purities_must_cover_measured_set(self):
        with pytest.raises(ValidationError):
            initial_decay_rate([(op(2, {0: "Z"}), 0.01)], [0, 1], {0: 1.0})

    def test_matches_subset_formula_exactly(self):
        # same arithmetic on both routes: exact equality, not approximate
        for weight, measured in [(1, [0]), (2, [0, 1]), (3, [0, 1, 2])]:
            assignments = {q: "Y" for q in range(weight)}
            general = initial_decay_rate(
                [(op(3, assignments), 1.0)],
                measured,
                {q: 1.0 for q in measured},
            ).value
            by_subset = subset_decay_rate(
                {frozenset(range(weight)): 1.0}, measured
            )
            assert general == by_subset

    def test_one_step_monte_carlo_agreement(self):
        # brute-force rotation sampling with an exact error operator
        rng = np.random.default_rng(1)
        chi = 0.04
        # X on qubit 1, plus (Z on qubit 0) * (Y on qubit 1); qubit 0 is
        # the rightmost kron factor
        g = chi * np.kron(PAULI_X, PAULI_I) + chi * np.kron(PAULI_Y, PAULI_Z)
        e = taylor_unitary(g, 40)
        bloch = [np.array([[1, 0], [0, 0]], dtype=complex), 0.5 * PAULI_I]
        mean_f, stderr = one_step_fidelity_mc(bloch, e, [0], 200_000, rng)
        gamma_mc = 1.0 - mean_f  # f0 = 1 on the measured qubit
        pred = initial_decay_rate(
            [(op(2, {1: "X"}), chi**2), (op(2, {0: "Z", 1: "Y"}), chi**2)],
            [0],
            {0: 1.0},
        )
        assert abs(gamma_mc - pred.value) <= 3 * stderr + 10 * (2 * chi**2) ** 2

    def test_predicted_decay_rate_uses_second_moments(self):
        model = build_noise_model(
            2, Correlation.INCOHERENT_LONG, one_body=Gaussian(0.0, 0.05)
        )
        pred = predicted_decay_rate(model, [0, 1], {0: 1.0, 1: 1.0})
        # 6 terms, each second moment 0.0025, weight 2/3
        assert pred.value == pytest.approx(6 * 0.0025 * 2 / 3, rel=1e-12)


class TestSubsetDecayRate:
    def test_single_pair_strength(self):
        s = 3.6e-3
        strengths = {frozenset({0, 1}): s}
        g_a = subset_decay_rate(strengths, [0])
        g_b = subset_decay_rate(strengths, [1])
        g_ab = subset_decay_rate(strengths, [0, 1])
        assert g_a == pytest.approx((2 / 3) * s, rel=1e-12)
        assert g_ab == pytest.approx((8 / 9) * s, rel=1e-12)
        assert g_a + g_b - g_ab == pytest.approx((4 / 9) * s, rel=1e-12)

    def test_triple_combination(self):
        s = 2.5e-3
        strengths = {frozenset({0, 1, 2}): s}
        combo = (
            sum(subset_decay_rate(strengths, [q]) for q in range(3))
            - sum(
                subset_decay_rate(strengths, pair)
                for pair in ([0, 1], [0, 2], [1, 2])
            )
            + subset_decay_rate(strengths, [0, 1, 2])
        )
        assert combo == pytest.approx((8 / 27) * s, rel=1e-12)

    def test_zero_strengths(self):
        assert subset_decay_rate({frozenset({0}): 0.0}, [0]) == 0.0

    def test_large_set_rejected(self):
        with pytest.raises(ValidationError):
            subset_decay_rate({}, [0, 1, 2, 3])

    def test_negative_strength_rejected(self):
        with pytest.raises(ValidationError):
            subset_decay_rate({frozenset({0}): -1.0}, [0])


class TestDecayLaws:
    def test_coherent_rate_value(self):
        assert CoherentDecay(0.08).rate == pytest.approx(0.0085516, abs=5e-8)

    def test_short_correlation_rate_values(self):
        assert ShortCorrelationDecay(0.0, 0.08).rate == pytest.approx(
            0.0085151, abs=5e-8
        )

    def test_intercept(self):
        for law in (
            CoherentDecay(0.1),
            LongCorrelationDecay(0.05, 0.05),
            ShortCorrelationDecay(0.05, 0.05),
        ):
            assert single_qubit_fidelity(law, 0.8, 0) == pytest.approx(0.8, abs=1e-15)

    def test_small_strength_expansion(self):
        alpha = 0.01
        assert abs(CoherentDecay(alpha).rate - 4 * alpha**2 / 3) < 10 * alpha**4

    def test_oscillatory_regime_rejected(self):
        with pytest.raises(ValidationError):
            CoherentDecay(COHERENT_STRENGTH_LIMIT + 0.01)

    def test_long_correlation_factor(self):
        law = LongCorrelationDecay(0.0, 0.08)
        t = 25.0
        expected = 1.0 / math.sqrt(1 + (8 / 3) * 0.08**2 * t)
        assert law.factor(t) == pytest.approx(expected, rel=1e-12)

    def test_system_fidelity_is_product(self):
        laws = [CoherentDecay(0.05)] * 3
        f = system_fidelity(laws, [1.0, 1.0, 1.0], 4)
        assert f == pytest.approx(single_qubit_fidelity(laws[0], 1.0, 4) ** 3)


class TestClosedFormLaws:
    def test_coherent_constant_model(self):
        model = build_noise_model(2, Correlation.COHERENT, one_body=Constant(0.05))
        laws = closed_form_laws(model)
        assert all(isinstance(l, CoherentDecay) for l in laws)
        assert laws[0].strength == pytest.approx(math.sqrt(3) * 0.05)

    def test_single_gaussian_term_per_qubit(self):
        from noisescope.noise import NoiseModel, NoiseTerm

        terms = tuple(
            NoiseTerm(op(2, {q: "Z"}), Gaussian(0.0, 0.08)) for q in range(2)
        )
        model = NoiseModel(2, terms, Correlation.INCOHERENT_SHORT)
        laws = closed_form_laws(model)
        assert all(isinstance(l, ShortCorrelationDecay) for l in laws)

    def test_no_closed_form_for_two_body(self):
        model = build_noise_model(2, Correlation.COHERENT, two_body=Constant(0.05))
        assert closed_form_laws(model) is None

    def test_no_closed_form_for_multi_axis_gaussian(self):
        model = build_noise_model(
            2, Correlation.INCOHERENT_SHORT, one_body=Gaussian(0.0, 0.08)
        )
        assert closed_form_laws(model) is None

    def test_no_closed_form_in_oscillatory_regime(self):
        model = build_noise_model(2, Correlation.COHERENT, one_body=Constant(0.4))
        assert closed_form_laws(model) is None


class TestDephasing:
    def test_zero_noise_leaves_state(self):
        rho = dephased_single_qubit_state(
            (0.6, 0.0, 0.8), 0.0, 0.0, 7, Correlation.INCOHERENT_LONG
        )
        expected = 0.5 * (PAULI_I + 0.6 * PAULI_X + 0.8 * PAULI_Z)
        np.testing.assert_allclose(rho, expected, atol=1e-15)

    def test_transverse_decay_long_correlation(self):
        sigma, t = 0.05, 10
        rho = dephased_single_qubit_state(
            (1.0, 0.0, 0.0), 0.0, sigma, t, Correlation.INCOHERENT_LONG
        )
        x = np.trace(rho @ PAULI_X).real
        assert x == pytest.approx(math.exp(-2 * sigma**2 * t**2), rel=1e-12)

    def test_longitudinal_component_unchanged(self):
        rho = dephased_single_qubit_state(
            (0.5, 0.3, 0.4), 0.1, 0.2, 5, Correlation.INCOHERENT_SHORT
        )
        assert np.trace(rho @ PAULI_Z).real == pytest.approx(0.4, abs=1e-12)

    def test_exponent_comparison_as_printed(self):
        # delta_long = 2 s^2 t^2 dominates delta_short = 2 s^2 t for t >= 1
        for t in (1, 2, 5, 20):
            d_long = dephasing_exponent(0.1, t, Correlation.INCOHERENT_LONG)
            d_short = dephasing_exponent(0.1, t, Correlation.INCOHERENT_SHORT)
            assert math.exp(-d_long) <= math.exp(-d_short)

    def test_kraus_completeness(self):
        for delta in (0.0, 0.3, 2.0):
            m1, m2 = dephasing_kraus_pair(0.25, delta)
            np.testing.assert_allclose(
                m1.conj().T @ m1 + m2.conj().T @ m2, PAULI_I, atol=1e-12
            )

    def test_kraus_reproduces_closed_form(self):
        alpha, sigma, t = 0.1, 0.07, 6
        bloch = (0.4, -0.5, 0.2)
        rho0 = 0.5 * (
            PAULI_I + bloch[0] * PAULI_X + bloch[1] * PAULI_Y + bloch[2] * PAULI_Z
        )
        delta = dephasing_exponent(sigma, t, Correlation.INCOHERENT_SHORT)
        m1, m2 = dephasing_kraus_pair(alpha * t, delta)
        via_kraus = m1 @ rho0 @ m1.conj().T + m2 @ rho0 @ m2.conj().T
        closed = dephased_single_qubit_state(
            bloch, alpha, sigma, t, Correlation.INCOHERENT_SHORT
        )
        np.testing.assert_allclose(via_kraus, closed, atol=1e-12)

    def test_invalid_bloch_vector_rejected(self):
        with pytest.raises(ValidationError):
            dephased_single_qubit_state(
                (1.0, 1.0, 0.0), 0.0, 0.1, 1, Correlation.INCOHERENT_SHORT
            )

    def test_coherent_class_rejected(self):
        with pytest.raises(ValidationError):
            dephasing_exponent(0.1, 1, Correlation.COHERENT)


class TestFits:
    def test_saturating_fit_exact_recovery(self):
        t = np.arange(0, 31)
        rate, f0, dim = 0.1, 1.0, 256
        f = np.exp(-rate * t) * (f0 - 1 / dim) + 1 / dim
        fit = saturating_decay_fit(t, f, f0, dim, f_co=0.1)
        assert abs(fit.rate - rate) < 1e-10
        assert fit.rss < 1e-20

    def test_flat_curve_gives_zero_rates(self):
        t = np.arange(0, 10)
        f = np.full(10, 0.8)
        assert linear_decay_fit(t, f, 0.8, f_lim=0.5).decay_rate == pytest.approx(0.0)
        assert saturating_decay_fit(t, f, 0.8, 256, f_co=0.1).rate == pytest.approx(0.0)

    def test_linear_fit_recovers_slope(self):
        t = np.arange(0, 6)
        gamma = 0.01
        f = 1.0 - gamma * t
        fit = linear_decay_fit(t, f, 1.0, f_lim=0.9)
        assert fit.decay_rate == pytest.approx(gamma, rel=1e-12)

    def test_linear_fit_needs_two_points(self):
        t = np.arange(0, 5)
        f = np.array([1.0, 0.5, 0.4, 0.3, 0.2])
        with pytest.raises(ValidationError):
            linear_decay_fit(t, f, 1.0, f_lim=0.9)

    def test_saturating_fit_rejects_points_at_floor(self):
        t = np.arange(0, 4)
        f = np.array([1.0, 0.5, 0.2, 1.0 / 256])
        with pytest.raises(ValidationError):
            saturating_decay_fit(t, f, 1.0, 256, f_co=1e-4)

    def test_quadratic_fit_exact_model(self):
        chis = np.array([0.01, 0.02, 0.05, 0.1])
        fit = quadratic_strength_fit(chis, 16.0 * chis**2)
        assert fit.coefficient == pytest.approx(16.0, rel=1e-12)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)

    def test_quadratic_fit_empty_grid_rejected(self):
        with pytest.raises(ValidationError):
            quadratic_strength_fit([], [])
