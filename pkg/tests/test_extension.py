from math import factorial

import numpy as np
import pytest
import sympy
from scipy.special import gamma, kv

from fracext import (
    ConvergenceError,
    FracOrder,
    Generator,
    QuadratureSpec,
    build_profile,
    exp_tail,
    explicit_poly_part,
    extend_explicit,
    extend_subordination,
    normalization_check,
    pde_residual,
    radial_power,
    y_derivative,
    y_derivatives_upto,
)
from fracext.extension import KernelDerivative, extension_operator_power

from conftest import relerr


def bessel_k_profile(s, lam, y):
    """Scalar closed form of the extension: ``(2/Gamma(s)) (y sqrt(lam)/2)^s K_s(y sqrt(lam))``."""
    z = y * np.sqrt(lam)
    return 2.0 / gamma(s) * (z / 2.0) ** s * kv(s, z)


class TestExpTail:
    def test_base_cases(self):
        r = np.array([0.0, 0.3, 2.0])
        assert np.allclose(exp_tail(0, r), np.exp(-r) - 1.0, atol=1e-15)
        assert exp_tail(0, 0.0) == 0.0
        assert np.allclose(exp_tail(-1, r), np.exp(-r))

    def test_leading_order_at_zero(self):
        import mpmath

        mpmath.mp.dps = 50
        r = 1e-4
        for n in (0, 1, 2, 3):
            # high-precision Taylor-remainder oracle
            exact = mpmath.exp(-r) - sum(mpmath.mpf(-r) ** k / mpmath.factorial(k) for k in range(n + 1))
            ratio = exp_tail(n, r) / r ** (n + 1)
            assert abs(ratio - float(exact) / r ** (n + 1)) <= 1e-6 * abs(ratio)
            # and the ratio approaches the limit at rate O(r)
            lead = (-1.0) ** (n + 1) / factorial(n + 1)
            assert abs(ratio - lead) <= r

    def test_derivative_recursion(self):
        h = 1e-6
        for n in (1, 2, 3):
            for r in (0.05, 0.4, 1.0, 4.0):
                diff = (exp_tail(n, r + h) - exp_tail(n, r - h)) / (2 * h)
                assert abs(diff + exp_tail(n - 1, r)) <= 1e-8

    def test_no_cancellation_in_tail_region(self):
        # direct difference at r = 1e-5, n = 3 would lose ~20 digits
        r = 1e-5
        two_terms = (-r) ** 4 / factorial(4) + (-r) ** 5 / factorial(5)
        assert abs(exp_tail(3, r) - two_terms) <= 1e-10 * abs(two_terms)


class TestPolyPart:
    def test_derivative_identity(self, diag_gen):
        order = FracOrder(2.5)
        u = np.array([1.0, -0.5], dtype=complex)
        h = 1e-5
        for start in (0, 1):
            for r in (0.2, 1.0, 3.0):
                diff = (
                    explicit_poly_part(diag_gen, order, u, start, order.n, r + h)
                    - explicit_poly_part(diag_gen, order, u, start, order.n, r - h)
                ) / (2 * h)
                target = -explicit_poly_part(diag_gen, order, u, start + 1, order.n, r)
                assert np.linalg.norm(diff - target) <= 1e-8


class TestSubordination:
    def test_zero_input(self, diag_gen):
        out = extend_subordination(diag_gen, 0.5, np.zeros(2, dtype=complex), 0.7)
        assert np.all(out == 0)

    def test_scalar_closed_form(self, scalar_gen):
        got = extend_subordination(scalar_gen, 0.5, np.ones(1, dtype=complex), 0.7)
        assert abs(got[0] - np.exp(-0.7)) <= 1e-8

    def test_componentwise_scalar_oracle(self, diag_gen):
        # per-eigenvalue Bessel-K closed form, assembled componentwise
        u = np.array([1.0, 1.0], dtype=complex)
        got = extend_subordination(diag_gen, 2.7, u, 1.0)
        expected = np.array([bessel_k_profile(2.7, 1.0, 1.0), bessel_k_profile(2.7, 4.0, 1.0)])
        assert relerr(got, expected) <= 1e-10

    def test_boundary_value(self, diag_gen):
        u = np.array([0.3, -1.0], dtype=complex)
        assert np.array_equal(extend_subordination(diag_gen, 0.5, u, 0.0), u)
        with pytest.raises(ValueError):
            extend_subordination(diag_gen, 0.5, u, -1.0)

    def test_bounded_by_semigroup_constant(self, rand8, rand8_u):
        scale = np.linalg.norm(rand8_u)
        for y in (0.1, 0.5, 1.0, 3.0, 10.0):
            val = extend_subordination(rand8, 0.7, rand8_u, y)
            assert np.linalg.norm(val) <= rand8.bound_M * scale * (1 + 1e-12)

    def test_continuity_at_zero_monotone(self, diag_gen):
        u = np.array([1.0, 0.5], dtype=complex)
        gaps = [
            np.linalg.norm(extend_subordination(diag_gen, 0.7, u, 2.0**-j) - u)
            for j in range(11)
        ]
        assert all(gaps[i + 1] < gaps[i] for i in range(10))

    def test_commutation_with_negative_power(self, rand8, rand8_u):
        s, y = 0.7, 0.8
        left = extend_subordination(rand8, s, rand8.frac_power(-s, rand8_u), y)
        right = rand8.frac_power(-s, extend_subordination(rand8, s, rand8_u, y))
        assert relerr(left, right) <= 1e-9

    def test_laguerre_scheme_converges_loosely(self, scalar_gen):
        # the Laguerre path cannot resolve the essential singularity tightly:
        # usable at percent-level tolerance, convergence failure at 1e-12
        loose = QuadratureSpec("gauss_laguerre_generalized", 128, 0.0, 5e-2)
        got = extend_subordination(scalar_gen, 0.5, np.ones(1, dtype=complex), 0.7, loose)
        assert abs(got[0] - np.exp(-0.7)) <= 5e-2
        tight = QuadratureSpec("gauss_laguerre_generalized", 128, 0.0, 1e-12)
        with pytest.raises(ConvergenceError):
            extend_subordination(scalar_gen, 0.5, np.ones(1, dtype=complex), 0.7, tight)


class TestExplicit:
    def test_boundary_value(self, diag_gen):
        u = np.array([2.0, -1.0], dtype=complex)
        assert np.array_equal(extend_explicit(diag_gen, 2.5, u, 0.0), u)

    def test_scalar_closed_form(self, scalar_gen):
        got = extend_explicit(scalar_gen, 0.5, np.ones(1, dtype=complex), 0.7)
        assert abs(got[0] - np.exp(-0.7)) <= 1e-8

    def test_agrees_with_subordination(self):
        gen = Generator(np.diag([-0.5, -1.0, -2.0, -4.0]))
        u = np.array([1.0, -1.0, 0.5, 2.0], dtype=complex)
        for y in (0.1, 1.0, 3.0):
            got = extend_explicit(gen, 2.5, u, y)
            ref = extend_subordination(gen, 2.5, u, y)
            assert relerr(got, ref) <= 1e-8

    def test_t_form_cross_checks_r_form(self, diag_gen):
        u = np.array([1.0, 0.5], dtype=complex)
        for s in (0.5, 2.5):
            for y in (0.3, 1.0):
                r_form = extend_explicit(diag_gen, s, u, y, form="r")
                t_form = extend_explicit(diag_gen, s, u, y, form="t")
                assert relerr(t_form, r_form) <= 1e-8


class TestKernelDerivative:
    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_matches_symbolic_differentiation(self, m):
        s_val = 0.7
        y_sym, t_sym = sympy.symbols("y t", positive=True)
        kernel = y_sym ** (2 * s_val) * sympy.exp(-(y_sym**2) / (4 * t_sym))
        exact = sympy.diff(kernel, y_sym, m)
        kd = KernelDerivative(s_val, m)
        for y0, t0 in ((0.7, 0.4), (1.3, 2.0)):
            ours = sum(
                q * y0 ** (2 * s_val + z) * t0 ** (-b) * np.exp(-y0 * y0 / (4 * t0))
                for (z, b), q in kd.terms.items()
            )
            ref = float(exact.subs({y_sym: y0, t_sym: t0}))
            assert abs(ours - ref) <= 1e-12 * max(1.0, abs(ref))

    def test_term_count_grows_linearly_in_b(self):
        kd = KernelDerivative(0.5, 4)
        assert max(b for (_, b) in kd.terms) == 4


class TestYDerivative:
    def test_order_zero_is_value(self, diag_gen):
        u = np.array([1.0, 1.0], dtype=complex)
        a = y_derivative(diag_gen, 2.5, u, 0, 0.8)
        b = extend_subordination(diag_gen, 2.5, u, 0.8)
        assert relerr(a, b) <= 1e-12

    def test_scalar_first_derivative(self, scalar_gen):
        got = y_derivative(scalar_gen, 0.5, np.ones(1, dtype=complex), 1, 0.7)
        assert abs(got[0] + np.exp(-0.7)) <= 1e-8

    def test_against_central_differences(self, diag_gen):
        u = np.array([1.0, -0.5], dtype=complex)
        s, y, h = 1.5, 1.0, 1e-3
        stencil = [
            (extend_subordination(diag_gen, s, u, y + k * h)) * c
            for k, c in ((-2, 1.0 / 12), (-1, -8.0 / 12), (1, 8.0 / 12), (2, -1.0 / 12))
        ]
        numeric = sum(stencil) / h
        exact = y_derivative(diag_gen, s, u, 1, y)
        assert np.linalg.norm(numeric - exact) <= 1e-6

    def test_cap_enforced(self, diag_gen):
        u = np.ones(2, dtype=complex)
        with pytest.raises(ValueError, match="cap"):
            y_derivative(diag_gen, 0.5, u, 7, 1.0)


class TestRadialPower:
    def test_order_zero(self, diag_gen):
        u = np.array([1.0, 1.0], dtype=complex)
        a = radial_power(diag_gen, 2.5, u, 0, 0.5)
        b = extend_subordination(diag_gen, 2.5, u, 0.5)
        assert relerr(a, b) <= 1e-11

    def test_modes_agree(self, diag_gen):
        u = np.array([1.0, 1.0], dtype=complex)
        for m in (1, 2):
            from_u = radial_power(diag_gen, 2.5, u, m, 0.5, mode="from_u")
            from_f = radial_power(diag_gen, 2.5, u, m, 0.5, mode="from_f")
            assert relerr(from_u, from_f) <= 1e-7

    def test_small_y_limit(self, scalar_gen):
        # limit Gamma(s-m)/Gamma(s) L^m u = -2/3 at s=2.5, m=1, L=-1
        got = radial_power(scalar_gen, 2.5, np.ones(1, dtype=complex), 1, 1e-3)
        assert abs(got[0] + 2.0 / 3.0) <= 1e-3

    def test_range_checked(self, diag_gen):
        u = np.ones(2, dtype=complex)
        with pytest.raises(ValueError, match="radial power"):
            radial_power(diag_gen, 0.5, u, 3, 0.5)


class TestNormalization:
    def test_reference_points(self):
        assert abs(normalization_check(0.5, 1.0) - 1.0) <= 1e-10
        assert abs(normalization_check(2.7, 0.1) - 1.0) <= 1e-10

    def test_grid(self):
        for s in (0.3, 1.5):
            for y in (0.1, 1.0, 10.0):
                assert abs(normalization_check(s, y) - 1.0) <= 1e-10


class TestPdeResidual:
    def test_scalar_half(self, scalar_gen):
        assert pde_residual(scalar_gen, 0.5, np.ones(1, dtype=complex), 0.7) <= 1e-10

    def test_random_second_order(self, rand8, rand8_u):
        for y in (0.1, 1.0, 5.0):
            assert pde_residual(rand8, 0.3, rand8_u, y) <= 1e-8

    def test_higher_order(self, diag_gen):
        u = np.array([1.0, 1.0], dtype=complex)
        assert pde_residual(diag_gen, 1.5, u, 1.0, kind="higher") <= 1e-7

    def test_zero_input(self, diag_gen):
        assert pde_residual(diag_gen, 0.5, np.zeros(2, dtype=complex), 1.0) == 0.0


class TestOperatorPower:
    def test_reduces_to_value_at_m0(self, diag_gen):
        u = np.array([1.0, -1.0], dtype=complex)
        a = extension_operator_power(diag_gen, 2.5, u, 0, 0.7)
        b = extend_subordination(diag_gen, 2.5, u, 0.7)
        assert relerr(a, b) <= 1e-11

    def test_true_coefficient_annihilates(self, rand8, rand8_u):
        # with a = 1-2s the extension ODE makes (L + a/y d/dy + d2/dy2) U vanish
        s, y = 1.5, 0.8
        lhs = extension_operator_power(rand8, s, rand8_u, 1, y, a=1.0 - 2.0 * s)
        assert np.linalg.norm(lhs) / np.linalg.norm(rand8_u) <= 1e-8


class TestProfile:
    def test_build_and_csv(self, diag_gen, tmp_path):
        u = np.array([1.0, 0.5], dtype=complex)
        ygrid = np.array([0.25, 0.5, 1.0])
        profile = build_profile(diag_gen, 1.5, u, ygrid, max_deriv=2)
        assert len(profile.values) == 3
        for j in range(3):
            assert np.array_equal(profile.derivs[j][0], profile.values[j])
        target = tmp_path / "profile.csv"
        profile.to_csv(target)
        lines = target.read_text().splitlines()
        assert lines[0].startswith("# s=1.5, dim=2, scheme=")
        header = lines[1].split(",")
        assert header[:3] == ["y", "re_U1", "im_U1"]
        assert "re_dU1" in header and "re_d2U1" in header
        first = lines[2].split(",")
        assert abs(float(first[0]) - 0.25) < 1e-15
        assert abs(float(first[1]) - profile.values[0][0].real) < 1e-12

    def test_worker_count_invariance(self, diag_gen):
        u = np.array([1.0, 0.5], dtype=complex)
        ygrid = np.array([0.25, 0.5, 1.0, 2.0])
        serial = build_profile(diag_gen, 0.7, u, ygrid, workers=1)
        threaded = build_profile(diag_gen, 0.7, u, ygrid, workers=4)
        for a, b in zip(serial.values, threaded.values):
            assert np.array_equal(a, b)

    def test_grid_validation(self, diag_gen):
        u = np.ones(2, dtype=complex)
        with pytest.raises(ValueError, match="increasing"):
            build_profile(diag_gen, 0.5, u, [1.0, 0.5])
        with pytest.raises(ValueError, match="increasing"):
            build_profile(diag_gen, 0.5, u, [-1.0, 0.5])


def test_derivatives_shared_rule_consistency(rand8, rand8_u):
    # all orders from one call agree with the order-by-order evaluations
    derivs = y_derivatives_upto(rand8, 1.5, rand8_u, 4, 0.9)
    for m in range(5):
        single = y_derivative(rand8, 1.5, rand8_u, m, 0.9)
        assert relerr(derivs[m], single) <= 1e-12


def test_first_power_integration_by_parts_identity(diag_gen):
    """L U(y) equals the kernel-differentiated integral against v(t) = int_0^t e^{rL}u dr.

    The first-power identity behind the domain-mapping property: integrating
    the kernel derivative (with the Bessel coefficient 1-2s) against the
    semigroup antiderivative reproduces -L U(y).
    """
    s, y = 0.7, 0.8
    u = np.array([1.0, -0.5], dtype=complex)
    lam = diag_gen.eigenvalues
    coords = diag_gen.eigvecs_inv @ u
    kd1 = KernelDerivative(s, 1)
    kd2 = KernelDerivative(s, 2)

    def kernel_bessel(t):
        # ((1-2s)/y d/dy + d2/dy2)(y^{2s} e^{-y^2/(4t)}) via the exact term maps
        first = sum(
            q * y ** (2 * s + z) * t ** (-float(b)) for (z, b), q in kd1.terms.items()
        )
        second = sum(
            q * y ** (2 * s + z) * t ** (-float(b)) for (z, b), q in kd2.terms.items()
        )
        return ((1.0 - 2.0 * s) / y * first + second) * np.exp(-y * y / (4.0 * t))

    def integrand_v(x):
        # against the antiderivative v(t) = int_0^t e^{rL}u dr: recovers U(y)
        t = np.exp(x)
        v_coords = (np.exp(np.multiply.outer(t, lam)) - 1.0) / lam * coords
        v_states = v_coords @ diag_gen.eigvecs.T
        weight = kernel_bessel(t) * t ** (-s)  # dt/t^{1+s} on the log axis
        return weight[:, None] * v_states

    def integrand_semigroup(x):
        # against e^{tL}u itself: recovers L U(y)
        t = np.exp(x)
        states = np.exp(np.multiply.outer(t, lam)) * coords @ diag_gen.eigvecs.T
        weight = kernel_bessel(t) * t ** (-s)
        return weight[:, None] * states

    from fracext.quadrature import trapezoid_refine

    c = y * y / 4.0
    lo, hi = np.log(c / 55.0) - 1.0, 60.0 / (1.0 + s)
    profile_val = extend_subordination(diag_gen, s, u, y)
    via_v = -trapezoid_refine(integrand_v, lo, hi, 1e-12) / (4.0**s * gamma(s))
    assert relerr(via_v, profile_val) <= 1e-8
    via_semigroup = -trapezoid_refine(integrand_semigroup, lo, hi, 1e-12) / (
        4.0**s * gamma(s)
    )
    assert relerr(via_semigroup, diag_gen.apply(profile_val)) <= 1e-8


def test_quadrature_results_bitwise_deterministic(rand8, rand8_u):
    from fracext import balakrishnan, trace_neumann

    first = balakrishnan(rand8, 0.3, rand8_u)
    second = balakrishnan(rand8, 0.3, rand8_u)
    assert np.array_equal(first, second)
    a = extend_subordination(rand8, 1.5, rand8_u, 0.7)
    b = extend_subordination(rand8, 1.5, rand8_u, 0.7)
    assert np.array_equal(a, b)


def test_profile_thread_env_cap(diag_gen, monkeypatch):
    u = np.array([1.0, 0.5], dtype=complex)
    ygrid = np.array([0.5, 1.0, 2.0])
    serial = build_profile(diag_gen, 0.7, u, ygrid)
    monkeypatch.setenv("FRACEXT_THREADS", "3")
    capped = build_profile(diag_gen, 0.7, u, ygrid)
    for a, b in zip(serial.values, capped.values):
        assert np.array_equal(a, b)


def test_y_marching_oracle_reproduces_profile(diag_gen):
    """March the second-order ODE in y from exact data and compare profiles.

    A finite-difference-style oracle: the profile must solve
    ``U'' = -L U - ((1-2s)/y) U'`` when advanced from its own initial data.
    """
    from scipy.integrate import solve_ivp

    s = 0.7
    u = np.array([1.0, -0.5], dtype=complex)
    y0, y1 = 0.4, 1.6
    start = y_derivatives_upto(diag_gen, s, u, 1, y0)

    def rhs(y, state):
        val, slope = state[:2], state[2:]
        return np.concatenate(
            [slope, -diag_gen.apply(val) - ((1.0 - 2.0 * s) / y) * slope]
        )

    probe = np.linspace(y0, y1, 7)
    sol = solve_ivp(
        rhs,
        (y0, y1),
        np.concatenate([start[0], start[1]]),
        t_eval=probe,
        rtol=1e-11,
        atol=1e-13,
    )
    assert sol.success
    for i, y in enumerate(probe):
        marched = sol.y[:2, i]
        direct = extend_subordination(diag_gen, s, u, float(y))
        assert relerr(marched, direct) <= 1e-8


def test_radial_power_top_order_modes_agree(diag_gen):
    # m = [s]+1 is the top allowed radial power; the polynomial part is empty there
    u = np.array([1.0, 1.0], dtype=complex)
    from_u = radial_power(diag_gen, 2.5, u, 3, 0.5, mode="from_u")
    from_f = radial_power(diag_gen, 2.5, u, 3, 0.5, mode="from_f")
    assert relerr(from_u, from_f) <= 1e-7
