import itertools
import math

import numpy as np
import pytest

from cirdiff.gram_charlier import (
    ExpansionError,
    MultiIndex,
    Schedule,
    SwapSpec,
    _gc_q,
    bond_moment,
    cumulants_from_moments,
    enumerate_multiindices,
    gc_price,
    hermite,
    riccati_terminal,
    star_coefficients,
    swap_coefficients,
    swap_moments,
)
from cirdiff.model import FactorParams, bond_AB
from cirdiff.products import par_rate, swap_value


class TestHermite:
    def test_low_orders(self):
        assert hermite(0, 3.7) == 1.0
        assert hermite(1, 3.7) == 3.7
        assert hermite(3, 2.0) == 2.0  # x^3 - 3x at 2
        xs = np.linspace(-3, 3, 7)
        assert np.allclose(hermite(4, xs), xs**4 - 6 * xs**2 + 3, atol=1e-12)
        assert np.allclose(hermite(7, xs), xs**7 - 21 * xs**5 + 105 * xs**3 - 105 * xs,
                           atol=1e-9)

    def test_orthogonality_by_quadrature(self):
        nodes, weights = np.polynomial.hermite_e.hermegauss(64)
        w = weights / math.sqrt(2 * math.pi)
        assert float(np.sum(w * hermite(3, nodes) * hermite(5, nodes))) == pytest.approx(
            0.0, abs=1e-8
        )
        assert float(np.sum(w * hermite(4, nodes) ** 2)) == pytest.approx(24.0, abs=1e-8)

    def test_negative_order_rejected(self):
        with pytest.raises(ValueError):
            hermite(-1, 0.0)


def moments_from_cumulants(c):
    """Independent inversion: mu_n = sum_k C(n-1, k-1) c_k mu_{n-k}."""
    L = len(c)
    mu = [1.0]  # mu_0
    for n in range(1, L + 1):
        val = 0.0
        for k in range(1, n + 1):
            val += math.comb(n - 1, k - 1) * c[k - 1] * mu[n - k]
        mu.append(val)
    return np.array(mu[1:])


class TestCumulants:
    def test_gaussian(self):
        c = cumulants_from_moments([0.0, 1.0, 0.0, 3.0])
        assert np.allclose(c, [0.0, 1.0, 0.0, 0.0], atol=1e-14)

    def test_point_mass(self):
        mu = 0.37
        moments = [mu**k for k in range(1, 8)]
        c = cumulants_from_moments(moments)
        assert c[0] == pytest.approx(mu, abs=1e-15)
        assert np.allclose(c[1:], 0.0, atol=1e-12)

    def test_round_trip_random(self):
        # moderate first cumulant: mu_7 ~ c1^7 amplifies roundoff in the inversion
        rng = np.random.default_rng(23)
        for _ in range(200):
            c = np.zeros(7)
            c[0] = rng.normal(0.0, 0.3)
            c[1] = rng.uniform(0.1, 2.0)
            c[2:] = rng.normal(0.0, 0.3, size=5)
            mu = moments_from_cumulants(c)
            back = cumulants_from_moments(mu)
            assert np.allclose(back, c, rtol=1e-9, atol=1e-9)

    def test_too_many_orders(self):
        with pytest.raises(ValueError):
            cumulants_from_moments(np.ones(8))


class TestMultiIndices:
    def test_m1_unit_vectors(self):
        out = enumerate_multiindices(1, 4)
        assert len(out) == 5
        assert {mi.counts for mi in out} == {
            (1, 0, 0, 0, 0), (0, 1, 0, 0, 0), (0, 0, 1, 0, 0),
            (0, 0, 0, 1, 0), (0, 0, 0, 0, 1),
        }
        assert all(mi.multiplicity == 1 for mi in out)

    def test_m2_n2_pair_weights(self):
        out = enumerate_multiindices(2, 2)
        assert len(out) == 6
        lookup = {mi.counts: mi.multiplicity for mi in out}
        assert lookup[(1, 1, 0)] == 2  # the cross term appears twice
        assert lookup[(2, 0, 0)] == 1

    @pytest.mark.parametrize("m,n", [(2, 3), (3, 4), (4, 5), (7, 10)])
    def test_count(self, m, n):
        assert len(enumerate_multiindices(m, n)) == math.comb(n + m, m)

    @pytest.mark.parametrize("m,n", [(2, 2), (3, 4), (4, 3)])
    def test_multinomial_identity(self, m, n):
        rng = np.random.default_rng(m * 10 + n)
        a = rng.normal(size=n + 1)
        p = rng.normal(size=n + 1)
        brute = sum(
            math.prod(a[i] * p[i] for i in idx)
            for idx in itertools.product(range(n + 1), repeat=m)
        )
        grouped = sum(
            mi.multiplicity * math.prod(
                (a[j] * p[j]) ** k for j, k in enumerate(mi.counts))
            for mi in enumerate_multiindices(m, n)
        )
        assert grouped == pytest.approx(brute, abs=1e-12 * max(1.0, abs(brute)))
        assert grouped == pytest.approx(float(np.dot(a, p)) ** m, rel=1e-10)


FX = FactorParams(k=0.12, theta=0.03, sigma=0.05, z0=0.01, sign=1)
FY = FactorParams(k=0.10, theta=0.02, sigma=0.04, z0=0.015, sign=-1)


class TestRiccatiTerminal:
    def test_terminal_identity(self):
        assert riccati_terminal(FX, 0.8, 0.5, 3.0, 3.0) == (0.8, 0.5)

    def test_unit_terminal_is_bond(self):
        for f in (FX, FY):
            M, N = riccati_terminal(f, 1.0, 0.0, 1.0, 6.0)
            A, B = bond_AB(f, 1.0, 6.0)
            assert M == pytest.approx(A, rel=1e-14)
            assert N == pytest.approx(B, rel=1e-14)

    @pytest.mark.parametrize("factor", [FX, FY])
    def test_ode_residuals_random_terminals(self, factor):
        rng = np.random.default_rng(41)
        h = 1e-5
        k, th, s2 = factor.k, factor.theta, factor.sigma**2
        for _ in range(50):
            a = rng.uniform(0.2, 2.5)
            b = rng.uniform(0.0, 3.0)
            t = rng.uniform(0.5, 4.0)
            T0 = t + rng.uniform(0.5, 10.0)
            vals = [riccati_terminal(factor, a, b, tt, T0) for tt in (t - h, t, t + h)]
            (M0, N0), (M1, N1), (M2, N2) = vals
            dN = (N2 - N0) / (2 * h)
            dlogM = (math.log(M2) - math.log(M0)) / (2 * h)
            if factor.sign == 1:
                res_b = -1.0 + k * N1 - dN + 0.5 * s2 * N1**2
                res_a = -N1 * k * th + dlogM
            else:
                res_b = 1.0 - k * N1 + dN + 0.5 * s2 * N1**2
                res_a = N1 * k * th + dlogM
            assert abs(res_b) < 1e-6
            assert abs(res_a) < 1e-6

    def test_invalid_terminals(self):
        with pytest.raises(ValueError):
            riccati_terminal(FX, 0.0, 0.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            riccati_terminal(FX, 1.0, -0.1, 0.0, 1.0)


@pytest.fixture(scope="module")
def sched5():
    return Schedule.annual(5.0, 5)


class TestBondMoments:
    def test_zero_index_is_one(self, model_t5, sched5):
        mi = MultiIndex(counts=(0,) * 6, multiplicity=1)
        assert bond_moment(model_t5, mi, 0.01, 0.008, 1.0, sched5) == pytest.approx(
            1.0, abs=1e-14
        )

    def test_unit_index_martingale(self, model_t5, sched5):
        """First-order bond moments are forward bond ratios, every payment date."""
        p = model_t5.params
        from cirdiff.model import zcb_cirminus

        x, y = 0.012, 0.007
        t = 1.3
        for j, tj in enumerate(sched5.times):
            counts = [0] * 6
            counts[j] = 1
            mi = MultiIndex(counts=tuple(counts), multiplicity=1)
            got = bond_moment(model_t5, mi, x, y, t, sched5)
            want = zcb_cirminus(p, x, y, t, tj) / zcb_cirminus(p, x, y, t, sched5.t0)
            assert got == pytest.approx(want, rel=1e-10)

    def test_order2_against_forward_measure_mc(self, model_t5, sched5):
        """E^{T0}[P(T0,T1) P(T0,T3)] via weighted risk-neutral simulation."""
        from cirdiff.model import zcb_cirminus
        from cirdiff.simulation import SimulationConfig, simulate

        p = model_t5.params
        cfg = SimulationConfig(n_paths=100_000, horizon=5.0, mesh=1 / 128, seed=2024)
        paths = simulate(model_t5, cfg)
        j = paths.index_of(5.0)
        x5, y5 = paths.state(5.0)
        prod = np.asarray(zcb_cirminus(p, x5, y5, 5.0, 6.0)) * np.asarray(
            zcb_cirminus(p, x5, y5, 5.0, 8.0)
        )
        weights = paths.discount_cir[:, j] / zcb_cirminus(p, p.x0, p.y0, 0.0, 5.0)
        samples = weights * prod
        est = float(np.mean(samples))
        se = float(np.std(samples, ddof=1) / math.sqrt(cfg.n_paths))
        counts = (0, 1, 0, 1, 0, 0)
        got = bond_moment(model_t5, MultiIndex(counts=counts, multiplicity=2),
                          p.x0, p.y0, 0.0, sched5)
        assert abs(got - est) < 3 * se


class TestSwapMoments:
    def test_first_moment_is_forward_swap_value(self, model_t5, sched5):
        rng = np.random.default_rng(31)
        from cirdiff.model import zcb_shifted

        for _ in range(25):
            x, y = rng.uniform(0.0, 0.08, size=2)
            t = rng.uniform(0.0, 4.5)
            strike = rng.uniform(-0.01, 0.03)
            spec = SwapSpec(schedule=sched5, fixed_rate=strike, zeta=1)
            m1 = swap_moments(model_t5, spec, t, 1, x=x, y=y)[0]
            lhs = m1 * zcb_shifted(model_t5, x, y, t, sched5.t0)
            rhs = swap_value(model_t5, spec, x, y, t)
            assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_par_strike_zeroes_first_moment(self, model_t5, sched5):
        p = model_t5.params
        par = par_rate(model_t5, 5.0, 10.0, p.x0, p.y0, 0.0)
        spec = SwapSpec(schedule=sched5, fixed_rate=float(par), zeta=1)
        m1 = swap_moments(model_t5, spec, 0.0, 1)[0]
        assert m1 == pytest.approx(0.0, abs=1e-14)

    def test_second_moment_jensen(self, model_t5, sched5):
        spec = SwapSpec(schedule=sched5, fixed_rate=0.004, zeta=1)
        m = swap_moments(model_t5, spec, 0.0, 2)
        assert m[1] >= m[0] ** 2

    def test_enumeration_order_invariance(self, model_t5, sched5):
        """Grouped sum equals the brute-force permutation sum (m <= 3)."""
        from cirdiff.model import zcb_cirminus

        p = model_t5.params
        atil = star_coefficients(model_t5, SwapSpec(schedule=sched5, fixed_rate=0.004, zeta=1))
        t = 0.5
        pct = zcb_cirminus(p, p.x0, p.y0, t, sched5.t0)
        pref = zcb_cirminus(p, p.x0, p.y0, 0.0, 5.0) / model_t5.curve.discount(5.0)
        for m_order in (2, 3):
            brute = 0.0
            for idx in itertools.product(range(6), repeat=m_order):
                counts = [0] * 6
                for i in idx:
                    counts[i] += 1
                bm = bond_moment(model_t5, MultiIndex(counts=tuple(counts), multiplicity=1),
                                 p.x0, p.y0, t, sched5)
                brute += math.prod(atil[i] for i in idx) * bm
            brute *= pref**m_order
            spec = SwapSpec(schedule=sched5, fixed_rate=0.004, zeta=1)
            grouped = swap_moments(model_t5, spec, t, m_order)[m_order - 1]
            assert grouped == pytest.approx(brute, rel=1e-11)


class TestGcPrice:
    def test_q_coefficients(self):
        C = np.array([math.nan, 0.1, 0.5, 0.01, 0.002, 0.0005, 3e-5, 1e-5])
        assert _gc_q(0, C) == 1.0
        assert _gc_q(1, C) == 0.0
        assert _gc_q(2, C) == 0.0
        assert _gc_q(3, C) == pytest.approx(C[3] / (6 * C[2] ** 1.5), rel=1e-13)
        assert _gc_q(4, C) == pytest.approx(C[4] / (24 * C[2] ** 2), rel=1e-13)
        assert _gc_q(5, C) == pytest.approx(C[5] / (120 * C[2] ** 2.5), rel=1e-13)
        assert _gc_q(6, C) == pytest.approx(
            (C[6] + 10 * C[3] ** 2) / (720 * C[2] ** 3), rel=1e-13
        )
        assert _gc_q(7, C) == pytest.approx(
            (C[7] + 35 * C[3] * C[4]) / (5040 * C[2] ** 3.5), rel=1e-13
        )

    def test_gaussian_cumulants_collapse_orders(self):
        C = np.array([math.nan, 0.02, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0])
        for n in range(3, 8):
            assert _gc_q(n, C) == 0.0

    def test_all_orders_returned(self, model_t5, sched5):
        spec = SwapSpec(schedule=sched5, fixed_rate=0.01, zeta=1)
        out = gc_price(model_t5, spec, orders=(2, 3, 4, 5, 6, 7))
        assert sorted(out) == [2, 3, 4, 5, 6, 7]
        assert all(v > 0 for v in out.values())

    def test_deep_itm_receiver_is_forward_swap_value(self, model_t5, sched5, curve):
        spec = SwapSpec(schedule=sched5, fixed_rate=0.20, zeta=-1)
        prices = gc_price(model_t5, spec, orders=(2, 7))
        # the expansion collapses to C1 = P(0,T0) M^1, the forward swap value
        c1 = curve.discount(5.0) * swap_moments(model_t5, spec, 0.0, 1)[0]
        assert prices[2] == pytest.approx(c1, rel=1e-12)
        assert prices[7] == pytest.approx(c1, rel=1e-12)
        fwd = swap_value(model_t5, spec, model_t5.params.x0, model_t5.params.y0, 0.0)
        assert prices[7] == pytest.approx(fwd, rel=1e-8)

    def test_base_term_parity(self, model_t5, sched5, curve):
        strike = 0.006
        payer = gc_price(model_t5, SwapSpec(schedule=sched5, fixed_rate=strike, zeta=1),
                         orders=(2,))[2]
        receiver = gc_price(model_t5, SwapSpec(schedule=sched5, fixed_rate=strike, zeta=-1),
                            orders=(2,))[2]
        m1 = swap_moments(model_t5, SwapSpec(schedule=sched5, fixed_rate=strike, zeta=1),
                          0.0, 1)[0]
        assert payer - receiver == pytest.approx(curve.discount(5.0) * m1, abs=1e-10)

    def test_bad_orders_rejected(self, model_t5, sched5):
        spec = SwapSpec(schedule=sched5, fixed_rate=0.01, zeta=1)
        with pytest.raises(ValueError):
            gc_price(model_t5, spec, orders=(1,))
        with pytest.raises(ValueError):
            gc_price(model_t5, spec, orders=(8,))
        with pytest.raises(ValueError):
            gc_price(model_t5, spec, orders=())
