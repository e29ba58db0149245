"""Fractional Brownian sampling, the lag correlation and its power sums."""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from roughlab.errors import DivergentSeries
from roughlab.gaussian_paths import (
    CovarianceSpec,
    HurstParam,
    Partition,
    fbm_rho,
    iter_fbm,
    parse_hurst,
    path_generator,
    rho_power_sum,
    sample_fbm,
    subsample,
)

# Sum over all integer lags of rho(k)^q, frozen from a direct long-double sum
# over |k| <= 2e6 (q >= 3) or a direct sum plus integral tail (q = 2).
POWER_SUMS = [
    (2, 0.3, 1.125195505361313),
    (2, 0.25, 1.1787437241567225),
    (3, 0.3, 0.97131078401517333),
    (2, 0.4, 1.0388030201643186),
    (4, 0.2, 1.0268119022983022),
]


class TestParsing:
    @pytest.mark.parametrize("text,expected", [
        ("1/4", Fraction(1, 4)),
        ("0.3", Fraction(3, 10)),
        (" 3/10 ", Fraction(3, 10)),
    ])
    def test_strings_are_exact(self, text, expected):
        assert parse_hurst(text) == expected

    @pytest.mark.parametrize("bad", ["0", "1", "-0.2", "1.5", "abc", "1/0"])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            parse_hurst(bad)

    def test_float_exact_view(self):
        assert HurstParam(0.3).exact == Fraction(3, 10)
        assert HurstParam("1/6").exact == Fraction(1, 6)
        assert float(HurstParam("1/4")) == 0.25

    def test_partition(self):
        np.testing.assert_allclose(Partition(4).points, [0, 0.25, 0.5, 0.75, 1])
        with pytest.raises(ValueError):
            Partition(0)


class TestRho:
    def test_closed_forms(self):
        assert fbm_rho(0, 0.3) == pytest.approx(1.0, abs=1e-15)
        assert fbm_rho(1, 0.25) == pytest.approx(math.sqrt(2) / 2 - 1, rel=1e-14)
        assert fbm_rho(1, 0.25) == pytest.approx(-0.2928932188134524, rel=1e-14)
        np.testing.assert_array_equal(fbm_rho(np.arange(5), 0.5), [1, 0, 0, 0, 0])

    @pytest.mark.parametrize("nu", [0.1, 0.25, 0.3, 0.7, 0.9])
    def test_matches_naive_at_moderate_lags(self, nu):
        k = np.arange(0, 50, dtype=float)
        h = 2 * nu
        naive = 0.5 * (np.abs(k + 1) ** h - 2 * k**h + np.abs(k - 1) ** h)
        np.testing.assert_allclose(fbm_rho(k, nu), naive, rtol=1e-10, atol=1e-14)

    def test_large_lag_asymptotics(self):
        # rho(k) ~ nu (2nu - 1) k^{2nu - 2}
        nu, k = 0.3, 1e6
        assert fbm_rho(k, nu) == pytest.approx(nu * (2 * nu - 1) * k ** (2 * nu - 2), rel=1e-9)

    def test_symmetric(self):
        k = np.arange(-20, 21)
        np.testing.assert_array_equal(fbm_rho(k, 0.37), fbm_rho(-k, 0.37))

    def test_covariance_spec_polarisation(self):
        spec = CovarianceSpec(0.3)
        assert spec.increment_cov(0, 1, 0, 1) == pytest.approx(1.0)
        assert spec.increment_cov(0, 1, 1, 2) == pytest.approx(fbm_rho(1, 0.3))


class TestPowerSums:
    @pytest.mark.parametrize("q,nu,expected", POWER_SUMS)
    def test_frozen_values(self, q, nu, expected):
        assert rho_power_sum(q, nu) == pytest.approx(expected, rel=1e-10)

    def test_brownian(self):
        assert rho_power_sum(2, 0.5) == 1.0

    def test_linear_sum_telescopes(self):
        assert rho_power_sum(1, 0.3) == 0.0

    @pytest.mark.parametrize("q,nu", [(2, 0.75), (2, 0.8), (1, 0.6), (3, 5 / 6)])
    def test_divergent(self, q, nu):
        with pytest.raises(DivergentSeries):
            rho_power_sum(q, nu)

    def test_tolerance_validation(self):
        with pytest.raises(ValueError):
            rho_power_sum(2, 0.3, tol=0)
        with pytest.raises(ValueError):
            rho_power_sum(0, 0.3)


class TestSampler:
    def test_shape_and_origin(self):
        b = sample_fbm(64, 0.3, M=5, d=2, seed=1)
        assert b.values.shape == (5, 2, 65)
        assert np.all(b.values[..., 0] == 0)
        assert b.M == 5 and b.d == 2
        assert b.increments.shape == (5, 2, 64)

    def test_reproducible(self):
        a = sample_fbm(32, 0.3, 4, seed=7).values
        b = sample_fbm(32, 0.3, 4, seed=7).values
        c = sample_fbm(32, 0.3, 4, seed=8).values
        np.testing.assert_array_equal(a, b)
        assert not np.allclose(a, c)

    def test_chunks_match_serial(self):
        full = sample_fbm(100, 0.3, 23, d=2, seed=3).values
        parts = np.concatenate([b.values for b in iter_fbm(100, 0.3, 23, d=2, seed=3, chunk=5)])
        np.testing.assert_array_equal(full, parts)

    def test_start_offset(self):
        full = sample_fbm(16, 0.4, 10, seed=2).values
        tail = sample_fbm(16, 0.4, 4, seed=2, start=6).values
        np.testing.assert_array_equal(full[6:], tail)

    def test_streams_are_independent_of_order(self):
        a = path_generator(5, 3, 0).standard_normal(4)
        path_generator(5, 1, 0).standard_normal(100)
        b = path_generator(5, 3, 0).standard_normal(4)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("nu", [0.1, 0.25, 0.3, 0.5, 0.7])
    def test_increment_covariance(self, nu):
        n, M = 32, 20_000
        inc = sample_fbm(n, nu, M, seed=11).increments[:, 0, :] * n**nu
        emp = inc.T @ inc / M
        lag = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
        exact = fbm_rho(lag, nu)
        err = np.max(np.abs(emp - exact))
        print(f"  nu={nu}: max |cov - rho| = {err:.4f}")
        # 5 standard errors of a product moment with unit variances
        assert err < 5 * math.sqrt(2 / M) * 2.5

    @pytest.mark.parametrize("nu", [0.2, 0.3, 0.4])
    def test_terminal_variance(self, nu):
        b = sample_fbm(256, nu, 20_000, seed=5)
        var = b.values[:, 0, -1].var()
        assert var == pytest.approx(1.0, abs=5 * math.sqrt(2 / 20_000))

    def test_subsample(self):
        b = sample_fbm(64, 0.3, 3, seed=1)
        c = subsample(b.values, 64, 16)
        np.testing.assert_array_equal(c, b.values[..., ::4])
        with pytest.raises(ValueError):
            subsample(b.values, 64, 10)

    def test_exports(self, tmp_path):
        b = sample_fbm(8, 0.3, 2, seed=1)
        b.to_csv(tmp_path / "p.csv")
        back = np.loadtxt(tmp_path / "p.csv", delimiter=",")
        np.testing.assert_array_equal(back.T, b.values[:, 0, :])
        b.to_npy(tmp_path / "p.npy")
        np.testing.assert_array_equal(np.load(tmp_path / "p.npy"), b.values)

    def test_invalid(self):
        with pytest.raises(ValueError):
            sample_fbm(0, 0.3, 1)


class TestProperties:
    @given(st.floats(0.05, 0.95), st.integers(2, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_rho_bounded_and_signed(self, nu, k):
        r = fbm_rho(k, nu)
        assert abs(r) <= 1
        if nu < 0.5:
            assert r <= 0
        elif nu > 0.5:
            assert r >= 0

    @given(st.floats(0.05, 0.95), st.integers(8, 200))
    @settings(max_examples=30, deadline=None)
    def test_lag_sum_telescopes(self, nu, K):
        # sum_{|k| <= K} rho(k) = (K+1)^{2nu} - K^{2nu}
        k = np.arange(-K, K + 1)
        lhs = float(np.sum(fbm_rho(k, nu)))
        rhs = (K + 1) ** (2 * nu) - K ** (2 * nu)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)

    @given(st.integers(0, 2**32), st.integers(1, 12), st.integers(1, 6))
    @settings(max_examples=20, deadline=None)
    def test_any_split_matches(self, seed, M, chunk):
        full = sample_fbm(16, 0.3, M, seed=seed).values
        parts = np.concatenate([b.values for b in iter_fbm(16, 0.3, M, seed=seed, chunk=chunk)])
        np.testing.assert_array_equal(full, parts)
