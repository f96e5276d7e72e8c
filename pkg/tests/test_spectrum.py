from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from _oracles import cubic_eigenvalues, random_symmetric
from svspectra.cov_spectrum import (
    correlation_matrix,
    diag_approx_error,
    eigen,
    frobenius_norm,
    jacobi_eigh,
    localization,
    masked,
    sample_cov,
    spectral_norm,
    spectral_stats,
)
from svspectra.errors import ContractError, DegenerateRowError
from svspectra.panel import Panel
from svspectra.volatility_field import gamma_p, preset_field


def test_two_by_two_closed_form():
    a, b, c = 2.0, 1.0, -3.0
    rep = eigen(np.array([[a, b], [b, c]]))
    mid, rad = (a + c) / 2, math.hypot((a - c) / 2, b)
    assert rep.eigenvalues[0] == pytest.approx(mid + rad, abs=1e-10)
    assert rep.eigenvalues[1] == pytest.approx(mid - rad, abs=1e-10)


def test_diagonal_is_exact():
    d = np.diag([3.0, -1.0, 7.0, 0.5])
    rep = eigen(d)
    assert rep.eigenvalues.tolist() == [7.0, 3.0, 0.5, -1.0]
    assert np.array_equal(np.abs(rep.vectors), np.eye(4)[:, [2, 0, 3, 1]])


def test_zero_matrix():
    vals, vecs = jacobi_eigh(np.zeros((3, 3)))
    assert vals.tolist() == [0, 0, 0]
    assert eigen(np.zeros((3, 3))).localization[0].degenerate


def test_random_18_residuals_and_orthonormality():
    rng = np.random.default_rng(1)
    for _ in range(5):
        s = random_symmetric(rng, 18, heavy=True)
        rep = eigen(s)
        fro = frobenius_norm(s)
        for r in range(18):
            v = rep.vectors[:, r]
            assert np.linalg.norm(s @ v - rep.eigenvalues[r] * v) < 1e-8 * fro
        assert np.abs(rep.vectors.T @ rep.vectors - np.eye(18)).max() < 1e-8
        assert np.all(np.diff(rep.eigenvalues) <= 0)


def test_cubic_oracle():
    rng = np.random.default_rng(2)
    for _ in range(50):
        s = random_symmetric(rng, 3)
        assert np.allclose(eigen(s).eigenvalues, cubic_eigenvalues(s), atol=1e-9, rtol=0)


def test_matches_lapack():
    rng = np.random.default_rng(3)
    s = random_symmetric(rng, 12)
    assert np.allclose(eigen(s).eigenvalues, np.linalg.eigvalsh(s)[::-1], atol=1e-10)


def test_sign_convention_and_determinism():
    rng = np.random.default_rng(4)
    s = random_symmetric(rng, 6)
    r1, r2 = eigen(s), eigen(s.copy())
    assert np.array_equal(r1.vectors, r2.vectors)
    for r in range(6):
        v = r1.vectors[:, r]
        assert v[np.argmax(np.abs(v))] > 0


def test_degenerate_flag():
    rep = eigen(np.diag([2.0, 2.0, 1.0]))
    assert [l.degenerate for l in rep.localization] == [True, True, False]


def test_rejects_non_symmetric_and_non_finite():
    with pytest.raises(ContractError):
        eigen(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ContractError):
        eigen(np.array([[np.nan]]))
    with pytest.raises(ContractError):
        eigen(np.ones((2, 3)))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (5, 5), elements=st.floats(-1e3, 1e3)))
def test_weyl_property(a):
    s = (a + a.T) / 2
    lam = eigen(s).eigenvalues
    lam_d = np.sort(np.diag(s))[::-1]
    bound = spectral_norm(s - np.diag(np.diag(s)))
    assert np.max(np.abs(lam - lam_d)) <= bound + 1e-10 * max(1.0, frobenius_norm(s))


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (4, 4), elements=st.floats(-10, 10)))
def test_trace_preserved(a):
    s = (a + a.T) / 2
    assert math.fsum(eigen(s).eigenvalues) == pytest.approx(np.trace(s), abs=1e-9)


def test_sample_cov_matches_outer_product():
    x = np.random.default_rng(5).normal(size=(4, 30))
    assert np.allclose(sample_cov(x), x @ x.T, rtol=1e-13)
    xc = x - x.mean(axis=1, keepdims=True)
    assert np.allclose(sample_cov(Panel(x), center=True), xc @ xc.T, rtol=1e-12, atol=1e-12)


def test_sample_cov_is_exactly_symmetric():
    x = np.random.default_rng(6).standard_t(2, size=(6, 50))
    s = sample_cov(x)
    assert np.array_equal(s, s.T)


def test_localization_basis_vector():
    loc = localization(np.array([0.0, -1.0, 0.0]))
    assert loc.max_abs == 1.0 and loc.nearest_basis_distance == 0.0 and loc.participation_ratio == 1.0
    flat = localization(np.full(4, 0.5))
    assert flat.participation_ratio == pytest.approx(4.0)


def test_masks_and_diag_error():
    s = np.array([[4.0, 1.0, 0.0], [1.0, 3.0, 2.0], [0.0, 2.0, 1.0]])
    assert np.array_equal(masked(s, "diagonal"), np.diag([4.0, 3.0, 1.0]))
    assert np.array_equal(masked(s, "all"), s)
    off = s - np.diag(np.diag(s))
    assert diag_approx_error(s, 2.0) == pytest.approx(np.abs(np.linalg.eigvalsh(off)).max() / 4)
    g = gamma_p(preset_field("ma18"), 3)
    assert diag_approx_error(s, 1.0, g) == 0.0
    with pytest.raises(ContractError):
        masked(s, gamma_p(preset_field("ma18"), 4))


def test_spectral_stats_undefined_ratios():
    rep = eigen(np.zeros((2, 2)))
    st_ = spectral_stats(rep, np.zeros((2, 2)))
    assert st_.trace_ratios is None
    assert set(st_.undefined) == {"trace_ratios", "self_normalized", "centered_log_det"}


def test_spectral_stats_values():
    s = np.diag([3.0, 1.0])
    st_ = spectral_stats(eigen(s), s, c_n=0.5, a_n=1.0)
    assert st_.trace_ratios.tolist() == [0.75, 0.25]
    assert st_.centered_trace == pytest.approx(3.0)
    assert st_.centered_log_det == pytest.approx(math.log(2.5) + math.log(0.5))
    assert st_.self_normalized.tolist() == pytest.approx([2.5 / 3, 0.5 / 3])


def test_correlation_matrix():
    x = np.random.default_rng(7).normal(size=(3, 200))
    r, rep = correlation_matrix(x)
    assert np.allclose(r, np.corrcoef(x), atol=1e-12)
    assert np.diag(r).tolist() == [1.0, 1.0, 1.0]
    with pytest.raises(DegenerateRowError) as err:
        correlation_matrix(np.vstack([x[:2], np.ones(200)]))
    assert err.value.row == 3
