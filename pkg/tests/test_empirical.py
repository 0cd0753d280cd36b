import numpy as np
import pytest

from lpoc.empirical import (
    AR1Params,
    ErrorPanel,
    SeriesPanel,
    fit_ar1,
    format_panel_csv,
    format_params_csv,
    r_tilde_basic,
    r_tilde_pd,
    read_panel_csv,
    read_params_csv,
)
from lpoc.errors import ConstantSeries, DimensionMismatch, ZeroRow
from lpoc.matrices import validate_correlation


def ar1_series(mu, phi, g0, t):
    g = np.empty(t)
    g[0] = g0
    for k in range(1, t):
        g[k] = mu + phi * (g[k - 1] - mu)
    return g


def test_noiseless_recovery():
    g = ar1_series(2.0, 0.5, 3.7, 12)
    panel = SeriesPanel(labels=("a", "b"), values=np.vstack([g, g + 1.3]))
    params, errors = fit_ar1(panel)
    assert params.mu[0] == pytest.approx(2.0, abs=1e-9)
    assert params.phi[0] == pytest.approx(0.5, abs=1e-9)
    assert np.abs(errors.values).max() < 1e-12


def test_all_zero_series_is_constant():
    panel = SeriesPanel(labels=("z", "ok"), values=np.vstack([np.zeros(6), np.arange(6.0)]))
    with pytest.raises(ConstantSeries) as exc:
        fit_ar1(panel)
    assert exc.value.label == "z"


def test_constant_series_floor_mode():
    panel = SeriesPanel(labels=("z",), values=np.zeros((1, 6)))
    params, errors = fit_ar1(panel, on_constant="floor")
    assert params.sigma[0] == np.finfo(float).eps
    assert np.array_equal(errors.values, np.zeros((1, 5)))


def test_phi_clamped_into_unit_interval():
    rng = np.random.default_rng(0)
    explosive = np.empty(12)
    explosive[0] = 1.0
    for k in range(1, 12):
        explosive[k] = 1.4 * explosive[k - 1] + rng.normal(0, 0.1)
    alternating = np.array([1.0, -0.9, 1.1, -1.0, 0.95, -1.05, 1.0, -0.9]) + rng.normal(
        0, 0.05, 8
    )
    params_hi, _ = fit_ar1(SeriesPanel(labels=("up",), values=explosive[None, :]))
    params_lo, _ = fit_ar1(SeriesPanel(labels=("flip",), values=alternating[None, :4 + 4]))
    assert params_hi.phi[0] == 0.999  # raw slope above 1 projects onto the cap
    assert params_lo.phi[0] == 0.0  # raw negative slope projects onto zero


def test_monte_carlo_consistency():
    # one long simulated series; estimates within 3 standard errors of truth
    mu_t, phi_t, sig_t, t = 1.5, 0.6, 0.8, 500
    rng = np.random.default_rng(11)
    g = np.empty(t)
    g[0] = mu_t + rng.normal(0.0, sig_t / np.sqrt(1 - phi_t**2))
    for k in range(1, t):
        g[k] = mu_t + phi_t * (g[k - 1] - mu_t) + rng.normal(0.0, sig_t)
    panel = SeriesPanel(labels=("g",), values=g[None, :])
    params, _ = fit_ar1(panel)

    x, y = g[:-1], g[1:]
    n = y.size
    xc = x - x.mean()
    s2 = params.sigma[0] ** 2
    se_phi = np.sqrt(s2 / (xc @ xc))
    design = np.array([[n, x.sum()], [x.sum(), (x * x).sum()]])
    cov = s2 * np.linalg.inv(design)
    c_hat = params.mu[0] * (1.0 - params.phi[0])
    grad = np.array([1.0 / (1 - params.phi[0]), c_hat / (1 - params.phi[0]) ** 2])
    se_mu = np.sqrt(grad @ cov @ grad)
    se_sig = sig_t / np.sqrt(2.0 * n)

    assert abs(params.phi[0] - phi_t) < 3 * se_phi
    assert abs(params.mu[0] - mu_t) < 3 * se_mu
    assert abs(params.sigma[0] - sig_t) < 3 * se_sig


def test_r_tilde_basic_trivials():
    rows = np.array([[1.0, 2.0, -1.0], [1.0, 2.0, -1.0], [2.0, -1.0, 0.0]])
    panel = ErrorPanel(values=rows, sigma=np.ones(3))
    m = r_tilde_basic(panel)
    assert m.values[0, 1] == pytest.approx(1.0, abs=1e-15)

    ortho = ErrorPanel(values=np.array([[1.0, 0.0], [0.0, 1.0]]), sigma=np.ones(2))
    assert r_tilde_basic(ortho).values[0, 1] == 0.0


def test_r_tilde_basic_hand_dot_product():
    panel = ErrorPanel(values=np.array([[1.0, 2.0, 3.0], [3.0, 2.0, 1.0]]), sigma=np.ones(2))
    m = r_tilde_basic(panel)
    assert m.values[0, 1] == pytest.approx(10.0 / 14.0, rel=1e-12)


def test_r_tilde_basic_zero_row():
    panel = ErrorPanel(
        values=np.array([[0.0, 0.0], [1.0, 2.0]]), sigma=np.ones(2), labels=("dead", "live")
    )
    with pytest.raises(ZeroRow) as exc:
        r_tilde_basic(panel)
    assert exc.value.label == "dead"


def test_r_tilde_basic_scale_invariance():
    rng = np.random.default_rng(17)
    rows = rng.standard_normal((4, 9))
    base = r_tilde_basic(ErrorPanel(values=rows, sigma=np.ones(4)))
    scaled = rows.copy()
    scaled[2] *= 17.5
    other = r_tilde_basic(ErrorPanel(values=scaled, sigma=np.ones(4)))
    assert np.abs(base.values - other.values).max() < 1e-12


def test_r_tilde_basic_always_psd():
    rng = np.random.default_rng(23)
    for _ in range(20):
        c = int(rng.integers(2, 12))
        k = int(rng.integers(2, 6))  # often rank-deficient (k < c)
        rows = rng.standard_normal((c, k))
        m = r_tilde_basic(ErrorPanel(values=rows, sigma=np.ones(c)))
        validate_correlation(m.values)  # non-strict must accept


def test_r_tilde_pd_formula_and_floor():
    perfect = ErrorPanel(values=np.vstack([np.ones(4), np.ones(4)]), sigma=np.ones(2))
    basic = r_tilde_basic(perfect)
    pd = r_tilde_pd(basic)
    assert pd.values[0, 1] == pytest.approx(0.99, abs=1e-15)

    ident = r_tilde_pd(validate_correlation(np.eye(5)))
    assert np.array_equal(ident.values, np.eye(5))

    v = np.array([1.0, -1.0, 1.0, 1.0, -1.0])
    rank1 = np.outer(v, v).astype(float)
    np.fill_diagonal(rank1, 1.0)
    blended = r_tilde_pd(validate_correlation(rank1))
    eigs = np.linalg.eigvalsh(blended.values)
    assert eigs.min() == pytest.approx(0.01, abs=1e-12)
    validate_correlation(blended.values, strict=True)


def test_panel_requires_three_periods():
    with pytest.raises(DimensionMismatch):
        SeriesPanel(labels=("a",), values=np.array([[1.0, 2.0]]))


def test_panel_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(4)
    values = rng.standard_normal((3, 7))
    path = tmp_path / "panel.csv"
    path.write_text(format_panel_csv(("x", "y", "z"), values))
    panel = read_panel_csv(path)
    assert panel.labels == ("x", "y", "z")
    assert np.array_equal(panel.values, values)


def test_params_csv_roundtrip(tmp_path):
    params = AR1Params(mu=np.array([1.0, -2.5]), phi=np.array([0.3, 0.0]), sigma=np.array([0.7, 1.1]))
    path = tmp_path / "params.csv"
    path.write_text(format_params_csv(("a", "b"), params))
    labels, back = read_params_csv(path)
    assert labels == ("a", "b")
    assert np.array_equal(back.mu, params.mu)
    assert np.array_equal(back.phi, params.phi)
    assert np.array_equal(back.sigma, params.sigma)
