import json

import numpy as np
import pytest

import mfsg


@pytest.fixture(scope="module")
def sample():
    train, test, active = mfsg.generate(mfsg.Scenario(n=80, sigma=0.5, seed=7), replicate=0)
    return train, test, active


def test_basis_partition_of_unity():
    basis = mfsg.make_bspline_basis((0.0, 1.0), order=4, num_functions=9)
    values = basis.eval(np.linspace(0.0, 1.0, 41))
    assert values.shape == (41, 9)
    np.testing.assert_allclose(values.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(basis.gram, basis.gram.T, atol=1e-14)


def test_prox_matches_closed_form():
    y = np.array([3.0, 4.0])
    np.testing.assert_allclose(mfsg.soft_threshold(y, 1.0), y * 0.8)
    np.testing.assert_allclose(mfsg.soft_threshold(y, 6.0), 0.0)
    np.testing.assert_allclose(mfsg.elastic_soft_threshold(y, 1.0, 1.0), y * 0.4)


def test_solvers_agree(sample):
    train, _, _ = sample
    a = mfsg.gmd_fit(train, 0.05, lambda_der=1e-4)
    b = mfsg.admm_fit(train, 0.05, lambda_der=1e-4, max_iter=100000, tol_abs=1e-10, tol_rel=1e-10)
    assert a.converged and b.converged
    assert abs(a.objective - b.objective) <= 1e-5 * abs(a.objective)
    assert a.active_set == b.active_set


def test_cross_validate_and_predict(sample):
    train, test, active = sample
    cv = mfsg.cross_validate(train, grid_size=20, lambda_der_grid=[0.0, 1e-4], seed=3)
    assert cv.best["lambda"] > 0.0
    assert len(cv.surface) == 2
    fit = cv.fit
    assert set(active) <= set(fit.active_set)
    pred = fit.predict(test)
    assert pred.shape == (test.num_samples,)
    score = mfsg.evaluate(fit, test, active)
    assert score["rmse"] == pytest.approx(np.sqrt(np.mean((pred - test.response) ** 2)), rel=1e-12)
    ols = mfsg.fit_ols(train)
    assert score["rmse"] < mfsg.evaluate(ols, test, active)["rmse"]


def test_model_json_round_trip(sample):
    train, test, _ = sample
    fit = mfsg.gmd_fit(train, 0.1)
    text = fit.to_json()
    doc = json.loads(text)
    assert doc["format"] == "mfsg-model"
    back = mfsg.load_model(text)
    assert back.to_json() == text
    np.testing.assert_array_equal(back.predict(test), fit.predict(test))


def test_dataset_from_curves_recovers_signal():
    rng = np.random.default_rng(0)
    t = np.linspace(0.0, 1.0, 60)
    n = 120
    x1 = rng.normal(size=(n, 1)) * np.sin(np.pi * t) + rng.normal(size=(n, 1)) * t
    x2 = rng.normal(size=(n, 1)) * np.cos(np.pi * t)
    f = x1 * 2.0 * t
    y = 0.5 * ((f[:, 1:] + f[:, :-1]) * np.diff(t)).sum(axis=1) + 0.01 * rng.normal(size=n)
    data = mfsg.Dataset.from_curves(t, [x1, x2], y, num_functions=8, names=["a", "b"])
    assert data.names == ["a", "b"]
    fit = mfsg.gmd_fit(data, 0.01)
    assert fit.active_set == [0]
    assert fit.block_norms()[1] == 0.0


def test_errors_are_python_exceptions(sample):
    train, _, _ = sample
    with pytest.raises(ValueError):
        mfsg.gmd_fit(train, -1.0)
    with pytest.raises(ValueError):
        mfsg.load_model("{}")
    with pytest.raises(ValueError):
        mfsg.make_bspline_basis((1.0, 0.0))
