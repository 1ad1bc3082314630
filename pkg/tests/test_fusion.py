"""Fusion tests: IRLS optimum against a direct numeric optimizer, sigmoid
evaluation values, ranking invariances, and the non-harm property."""

import numpy as np
import pytest
from scipy.optimize import minimize

from kinverify.errors import InvalidArgumentError
from kinverify.fusion import (
    LrModel,
    fit_logistic,
    fuse,
    load_lr_model,
    penalized_gradient,
    penalized_log_likelihood,
    save_lr_model,
)
from kinverify.scoring import evaluate, select_threshold


def two_modality_problem(seed, n=400, noise_b=1.5):
    """Shared latent signal observed through two noisy score channels."""
    rng = np.random.default_rng(seed)
    labels = rng.random(n) < 0.5
    signal = np.where(labels, 1.0, -1.0)
    score_a = signal + rng.normal(0, 0.8, n)
    score_b = signal + rng.normal(0, noise_b, n)
    return np.column_stack([score_a, score_b]), labels.astype(float)


class TestFitLogistic:
    def test_symmetric_data_zero_intercept(self):
        scores = np.array([1.0] * 20 + [-1.0] * 20)
        labels = np.array([1.0] * 20 + [0.0] * 20)
        model = fit_logistic(scores, labels, l2_lambda=1.0)
        assert abs(model.beta0) < 1e-8
        assert model.beta[0] > 0
        assert model.converged

    def test_constant_modality_weight_vanishes(self):
        rng = np.random.default_rng(0)
        labels = (rng.random(200) < 0.5).astype(float)
        informative = np.where(labels > 0.5, 1.0, -1.0) + rng.normal(0, 0.5, 200)
        constant = np.full(200, 0.7)
        x = np.column_stack([informative, constant])
        lam = 0.5
        model = fit_logistic(x, labels, l2_lambda=lam)
        assert abs(model.beta[1]) < 1e-8

        # direct numeric optimization of the same penalized likelihood
        res = minimize(
            lambda p: -penalized_log_likelihood(p, x, labels, lam),
            np.zeros(3),
            method="BFGS",
            options={"gtol": 1e-10, "maxiter": 500},
        )
        fitted = np.array([model.beta0, *model.beta])
        assert np.allclose(fitted, res.x, atol=1e-5)

    def test_gradient_vanishes_at_optimum(self):
        x, labels = two_modality_problem(seed=3)
        lam = 0.1
        model = fit_logistic(x, labels, l2_lambda=lam)
        grad = penalized_gradient(np.array([model.beta0, *model.beta]), x, labels, lam)
        assert np.max(np.abs(grad)) < 1e-6

    def test_single_class_rejected(self):
        with pytest.raises(InvalidArgumentError):
            fit_logistic(np.ones((5, 1)), np.ones(5))

    def test_nonfinite_rejected(self):
        with pytest.raises(InvalidArgumentError):
            fit_logistic(np.array([[np.nan], [1.0]]), np.array([0.0, 1.0]))

    def test_nonconvergence_flagged_with_best_iterate(self):
        x, labels = two_modality_problem(seed=8)
        model = fit_logistic(x, labels, l2_lambda=1e-3, max_iters=1)
        assert not model.converged
        assert model.iterations == 1
        assert np.all(np.isfinite([model.beta0, *model.beta]))


class TestFuse:
    def test_zero_model_is_half(self):
        model = LrModel(beta0=0.0, beta=(0.0, 0.0), l2_lambda=0.0, converged=True, iterations=1)
        assert fuse(model, [123.0, -9.0]) == pytest.approx(0.5)

    def test_ignored_modality(self):
        model = LrModel(beta0=0.0, beta=(1.0, 0.0), l2_lambda=0.0, converged=True, iterations=1)
        assert fuse(model, [0.0, 7.0]) == pytest.approx(0.5)

    def test_sigma_of_one(self):
        model = LrModel(beta0=1.0, beta=(2.0, -1.0), l2_lambda=0.0, converged=True, iterations=1)
        assert fuse(model, [0.5, 1.0]) == pytest.approx(0.731058579, abs=1e-9)

    def test_monotone_in_positive_weight(self):
        model = LrModel(beta0=0.2, beta=(1.5, 0.4), l2_lambda=0.0, converged=True, iterations=1)
        values = [fuse(model, [s, 0.0]) for s in np.linspace(-3, 3, 25)]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_length_mismatch(self):
        model = LrModel(beta0=0.0, beta=(1.0,), l2_lambda=0.0, converged=True, iterations=1)
        with pytest.raises(InvalidArgumentError):
            fuse(model, [1.0, 2.0])


class TestInvariances:
    def test_affine_transform_of_one_modality_preserves_auc(self):
        x_train, y_train = two_modality_problem(seed=11)
        x_test, y_test = two_modality_problem(seed=12)
        # unpenalized fit: the maximum-likelihood optimum is exactly
        # equivariant under affine reparameterization of a modality
        base = fit_logistic(x_train, y_train, l2_lambda=0.0, tol=1e-12, max_iters=200)
        fused_base = [fuse(base, row) for row in x_test]

        transform = lambda s: 3.5 * s - 2.0
        x_train_t = x_train.copy()
        x_train_t[:, 0] = transform(x_train_t[:, 0])
        x_test_t = x_test.copy()
        x_test_t[:, 0] = transform(x_test_t[:, 0])
        refit = fit_logistic(x_train_t, y_train, l2_lambda=0.0, tol=1e-12, max_iters=200)
        fused_refit = [fuse(refit, row) for row in x_test_t]

        auc_base = evaluate(fused_base, y_test > 0.5, 0.5).auc
        auc_refit = evaluate(fused_refit, y_test > 0.5, 0.5).auc
        assert abs(auc_base - auc_refit) < 1e-10

    def test_fusion_non_harm(self):
        for seed in (21, 22, 23):
            x_train, y_train = two_modality_problem(seed=seed)
            x_test, y_test = two_modality_problem(seed=seed + 100)
            singles = []
            for m in range(2):
                t = select_threshold(x_train[:, m], y_train > 0.5)
                singles.append(evaluate(x_test[:, m], y_test > 0.5, t).accuracy)
            model = fit_logistic(x_train, y_train, l2_lambda=1e-3)
            fused_train = [fuse(model, row) for row in x_train]
            fused_test = [fuse(model, row) for row in x_test]
            t = select_threshold(fused_train, y_train > 0.5)
            fused_acc = evaluate(fused_test, y_test > 0.5, t).accuracy
            assert fused_acc >= max(singles) - 0.01


class TestModelIO:
    def test_roundtrip(self, tmp_path):
        x, labels = two_modality_problem(seed=31)
        model = fit_logistic(x, labels, l2_lambda=0.01)
        path = tmp_path / "lr.json"
        save_lr_model(model, path)
        back = load_lr_model(path)
        assert back == model
