"""Acceptance suite: one test per acceptance criterion, each at its stated
tolerance and runtime budget, printing a pass line on success.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; a pytest failure on any test is the corresponding fail line.
"""

import json
import time
from pathlib import Path

import numpy as np
import scipy.linalg

from kinverify.cli import RunConfig, run_pipeline
from kinverify.dataset import write_feature_file
from kinverify.fusion import fit_logistic, fuse, penalized_gradient
from kinverify.imaging import MsrParams, gaussian_surround, msr_log_response
from kinverify.lpq import BlockGrid, LpqParams, block_histograms, lpq_codes
from kinverify.scoring import evaluate, export_roc, read_roc_csv, select_threshold
from kinverify.subspace import TxqdaParams, project, train_txqda
from kinverify.synthdata import latent_pair_features, write_demo_dataset

from test_imaging import brute_force_surround
from test_lpq import oracle_lpq_codes
from test_subspace import dense_discriminant_oracle, random_instance


def ok(name):
    print(f"[PASS] {name}")


class TestAcceptance:
    def test_lpq_oracle_equivalence(self):
        """lpq_codes (decorrelation off) == direct per-pixel DFT, exactly,
        20 random 16x16 images x all R in 3..9, under 5 s."""
        start = time.perf_counter()
        rng = np.random.default_rng(2024)
        for i in range(20):
            img = rng.uniform(0, 255, size=(16, 16))
            for window in range(3, 10):
                fast = lpq_codes(img, LpqParams(window=window, decorrelate=False))
                slow = oracle_lpq_codes(img, window)
                assert np.array_equal(fast, slow), f"image {i}, R={window}"
        elapsed = time.perf_counter() - start
        assert elapsed < 5.0, f"took {elapsed:.2f}s"
        ok(f"LPQ oracle equivalence (20 images, R=3..9, {elapsed:.2f}s)")

    def test_lpq_shape_and_mass(self):
        """Histogram vector is 12 x 256 = 3072 long; per-block mass equals
        coded pixels on 100 random images."""
        rng = np.random.default_rng(7)
        grid = BlockGrid(4, 3)
        for _ in range(100):
            h = int(rng.integers(12, 40))
            w = int(rng.integers(12, 40))
            img = rng.uniform(0, 255, size=(h, w))
            codes = lpq_codes(img, LpqParams(window=3, decorrelate=False))
            hist = block_histograms(codes, grid)
            assert hist.shape == (3072,)
            assert hist.sum() == codes.size
        ok("LPQ shape 3072 and mass conservation (100 images)")

    def test_msr_properties(self):
        """Constant log response exactly 0; surround matches brute force to
        1e-9; splitting a weight in half changes nothing beyond 1e-6."""
        params = MsrParams(scales=(1.5, 3.0), weights=(0.5, 0.5))
        resp = msr_log_response(np.full((12, 12), 88.0), params)
        assert np.max(np.abs(resp)) == 0.0

        rng = np.random.default_rng(3)
        for shape, sigma in [((8, 8), 0.9), ((12, 12), 2.0), ((16, 16), 3.0), ((8, 8), 5.0)]:
            plane = rng.uniform(0, 255, size=shape)
            assert np.max(np.abs(gaussian_surround(plane, sigma) - brute_force_surround(plane, sigma))) <= 1e-9

        plane = rng.uniform(0, 255, size=(14, 14))
        whole = msr_log_response(plane, MsrParams(scales=(2.0, 4.0), weights=(0.6, 0.4)))
        split = msr_log_response(
            plane, MsrParams(scales=(2.0, 4.0, 4.0), weights=(0.6, 0.2, 0.2))
        )
        assert np.max(np.abs(whole - split)) <= 1e-6
        ok("MSR constant invariance, surround oracle <= 1e-9, weight-split <= 1e-6")

    def test_subspace_oracle(self):
        """Degenerate multilinear case (I2=1, iters=1) reproduces the dense
        generalized eigensolver to principal angle < 1e-6, 20 instances,
        under 10 s."""
        start = time.perf_counter()
        for seed in range(20):
            x_vecs, z_vecs, fams, i1 = random_instance(seed)
            out1 = min(3, i1 - 1)
            params = TxqdaParams(out1=out1, out2=1, iters=1, reg_eps=1e-3)
            model = train_txqda(
                x_vecs.T[:, None, :], z_vecs.T[:, None, :], fams, fams, params
            )
            oracle = dense_discriminant_oracle(x_vecs, z_vecs, fams, fams, out1, 1e-3)
            angle = scipy.linalg.subspace_angles(model.u1, oracle).max()
            assert angle < 1e-6, f"seed {seed}: angle {angle:.2e}"
        elapsed = time.perf_counter() - start
        assert elapsed < 10.0, f"took {elapsed:.2f}s"
        ok(f"subspace dense-solver oracle (20 instances, {elapsed:.2f}s)")

    def test_wccn_end_to_end(self):
        """With eps=0 the projected training set has within-family
        covariance equal to identity to 1e-6 (max norm)."""
        rng = np.random.default_rng(5)
        x = rng.standard_normal((6, 3, 24))
        z = rng.standard_normal((6, 3, 24))
        fams = [f"fam{i % 4}" for i in range(24)]
        model = train_txqda(
            x, z, fams, fams, TxqdaParams(out1=3, out2=2, iters=2, wccn_eps=0.0)
        )
        ys = np.array(
            [project(x[:, :, n], model) for n in range(24)]
            + [project(z[:, :, n], model) for n in range(24)]
        )
        labels = fams + fams
        dim = ys.shape[1]
        cov = np.zeros((dim, dim))
        for fam in sorted(set(labels)):
            rows = ys[[i for i, f in enumerate(labels) if f == fam]]
            centered = rows - rows.mean(axis=0)
            cov += centered.T @ centered / len(rows)
        cov /= len(set(labels))
        assert np.max(np.abs(cov - np.eye(dim))) < 1e-6
        ok("WCCN end-to-end whitening < 1e-6")

    def _feature_level_run(self, tmp_path, informative, seed):
        base = tmp_path / ("informative" if informative else "uninformative")
        base.mkdir(parents=True, exist_ok=True)
        parents, children, _ = latent_pair_features(
            100, samples_per_side=3, noise=0.1, seed=seed, informative=informative
        )
        images = []
        for block, role in [(p, "parent") for p in parents] + [
            (c, "child") for c in children
        ]:
            images.append(
                {
                    "id": block.sample_id,
                    "path": "unused.png",
                    "role": role,
                    "family_id": block.sample_id.split("-")[0],
                }
            )
        (base / "manifest.json").write_text(
            json.dumps({"schema": 1, "name": "bench", "images": images})
        )
        write_feature_file(parents + children, base / "features.kfv")
        config = RunConfig(
            manifest=str(base / "manifest.json"),
            out=str(base / "run"),
            seed=seed,
            feature_kind="deep",
            deep_features=str(base / "features.kfv"),
            msr_enabled=False,
            wccn_eps=1e-2,
        )
        return run_pipeline(config)["mean_accuracy"]

    def test_synthetic_kinship_benchmark(self, tmp_path):
        """100 latent families through the full pipeline: mean 5-fold
        accuracy >= 0.90; the no-shared-latent generator sits at chance
        (0.5 +- 0.05).  Under 60 s."""
        start = time.perf_counter()
        acc = self._feature_level_run(tmp_path, informative=True, seed=2024)
        chance = self._feature_level_run(tmp_path, informative=False, seed=2024)
        elapsed = time.perf_counter() - start
        assert acc >= 0.90, f"informative accuracy {acc:.3f}"
        assert abs(chance - 0.5) <= 0.05, f"uninformative accuracy {chance:.3f}"
        assert elapsed < 60.0, f"took {elapsed:.1f}s"
        ok(
            f"synthetic benchmark: informative {acc:.3f} >= 0.90, "
            f"uninformative {chance:.3f} ~ 0.5 ({elapsed:.1f}s)"
        )

    def test_fusion_non_harm(self):
        """Fused accuracy >= best single modality - 0.01; gradient max-norm
        at the fitted optimum < 1e-6."""
        rng = np.random.default_rng(99)
        n = 400
        labels = rng.random(n) < 0.5
        signal = np.where(labels, 1.0, -1.0)
        train = np.column_stack(
            [signal + rng.normal(0, 0.8, n), signal + rng.normal(0, 1.6, n)]
        )
        labels_test = rng.random(n) < 0.5
        signal_test = np.where(labels_test, 1.0, -1.0)
        test = np.column_stack(
            [signal_test + rng.normal(0, 0.8, n), signal_test + rng.normal(0, 1.6, n)]
        )
        singles = []
        for m in range(2):
            t = select_threshold(train[:, m], labels)
            singles.append(evaluate(test[:, m], labels_test, t).accuracy)
        model = fit_logistic(train, labels.astype(float), l2_lambda=1e-3)
        grad = penalized_gradient(
            np.array([model.beta0, *model.beta]), train, labels.astype(float), 1e-3
        )
        assert np.max(np.abs(grad)) < 1e-6
        fused_train = [fuse(model, row) for row in train]
        fused_test = [fuse(model, row) for row in test]
        t = select_threshold(fused_train, labels)
        fused_acc = evaluate(fused_test, labels_test, t).accuracy
        assert fused_acc >= max(singles) - 0.01
        ok(f"fusion non-harm: fused {fused_acc:.3f} vs singles {max(singles):.3f}")

    def test_metrics_criteria(self, tmp_path):
        """Perfect separation -> 1.0/1.0/0.0; random labels at n=10^4 give
        AUC 0.5 +- 0.02; ROC CSV round trip is exact."""
        m = evaluate([0.9, 0.8, 0.2, 0.1], [True, True, False, False], 0.5)
        assert m.accuracy == 1.0 and m.auc == 1.0 and m.eer == 0.0

        rng = np.random.default_rng(31415)
        scores = rng.standard_normal(10_000)
        labels = rng.random(10_000) < 0.5
        auc = evaluate(scores, labels, 0.0).auc
        assert abs(auc - 0.5) <= 0.02

        metrics = evaluate(np.round(rng.standard_normal(64), 3), rng.random(64) < 0.5, 0.0)
        path = tmp_path / "roc.csv"
        export_roc(metrics, path)
        parsed = read_roc_csv(path)
        reexport = tmp_path / "roc2.csv"
        export_roc(
            type(metrics)(
                accuracy=metrics.accuracy,
                threshold=metrics.threshold,
                roc=tuple(parsed),
                auc=metrics.auc,
                eer=metrics.eer,
            ),
            reexport,
        )
        assert reexport.read_bytes() == path.read_bytes()
        assert [(f, t) for f, t, _ in parsed] == [
            (float(f"{f:.9g}"), float(f"{t:.9g}")) for f, t, _ in metrics.roc
        ]
        ok(f"metrics: perfect separation, random AUC {auc:.3f}, ROC CSV round trip")

    def test_run_determinism(self, tmp_path):
        """The all-in-one run twice with one seed yields byte-identical
        reports (and every other persisted artifact checked here)."""
        manifest = write_demo_dataset(tmp_path / "demo", n_families=10, image_size=32, seed=7)

        def run(out):
            config = RunConfig(
                manifest=str(manifest),
                out=str(out),
                seed=11,
                feature_kind="lpq",
                lpq_scales=(3,),
                lpq_size=32,
                msr_enabled=True,
                msr_scales=(1.5, 3.0),
                out1=8,
                out2=3,
                iters=2,
            )
            return run_pipeline(config)

        run(tmp_path / "a")
        run(tmp_path / "b")
        compared = 0
        for rel in sorted(
            p.relative_to(tmp_path / "a")
            for p in (tmp_path / "a").rglob("*")
            if p.is_file()
        ):
            a = (tmp_path / "a" / rel).read_bytes()
            b = (tmp_path / "b" / rel).read_bytes()
            assert a == b, f"{rel} differs between identical runs"
            compared += 1
        assert compared > 10
        ok(f"run determinism: {compared} artifacts byte-identical")
