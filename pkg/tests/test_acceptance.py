"""Release acceptance suite: one test per criterion, tolerances inline.

`pytest -v tests/test_acceptance.py` prints one pass/fail line per criterion.
Criteria 01-06 and 10 are numerical checks that finish in seconds; criteria
07 and 08 train autoencoders at protocol scale and together take roughly ten
minutes on one core. Criterion 09 runs only when QRDX_FULL_DATASET points at
a stored collision dataset, since the repository ships no data files.
"""

import dataclasses
import itertools
import json
import math
import os
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from qrdx import classical, pipeline
from qrdx.config import (
    DEFAULT_BENCHMARK,
    CircuitConfig,
    DatasetConfig,
    OutputConfig,
    PipelineConfig,
    ReducerConfig,
)
from qrdx.losses import bce_loss, kl_standard_normal, mse_loss
from qrdx.metrics import compute_auc, subset_uncertainty
from qrdx.network import DenseNetwork, backward, forward
from qrdx.quantum import (
    EncodingCircuit,
    StateVector,
    apply_cnot,
    apply_g,
    compound_zero_probability,
    kernel_matrix,
    kernel_value,
)
from qrdx.sinkhorn import SinkhornConfig, sinkhorn_divergence
from qrdx.svm import decision_values, solve_dual


def test_criterion_01_gram_matrix_sanity():
    """200 random feature vectors: symmetric, unit-diagonal, PSD Gram."""
    start = time.monotonic()
    rng = np.random.default_rng(11)
    x = rng.uniform(0.0, 1.0, (200, 16))
    gram = kernel_matrix(x).values
    assert np.abs(gram - gram.T).max() < 1e-12
    assert np.abs(np.diag(gram) - 1.0).max() < 1e-10
    assert np.linalg.eigvalsh(gram).min() >= -1e-8
    assert time.monotonic() - start < 30.0


def test_criterion_02_circuit_identities():
    """Known single-gate states, a Bell state, and the two kernel routes."""
    start = time.monotonic()
    zero = StateVector.zero(1)
    ident = apply_g(zero, 0, 0.0, 0.0, 0.0)
    assert np.abs(ident.amplitudes - zero.amplitudes).max() < 1e-15

    flipped = apply_g(zero, 0, math.pi, 0.0, math.pi)
    assert np.abs(flipped.amplitudes - np.array([0.0, 1.0])).max() < 1e-12

    bell = apply_cnot(apply_g(StateVector.zero(2), 0, math.pi / 2, 0.0, math.pi), 0, 1)
    target = np.zeros(4, dtype=complex)
    target[0] = target[3] = 1.0 / math.sqrt(2.0)
    assert np.abs(bell.amplitudes - target).max() < 1e-12

    worst = 0.0
    for i in range(100):
        rng = np.random.default_rng(900 + i)
        x1 = rng.uniform(0.0, 1.0, 16)
        x2 = rng.uniform(0.0, 1.0, 16)
        worst = max(worst, abs(kernel_value(x1, x2) - compound_zero_probability(x1, x2)))
    assert worst < 1e-10
    assert time.monotonic() - start < 10.0


def _enumerate_dual(gram, labels, c_value):
    """Global dual optimum by active-set enumeration: every pattern of
    (zero, at-C, interior) alphas yields a linear KKT system; the best
    feasible candidate is the optimum of the concave objective.
    Returns (objective, alphas, bias_or_None)."""
    y = np.where(np.asarray(labels) > 0, 1.0, -1.0)
    n = y.shape[0]
    q = np.outer(y, y) * gram
    best, best_alpha = None, None
    for pattern in itertools.product((0, 1, 2), repeat=n):
        bound = [i for i, p in enumerate(pattern) if p == 1]
        free = [i for i, p in enumerate(pattern) if p == 2]
        alpha = np.zeros(n)
        alpha[bound] = c_value
        if free:
            m = len(free)
            system = np.zeros((m + 1, m + 1))
            system[:m, :m] = q[np.ix_(free, free)]
            system[:m, m] = y[free]
            system[m, :m] = y[free]
            rhs = np.zeros(m + 1)
            rhs[:m] = 1.0
            if bound:
                rhs[:m] -= q[np.ix_(free, bound)].sum(axis=1) * c_value
                rhs[m] = -c_value * y[bound].sum()
            try:
                sol = np.linalg.solve(system, rhs)
            except np.linalg.LinAlgError:
                continue
            alpha[free] = sol[:m]
            if np.any(alpha[free] < -1e-10) or np.any(alpha[free] > c_value + 1e-10):
                continue
        if abs((alpha * y).sum()) > 1e-9:
            continue
        objective = alpha.sum() - 0.5 * alpha @ q @ alpha
        if best is None or objective > best:
            best, best_alpha = objective, alpha
    free_mask = (best_alpha > 1e-8) & (best_alpha < c_value - 1e-8)
    bias = None
    if free_mask.any():
        bias = float((y[free_mask] - gram[free_mask] @ (best_alpha * y)).mean())
    return best, best_alpha, bias


def test_criterion_03_dual_solver_vs_enumeration():
    """50 random kernel problems of up to 8 points against the exact QP."""
    start = time.monotonic()
    circuit = EncodingCircuit(n_qubits=3)
    rng = np.random.default_rng(2026)
    worst_obj, worst_dec, n_decided = 0.0, 0.0, 0
    for _ in range(50):
        n = int(rng.integers(2, 9))
        x = rng.uniform(0.0, 1.0, (n, 6))
        labels = np.zeros(n, dtype=int)
        labels[: max(1, n // 2)] = 1
        rng.shuffle(labels)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        gram = kernel_matrix(x, circuit=circuit).values
        c = float(rng.choice([0.5, 1.0, 2.0]))
        objective, alpha, bias = _enumerate_dual(gram, labels, c)
        model = solve_dual(gram, labels, c, tolerance=1e-6)
        worst_obj = max(worst_obj, abs(model.objective - objective))
        if bias is not None:
            # bias (hence decisions) is only unique with interior alphas
            n_decided += 1
            y = np.where(np.asarray(labels) > 0, 1.0, -1.0)
            exact = gram @ (alpha * y) + bias
            worst_dec = max(worst_dec, np.abs(decision_values(model, gram) - exact).max())
    assert worst_obj < 1e-6
    assert worst_dec < 1e-4
    assert n_decided >= 40   # decisions were actually compared, not skipped
    assert time.monotonic() - start < 60.0


_FD_SINKHORN = SinkhornConfig(epsilon=1.0, max_iterations=30000,
                              tolerance=1e-9, anneal=False)


def _loss_head(path, out, aux):
    """Scalar training loss and its gradient w.r.t. the network outputs."""
    if path == "mse":
        return mse_loss(aux, out)
    if path == "bce":
        return bce_loss(aux, out)
    if path == "kl":
        k = out.shape[1] // 2
        mu, logvar = out[:, :k], out[:, k:]
        sigma = np.exp(0.5 * logvar)
        value, grad_mu, grad_sigma = kl_standard_normal(mu, sigma)
        return value, np.concatenate([grad_mu, grad_sigma * 0.5 * sigma], axis=1)
    value, grad_a, _ = sinkhorn_divergence(out, aux, _FD_SINKHORN, with_grad=True)
    return value, grad_a


def test_criterion_04_backprop_vs_finite_differences():
    """20 random small networks, every loss path, central differences."""
    start = time.monotonic()
    worst = {"mse": 0.0, "bce": 0.0, "kl": 0.0, "sinkhorn": 0.0}
    for i in range(20):
        path = ("mse", "bce", "kl", "sinkhorn")[i % 4]
        rng = np.random.default_rng(4000 + i)
        n = int(rng.integers(4, 7))
        w_in = int(rng.integers(3, 6))
        hidden = int(rng.integers(4, 8))
        if path == "mse":
            w_out, last = int(rng.integers(2, 4)), "sigmoid"
            aux = rng.uniform(0.1, 0.9, (n, w_out))
        elif path == "bce":
            w_out, last = 1, "sigmoid"
            aux = rng.integers(0, 2, n).astype(float)
        elif path == "kl":
            w_out, last = 2 * int(rng.integers(2, 4)), "linear"
            aux = None
        else:
            w_out, last = int(rng.integers(2, 4)), "linear"
            aux = rng.normal(0.0, 0.8, (n, w_out))
        net = DenseNetwork.create([w_in, hidden, w_out], ["elu", last], rng)
        x = rng.uniform(0.0, 1.0, (n, w_in))

        fp = forward(net, x)
        _, grad_out = _loss_head(path, fp.outputs, aux)
        grads = backward(net, fp, grad_out)[0]

        h = 1e-4 if path == "sinkhorn" else 1e-5
        fd_sq, diff_sq = 0.0, 0.0
        for li, layer in enumerate(net.layers):
            for arr, g in ((layer.weights, grads[li][0]), (layer.bias, grads[li][1])):
                it = np.nditer(arr, flags=["multi_index"])
                while not it.finished:
                    idx = it.multi_index
                    orig = arr[idx]
                    arr[idx] = orig + h
                    up = _loss_head(path, forward(net, x).outputs, aux)[0]
                    arr[idx] = orig - h
                    down = _loss_head(path, forward(net, x).outputs, aux)[0]
                    arr[idx] = orig
                    fd = (up - down) / (2.0 * h)
                    fd_sq += fd * fd
                    diff_sq += (g[idx] - fd) ** 2
                    it.iternext()
        rel = math.sqrt(diff_sq) / max(math.sqrt(fd_sq), 1e-12)
        worst[path] = max(worst[path], rel)
    assert worst["mse"] < 1e-4
    assert worst["bce"] < 1e-4
    assert worst["kl"] < 1e-4
    assert worst["sinkhorn"] < 1e-3
    assert time.monotonic() - start < 120.0


def test_criterion_05_divergence_sanity():
    """Self-distance, a two-point exact value, and translation growth."""
    start = time.monotonic()
    cfg = SinkhornConfig(epsilon=0.1, max_iterations=20000, tolerance=1e-9)
    rng = np.random.default_rng(5)
    cloud = rng.uniform(0.0, 1.0, (25, 4))
    assert abs(sinkhorn_divergence(cloud, cloud, cfg)) < 1e-6

    dirac = sinkhorn_divergence(np.zeros((1, 2)), np.array([[3.0, 4.0]]), cfg)
    assert abs(dirac - 25.0) / 25.0 < 0.05   # squared distance of the two points

    base = rng.uniform(0.0, 1.0, (20, 3))
    shifted = [sinkhorn_divergence(base, base + s, cfg) for s in (0.2, 0.5, 1.0, 2.0)]
    assert all(lo < hi for lo, hi in zip(shifted, shifted[1:]))
    assert time.monotonic() - start < 30.0


def test_criterion_06_classical_reducer_oracles():
    """Each classical method against a planted or closed-form target."""
    start = time.monotonic()

    # principal components against a dense SVD of the centered matrix
    rng = np.random.default_rng(1)
    x = rng.normal(0.0, 1.0, (80, 10)) * np.linspace(3.0, 0.3, 10)
    model = classical.pca_fit(x, 4)
    centered = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    for row, ref in zip(model.components, vt[:4]):
        assert min(np.abs(row - ref).max(), np.abs(row + ref).max()) < 1e-8

    # independent components of a planted two-source mix
    n = 2000
    t = np.linspace(0.0, 8.0, n)
    sources = np.c_[np.sin(2 * np.pi * t), ((t * 1.7) % 1.0) * 2 - 1]
    mixed = sources @ np.array([[1.0, 0.6], [0.4, 1.0]]).T
    recovered = classical.ica_fit(mixed, 2, seed=0).transform(mixed)
    corr = np.abs(np.corrcoef(recovered.T, sources.T)[:2, 2:])
    assert corr.max(axis=0).min() >= 0.99

    # exact factorisation of a planted non-negative rank-2 matrix
    rng = np.random.default_rng(2)
    w0 = rng.uniform(0.1, 1.0, (40, 2))
    h0 = rng.uniform(0.1, 1.0, (2, 12))
    nmf = classical.nmf_fit(w0 @ h0, 2, l1_strength=0.0, max_iter=4000, tol=0.0)
    assert nmf.objective_history[-1] < 1e-6

    # locally linear embedding unrolls a planted curve
    rng = np.random.default_rng(42)
    arc = np.sort(rng.uniform(0.0, 3.0, 150))
    curve = np.c_[np.cos(2 * arc), np.sin(1.3 * arc), arc]
    lle = classical.lle_fit(curve, 1, n_neighbors=8)
    assert abs(spearmanr(lle.embedding[:, 0], arc).statistic) >= 0.95

    # spectral embedding separates two blobs perfectly
    rng = np.random.default_rng(7)
    blobs = np.vstack([rng.normal(0.0, 0.3, (60, 5)), rng.normal(3.0, 0.3, (60, 5))])
    blob_labels = np.array([0] * 60 + [1] * 60, dtype=np.uint8)
    se = classical.se_fit(blobs, 2, n_neighbors=10)
    auc = compute_auc(blob_labels, se.embedding[:, 0])
    assert max(auc, 1.0 - auc) == 1.0

    # contrastive divergence keeps improving on a two-prototype set
    rng = np.random.default_rng(5)
    protos = (rng.uniform(0.0, 1.0, (2, 20)) > 0.5).astype(float)
    picks = rng.integers(0, 2, 300)
    noisy = np.clip(protos[picks] + rng.normal(0.0, 0.1, (300, 20)), 0.0, 1.0)
    rbm = classical.rbm_fit(noisy, 6, seed=0, n_epochs=10, learning_rate=0.1)
    errs = np.array(rbm.reconstruction_errors)
    assert len(errs) == 10 and np.all(np.diff(errs) < 0.0)

    assert time.monotonic() - start < 300.0


def _protocol_config(out_dir, seed, hardness):
    """Desk-scale protocol: 2000 training-side and 500 test events, with the
    kernel-classifier subsets capped at 250 training and 250 evaluation."""
    return PipelineConfig(
        seed=seed,
        dataset=DatasetConfig(synthetic_samples=2500, synthetic_hardness=hardness,
                              fractions=(0.72, 0.08, 0.2)),
        reducer=ReducerConfig(method="pca", latent_dim=16, max_epochs=25, patience=6),
        output=OutputConfig(directory=str(out_dir), figures=False, cache=False),
    )


def _null_sigma(n_eval, n_subsets, reps=400):
    """Null std of the subset-mean AUC for label-independent scores."""
    labels = np.tile(np.array([0, 1], dtype=np.uint8), n_eval // 2)
    rng = np.random.default_rng(123)
    means = [subset_uncertainty(labels, rng.normal(size=n_eval), n_subsets)[0]
             for _ in range(reps)]
    return float(np.std(means))


def test_criterion_07_easy_synthetic_benchmark(tmp_path):
    """Full benchmark on the easy synthetic set inside the time budget,
    with the flagship method strong and the linear baseline above chance."""
    start = time.monotonic()
    cfg = _protocol_config(tmp_path, seed=1, hardness=0.0)
    report = pipeline.run_benchmark(cfg, methods=DEFAULT_BENCHMARK)
    elapsed = time.monotonic() - start

    rows = {row["method"]: row for row in report["rows"]}
    assert len(rows) == 11
    failures = {m: r["status"] for m, r in rows.items() if r["status"] != "ok"}
    assert not failures, f"failing methods: {failures}"

    sink = rows["sinkclass-bce"]["auc_mean"]
    assert sink >= 0.90, f"sinkclass-bce auc {sink:.4f}"

    sigma_null = _null_sigma(rows["pca"]["n_qsvm_eval"], cfg.eval.n_subsets)
    floor = 0.5 + 3.0 * sigma_null
    assert rows["pca"]["auc_mean"] >= floor, \
        f"pca auc {rows['pca']['auc_mean']:.4f} vs null floor {floor:.4f}"

    assert (tmp_path / "report.json").exists()
    assert elapsed < 1800.0, f"benchmark took {elapsed:.0f}s"
    print(f"criterion 07: sinkclass-bce {sink:.4f}, pca {rows['pca']['auc_mean']:.4f} "
          f"(null floor {floor:.4f}), wall {elapsed:.0f}s")


def test_criterion_08_method_ordering_soft_check(tmp_path):
    """On the harder synthetic set the joint objective should not trail the
    plain reconstruction baseline by more than 0.05 mean AUC over 3 seeds.
    The ordering itself is stochastic; only a clear reversal blocks release."""
    aucs = {"vanilla": [], "sinkclass-bce": []}
    for seed in (1, 2, 3):
        cfg = _protocol_config(tmp_path / f"seed{seed}", seed=seed, hardness=0.5)
        for method in aucs:
            row = pipeline.run_pipeline(cfg, method, write_artifacts=False)
            assert row["status"] == "ok"
            aucs[method].append(row["auc_mean"])
    gap = float(np.mean(aucs["sinkclass-bce"]) - np.mean(aucs["vanilla"]))
    print(f"criterion 08: sinkclass-bce {np.mean(aucs['sinkclass-bce']):.4f} "
          f"vs vanilla {np.mean(aucs['vanilla']):.4f} (gap {gap:+.4f}; "
          f"soft ordering, release blocks only below -0.05)")
    assert gap >= -0.05, f"ordering clearly reversed: gap {gap:+.4f}"


@pytest.mark.skipif("QRDX_FULL_DATASET" not in os.environ,
                    reason="set QRDX_FULL_DATASET to a stored collision dataset")
def test_criterion_09_full_dataset_track(tmp_path):
    """Published operating points, only reachable with the real dataset."""
    cfg = PipelineConfig(
        seed=1,
        dataset=DatasetConfig(source=os.environ["QRDX_FULL_DATASET"]),
        output=OutputConfig(directory=str(tmp_path), figures=False),
    )
    rbm_auc = pipeline.run_pipeline(cfg, "rbm", write_artifacts=False)["auc_mean"]
    sink_auc = pipeline.run_pipeline(cfg, "sinkclass-bce", write_artifacts=False)["auc_mean"]
    assert abs(rbm_auc - 0.651) <= 0.05
    assert abs(sink_auc - 0.74) <= 0.05


def test_criterion_10_protocol_defaults_echo(tmp_path):
    """The default config announces the benchmark protocol and reports echo it."""
    cfg = PipelineConfig()
    assert cfg.svm.c_grid == (1e-3, 1e-2, 1e-1, 1.0, 10.0)
    assert cfg.eval.qsvm_train == 600
    assert cfg.eval.qsvm_test == 3600
    assert cfg.eval.n_subsets == 5
    assert cfg.reducer.latent_dim == 16
    assert cfg.circuit.n_qubits == 8
    assert CircuitConfig().n_qubits * 2 == cfg.reducer.latent_dim

    report = {"seed": cfg.seed, "config": dataclasses.asdict(cfg), "rows": []}
    pipeline.write_report(report, tmp_path)
    echo = json.loads((tmp_path / "report.json").read_text())["config"]
    assert echo["svm"]["c_grid"] == [1e-3, 1e-2, 1e-1, 1.0, 10.0]
    assert echo["eval"]["qsvm_train"] == 600
    assert echo["eval"]["qsvm_test"] == 3600
    assert echo["eval"]["n_subsets"] == 5
    assert echo["reducer"]["latent_dim"] == 16
