"""Classical reduction methods against independently computed references.

Each method gets an oracle it cannot fake: principal components against a
singular value decomposition, demixing against known sources, factorisation
against a planted low-rank product, embeddings against planted geometry.
"""

import numpy as np
import pytest
from scipy.stats import spearmanr

from qrdx import classical
from qrdx.classical import (
    ica_fit,
    lle_fit,
    load_model,
    nmf_fit,
    pca_fit,
    rbm_fit,
    se_fit,
)
from qrdx.errors import (
    ConvergenceError,
    DomainError,
    RangeError,
    RankError,
    ShapeError,
)
from qrdx.metrics import compute_auc


def _cloud(seed=0, n=120, d=9):
    rng = np.random.default_rng(seed)
    # anisotropic so the spectrum is well separated
    return rng.normal(size=(n, d)) * np.linspace(3.0, 0.3, d)


# --- principal components ----------------------------------------------------


def test_pca_matches_svd():
    x = _cloud()
    model = pca_fit(x, 4)
    centered = x - x.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    assert np.allclose(model.explained_variance, s[:4] ** 2 / x.shape[0], rtol=1e-10)
    # spans agree even if individual signs differ
    p_model = model.components.T @ model.components
    p_svd = vt[:4].T @ vt[:4]
    assert np.abs(p_model - p_svd).max() < 1e-8


def test_pca_variance_is_sorted_and_components_orthonormal():
    model = pca_fit(_cloud(1), 5)
    ev = model.explained_variance
    assert np.all(ev[:-1] >= ev[1:])
    gram = model.components @ model.components.T
    assert np.abs(gram - np.eye(5)).max() < 1e-10


def test_pca_transform_centers():
    x = _cloud(2)
    model = pca_fit(x, 3)
    z = model.transform(x.mean(axis=0, keepdims=True))
    assert np.abs(z).max() < 1e-10
    # projecting the training set gives zero-mean coordinates
    assert np.abs(model.transform(x).mean(axis=0)).max() < 1e-10


def test_pca_sign_convention_is_deterministic():
    a = pca_fit(_cloud(3), 4)
    b = pca_fit(_cloud(3), 4)
    assert np.array_equal(a.components, b.components)
    peaks = np.take_along_axis(
        a.components, np.abs(a.components).argmax(axis=1)[:, None], axis=1
    )
    assert np.all(peaks > 0)


def test_pca_rejects_zero_covariance():
    with pytest.raises(RankError):
        pca_fit(np.ones((10, 4)), 2)


# --- independent components --------------------------------------------------


def _mixed_sources():
    n = 2000
    time = np.linspace(0, 8, n)
    s1 = np.sin(2 * np.pi * time)
    s2 = ((time * 1.7) % 1.0) * 2 - 1  # sawtooth
    sources = np.c_[s1, s2]
    mixing = np.array([[1.0, 0.6], [0.4, 1.0]])
    return sources, sources @ mixing.T


def test_ica_recovers_two_sources():
    sources, mixed = _mixed_sources()
    model = ica_fit(mixed, 2, seed=0)
    assert model.converged
    recovered = model.transform(mixed)
    corr = np.abs(np.corrcoef(recovered.T, sources.T)[:2, 2:])
    # each true source matches one recovered component up to sign
    assert corr.max(axis=0).min() >= 0.99


def test_ica_output_is_decorrelated():
    _, mixed = _mixed_sources()
    rec = ica_fit(mixed, 2, seed=0).transform(mixed)
    cov = np.cov(rec.T)
    assert abs(cov[0, 1]) / np.sqrt(cov[0, 0] * cov[1, 1]) < 0.05


def test_ica_strict_mode_raises_when_budget_exhausted():
    _, mixed = _mixed_sources()
    with pytest.raises(ConvergenceError):
        ica_fit(mixed, 2, seed=0, max_iter=1, strict=True)
    # non-strict returns the flagged model instead
    model = ica_fit(mixed, 2, seed=0, max_iter=1)
    assert not model.converged
    assert model.n_iterations == 1


def test_ica_rejects_rank_deficient_input():
    rng = np.random.default_rng(0)
    line = rng.normal(size=(100, 1)) @ np.array([[1.0, 2.0, 3.0]])
    with pytest.raises(RankError):
        ica_fit(line, 2, seed=0)


# --- locally linear embedding --------------------------------------------------


def test_lle_unrolls_a_curve():
    rng = np.random.default_rng(42)
    t = np.sort(rng.uniform(0, 3, 150))
    curve = np.c_[np.cos(2 * t), np.sin(1.3 * t), t]
    model = lle_fit(curve, 1, n_neighbors=8)
    rho = spearmanr(model.embedding[:, 0], t).statistic
    assert abs(rho) >= 0.95


def test_lle_extension_lands_near_training_neighbours():
    rng = np.random.default_rng(42)
    t = np.sort(rng.uniform(0, 3, 150))
    curve = np.c_[np.cos(2 * t), np.sin(1.3 * t), t]
    model = lle_fit(curve, 1, n_neighbors=8)
    # re-embedding training points reproduces their coordinates closely
    back = model.transform(curve)
    corr = np.corrcoef(back[:, 0], model.embedding[:, 0])[0, 1]
    assert abs(corr) >= 0.99


def test_lle_embedding_is_centered_unit_norm():
    x = _cloud(4, n=80, d=5)
    model = lle_fit(x, 2, n_neighbors=10)
    emb = model.embedding
    # eigenvectors orthogonal to the constant vector have zero mean
    assert np.abs(emb.mean(axis=0)).max() < 1e-8
    assert np.allclose((emb**2).sum(axis=0), 1.0)


def test_lle_neighbour_count_bounds():
    x = _cloud(5, n=20, d=4)
    with pytest.raises(DomainError):
        lle_fit(x, 2, n_neighbors=20)
    with pytest.raises(DomainError):
        lle_fit(x, 2, n_neighbors=0)
    with pytest.raises(DomainError):
        lle_fit(x, 19, n_neighbors=5)


# --- spectral embedding ---------------------------------------------------------


def _two_blobs(seed=7):
    rng = np.random.default_rng(seed)
    a = rng.normal(0, 0.3, (60, 5))
    b = rng.normal(3, 0.3, (60, 5))
    labels = np.array([0] * 60 + [1] * 60, dtype=np.uint8)
    return np.vstack([a, b]), labels, rng


def test_se_first_coordinate_separates_blobs():
    x, y, _ = _two_blobs()
    model = se_fit(x, 2, n_neighbors=10)
    auc = compute_auc(y, model.embedding[:, 0])
    assert max(auc, 1.0 - auc) == 1.0


def test_se_extension_classifies_held_out_points():
    x, y, rng = _two_blobs()
    model = se_fit(x, 2, n_neighbors=10)
    new = np.vstack([rng.normal(0, 0.3, (20, 5)), rng.normal(3, 0.3, (20, 5))])
    y_new = np.array([0] * 20 + [1] * 20, dtype=np.uint8)
    auc = compute_auc(y_new, model.transform(new)[:, 0])
    assert max(auc, 1.0 - auc) == 1.0


def test_se_spectrum_properties():
    x = _cloud(6, n=70, d=4)
    model = se_fit(x, 3, n_neighbors=8)
    ev = model.eigenvalues
    # random-walk Laplacian spectrum lives in [0, 2]; kept values are sorted
    assert np.all(ev >= 0.0) and np.all(ev <= 2.0)
    assert np.all(np.diff(ev) >= -1e-12)
    assert np.all(model.degrees >= model.n_neighbors)


def test_se_validates_arguments():
    x = _cloud(6, n=20, d=4)
    with pytest.raises(DomainError):
        se_fit(x, 2, n_neighbors=0)
    with pytest.raises(DomainError):
        se_fit(x, 20, n_neighbors=5)


# --- non-negative factorisation -------------------------------------------------


def test_nmf_recovers_planted_rank_two():
    # this instance's basin reaches the global optimum; others stall higher
    rng = np.random.default_rng(2)
    w0 = rng.uniform(0.1, 1, (40, 2))
    h0 = rng.uniform(0.1, 1, (2, 12))
    model = nmf_fit(w0 @ h0, 2, l1_strength=0.0, max_iter=4000, tol=0.0)
    assert model.objective_history[-1] < 1e-6


def test_nmf_objective_never_increases():
    rng = np.random.default_rng(3)
    v = rng.uniform(0, 2, (50, 12))
    model = nmf_fit(v, 4, max_iter=200)
    hist = np.array(model.objective_history)
    assert np.all(np.diff(hist) <= 1e-9 * np.maximum(np.abs(hist[:-1]), 1.0))


def test_nmf_objective_improves_with_rank():
    rng = np.random.default_rng(4)
    v = rng.uniform(0, 2, (60, 15))
    obj = [
        nmf_fit(v, k, l1_strength=0.0, max_iter=300, tol=0.0).objective_history[-1]
        for k in (2, 5, 9)
    ]
    assert obj[0] > obj[1] > obj[2]


def test_nmf_rejects_negative_input():
    with pytest.raises(DomainError):
        nmf_fit(np.array([[1.0, -0.1], [0.5, 0.2]]), 1)
    model = nmf_fit(np.random.default_rng(0).uniform(0, 1, (20, 6)), 2)
    with pytest.raises(DomainError):
        model.transform(np.full((3, 6), -1.0))


def test_nmf_transform_reconstructs():
    rng = np.random.default_rng(2)
    w0 = rng.uniform(0.1, 1, (40, 2))
    h0 = rng.uniform(0.1, 1, (2, 12))
    v = w0 @ h0
    model = nmf_fit(v, 2, l1_strength=0.0, max_iter=4000, tol=0.0)
    recon = model.transform(v) @ model.basis.T
    assert np.linalg.norm(v - recon) / np.linalg.norm(v) < 1e-3


# --- restricted Boltzmann machine ------------------------------------------------


def _prototype_data(seed=5):
    rng = np.random.default_rng(seed)
    proto = (rng.uniform(0, 1, (2, 20)) > 0.5).astype(float)
    idx = rng.integers(0, 2, 300)
    return np.clip(proto[idx] + rng.normal(0, 0.1, (300, 20)), 0, 1)


def test_rbm_reconstruction_error_strictly_decreases():
    x = _prototype_data()
    model = rbm_fit(x, 6, seed=0, n_epochs=15, learning_rate=0.1)
    errs = np.array(model.reconstruction_errors)
    assert len(errs) == 15
    assert np.all(np.diff(errs) < 0)


def test_rbm_is_bit_reproducible():
    x = _prototype_data()
    a = rbm_fit(x, 4, seed=9, n_epochs=3)
    b = rbm_fit(x, 4, seed=9, n_epochs=3)
    assert np.array_equal(a.weights, b.weights)
    assert np.array_equal(a.visible_bias, b.visible_bias)
    c = rbm_fit(x, 4, seed=10, n_epochs=3)
    assert not np.array_equal(a.weights, c.weights)


def test_rbm_transform_is_a_probability():
    x = _prototype_data()
    model = rbm_fit(x, 4, seed=0, n_epochs=2)
    h = model.transform(x)
    assert np.all(h > 0.0) and np.all(h < 1.0)


def test_rbm_rejects_unscaled_input():
    with pytest.raises(RangeError):
        rbm_fit(np.array([[0.2, 1.4], [0.1, 0.5]]), 2)
    with pytest.raises(RangeError):
        rbm_fit(np.array([[-0.2, 0.4], [0.1, 0.5]]), 2)


# --- persistence -----------------------------------------------------------------


@pytest.mark.parametrize("kind", ["pca", "ica", "lle", "se", "nmf", "rbm"])
def test_model_round_trip(kind, tmp_path):
    rng = np.random.default_rng(8)
    x = rng.uniform(0.05, 0.95, (60, 6))
    fit = {
        "pca": lambda: pca_fit(x, 3),
        "ica": lambda: ica_fit(x, 3, seed=0),
        "lle": lambda: lle_fit(x, 2, n_neighbors=7),
        "se": lambda: se_fit(x, 2, n_neighbors=7),
        "nmf": lambda: nmf_fit(x, 3, max_iter=50),
        "rbm": lambda: rbm_fit(x, 3, seed=0, n_epochs=2),
    }[kind]
    model = fit()
    path = tmp_path / f"{kind}.qrdx"
    model.save(path)
    back = load_model(path)
    assert type(back) is type(model)
    probe = rng.uniform(0.05, 0.95, (5, 6))
    assert np.array_equal(model.transform(probe), back.transform(probe))


def test_model_transform_width_checks():
    x = np.random.default_rng(1).uniform(0.1, 0.9, (40, 5))
    for model in (
        pca_fit(x, 2),
        ica_fit(x, 2, seed=0),
        lle_fit(x, 2, n_neighbors=6),
        se_fit(x, 2, n_neighbors=6),
        nmf_fit(x, 2, max_iter=30),
        rbm_fit(x, 2, seed=0, n_epochs=1),
    ):
        with pytest.raises(ShapeError):
            model.transform(np.zeros((3, 7)))


def test_load_model_rejects_unknown_tag(tmp_path):
    from qrdx import dataio

    p = tmp_path / "odd.qrdx"
    dataio.write_blob(p, "mystery", {"w": np.ones(3)})
    with pytest.raises(DomainError):
        load_model(p)
