"""Classical dimensionality reducers.

Six methods sharing one convention: fit on an M x D training matrix,
produce a model whose transform maps rows to an M x d latent matrix.
The two purely transductive methods (locally linear embedding, spectral
embedding) keep their fitted training coordinates and extend to new points
through local weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dataio
from .errors import (
    ConvergenceError,
    DegenerateNeighborhoodError,
    DomainError,
    RangeError,
    RankError,
    ShapeError,
)

EPS = np.finfo(np.float64).eps


def _as_matrix(values) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ShapeError(f"need a non-empty 2-d matrix, got shape {x.shape}")
    return x


def _fix_signs(vectors: np.ndarray, axis_rows: bool) -> np.ndarray:
    """Flip each component so its largest-magnitude entry is positive."""
    v = vectors.copy()
    if axis_rows:
        for i in range(v.shape[0]):
            j = np.argmax(np.abs(v[i]))
            if v[i, j] < 0:
                v[i] = -v[i]
    else:
        for j in range(v.shape[1]):
            i = np.argmax(np.abs(v[:, j]))
            if v[i, j] < 0:
                v[:, j] = -v[:, j]
    return v


def _pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d2 = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * (a @ b.T)
    return np.maximum(d2, 0.0)


def _knn_indices(d2: np.ndarray, k: int, exclude_self: bool) -> np.ndarray:
    """k smallest per row with deterministic tie-breaking by index."""
    d2 = d2.copy()
    if exclude_self:
        np.fill_diagonal(d2, np.inf)
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


# --- principal components --------------------------------------------------

@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (d, D) rows are eigenvectors
    explained_variance: np.ndarray

    def transform(self, values) -> np.ndarray:
        x = _as_matrix(values)
        if x.shape[1] != self.mean.shape[0]:
            raise ShapeError("width mismatch with fitted model")
        return (x - self.mean) @ self.components.T

    def save(self, path) -> None:
        dataio.write_blob(path, "pca", {
            "mean": self.mean,
            "components": self.components,
            "explained_variance": self.explained_variance,
        })


def pca_fit(values, n_components: int) -> PcaModel:
    """Exact principal components via eigendecomposition of the covariance.

    The covariance uses the 1/M convention. Components are ordered by
    descending eigenvalue, with signs fixed so each row's largest-magnitude
    entry is positive.
    """
    x = _as_matrix(values)
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / x.shape[0]
    if not np.any(cov):
        raise RankError("covariance is identically zero")
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals, kind="stable")[::-1][:n_components]
    components = _fix_signs(evecs[:, order].T, axis_rows=True)
    return PcaModel(mean, components, np.maximum(evals[order], 0.0))


# --- independent components -------------------------------------------------

@dataclass
class IcaModel:
    mean: np.ndarray
    whitening: np.ndarray   # (d, D)
    unmixing: np.ndarray    # (d, d), orthogonal in whitened space
    converged: bool
    n_iterations: int

    @property
    def components(self) -> np.ndarray:
        return self.unmixing @ self.whitening

    def transform(self, values) -> np.ndarray:
        x = _as_matrix(values)
        if x.shape[1] != self.mean.shape[0]:
            raise ShapeError("width mismatch with fitted model")
        return (x - self.mean) @ self.components.T

    def save(self, path) -> None:
        dataio.write_blob(path, "ica", {
            "mean": self.mean,
            "whitening": self.whitening,
            "unmixing": self.unmixing,
            "converged": np.float64(self.converged),
            "n_iterations": np.float64(self.n_iterations),
        })


def _sym_decorrelate(w: np.ndarray) -> np.ndarray:
    s, u = np.linalg.eigh(w @ w.T)
    if s.min() <= EPS:
        raise RankError("unmixing matrix became singular during decorrelation")
    return (u / np.sqrt(s)) @ u.T @ w


def ica_fit(values, n_components: int, seed: int = 0, max_iter: int = 200,
            tol: float = 1e-4, strict: bool = False) -> IcaModel:
    """Fixed-point independent component analysis with the cubic contrast.

    Data are whitened through the top principal components, then the square
    unmixing matrix is iterated with g(u) = u^3 and symmetrically
    decorrelated each step. Stops when every direction's alignment with its
    previous value is within tol of unity. A run that exhausts max_iter is
    returned flagged unless strict is set, in which case it raises
    ConvergenceError.
    """
    x = _as_matrix(values)
    m = x.shape[0]
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / m
    if not np.any(cov):
        raise RankError("covariance is identically zero")
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals, kind="stable")[::-1][:n_components]
    lead = evals[order]
    if lead.min() <= EPS:
        raise RankError("data rank below the requested number of components")
    whitening = (evecs[:, order] / np.sqrt(lead)).T
    z = centered @ whitening.T  # unit covariance

    rng = np.random.default_rng(np.random.SeedSequence([0x1CA, seed]))
    w = _sym_decorrelate(rng.normal(size=(n_components, n_components)))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        proj = z @ w.T
        g = proj**3
        g_prime_mean = (3.0 * proj**2).mean(axis=0)
        w_new = _sym_decorrelate(g.T @ z / m - g_prime_mean[:, None] * w)
        # alignment of each new direction with its previous self
        delta = np.max(np.abs(np.abs(np.sum(w_new * w, axis=1)) - 1.0))
        w = w_new
        if delta < tol:
            converged = True
            break
    if not converged and strict:
        raise ConvergenceError(f"no fixed point after {max_iter} iterations")
    return IcaModel(mean, whitening, w, converged, it)


# --- locally linear embedding ------------------------------------------------

@dataclass
class LleModel:
    n_neighbors: int
    reg_scale: float
    training_points: np.ndarray
    embedding: np.ndarray

    def transform(self, values) -> np.ndarray:
        """Embed new points as the weighted combination of their neighbours'
        fitted coordinates, with weights solved the same way as in fit."""
        x = _as_matrix(values)
        if x.shape[1] != self.training_points.shape[1]:
            raise ShapeError("width mismatch with fitted model")
        d2 = _pairwise_sq_dists(x, self.training_points)
        nbrs = np.argsort(d2, axis=1, kind="stable")[:, : self.n_neighbors]
        out = np.empty((x.shape[0], self.embedding.shape[1]))
        for i in range(x.shape[0]):
            w = _local_weights(x[i], self.training_points[nbrs[i]], self.reg_scale)
            out[i] = w @ self.embedding[nbrs[i]]
        return out

    def save(self, path) -> None:
        dataio.write_blob(path, "lle", {
            "n_neighbors": np.float64(self.n_neighbors),
            "reg_scale": np.float64(self.reg_scale),
            "training_points": self.training_points,
            "embedding": self.embedding,
        })


def _local_weights(point: np.ndarray, neighbours: np.ndarray, reg_scale: float) -> np.ndarray:
    diff = point[None, :] - neighbours
    gram = diff @ diff.T
    k = neighbours.shape[0]
    trace = np.trace(gram)
    gram = gram + np.eye(k) * (reg_scale * trace / k if trace > 0.0 else reg_scale)
    try:
        w = np.linalg.solve(gram, np.ones(k))
    except np.linalg.LinAlgError as exc:
        raise DegenerateNeighborhoodError(f"singular local Gram matrix: {exc}") from None
    total = w.sum()
    if abs(total) < EPS:
        raise DegenerateNeighborhoodError("local weights sum to zero")
    return w / total


def lle_fit(values, n_components: int, n_neighbors: int = 12,
            reg_scale: float = 1e-3) -> LleModel:
    """Locally linear embedding with regularised reconstruction weights.

    Each point is written as an affine combination of its k nearest
    neighbours; the embedding consists of the bottom eigenvectors of
    (I - W)^T (I - W), skipping the constant one.
    """
    x = _as_matrix(values)
    m = x.shape[0]
    if n_neighbors < 1 or n_neighbors >= m:
        raise DomainError(f"n_neighbors must be in [1, {m - 1}]")
    if n_components >= m - 1:
        raise DomainError("n_components too large for the sample count")
    nbrs = _knn_indices(_pairwise_sq_dists(x, x), n_neighbors, exclude_self=True)
    w = np.zeros((m, m))
    for i in range(m):
        w[i, nbrs[i]] = _local_weights(x[i], x[nbrs[i]], reg_scale)
    delta = np.eye(m) - w
    quad = delta.T @ delta
    evals, evecs = np.linalg.eigh(quad)
    order = np.argsort(evals, kind="stable")
    keep = order[1 : n_components + 1]  # drop the constant bottom eigenvector
    embedding = _fix_signs(evecs[:, keep], axis_rows=False)
    return LleModel(n_neighbors, reg_scale, x.copy(), embedding)


# --- spectral embedding -------------------------------------------------------

@dataclass
class SeModel:
    n_neighbors: int
    training_points: np.ndarray
    embedding: np.ndarray
    eigenvalues: np.ndarray
    degrees: np.ndarray

    def transform(self, values) -> np.ndarray:
        """Nystroem-style extension: average the fitted coordinates of the k
        nearest training points and rescale by 1/(1 - eigenvalue)."""
        x = _as_matrix(values)
        if x.shape[1] != self.training_points.shape[1]:
            raise ShapeError("width mismatch with fitted model")
        d2 = _pairwise_sq_dists(x, self.training_points)
        nbrs = np.argsort(d2, axis=1, kind="stable")[:, : self.n_neighbors]
        mean_coords = self.embedding[nbrs].mean(axis=1)
        scale = 1.0 - self.eigenvalues
        scale = np.where(np.abs(scale) < 1e-8, 1.0, scale)
        return mean_coords / scale

    def save(self, path) -> None:
        dataio.write_blob(path, "se", {
            "n_neighbors": np.float64(self.n_neighbors),
            "training_points": self.training_points,
            "embedding": self.embedding,
            "eigenvalues": self.eigenvalues,
            "degrees": self.degrees,
        })


def se_fit(values, n_components: int, n_neighbors: int = 9) -> SeModel:
    """Spectral embedding of the symmetrised binary k-nearest-neighbour graph.

    The graph joins i and j when either lists the other among its k nearest.
    Coordinates are eigenvectors of the random-walk Laplacian I - D^-1 W for
    the smallest eigenvalues, skipping the trivial one at zero; they are
    obtained from the symmetric normalised Laplacian and mapped back, which
    keeps the solve stable. A disconnected graph is fine: the Laplacian is
    block diagonal and the spectrum is the union of the blocks' spectra.
    """
    x = _as_matrix(values)
    m = x.shape[0]
    if n_neighbors < 1 or n_neighbors >= m:
        raise DomainError(f"n_neighbors must be in [1, {m - 1}]")
    if n_components >= m:
        raise DomainError("n_components too large for the sample count")
    nbrs = _knn_indices(_pairwise_sq_dists(x, x), n_neighbors, exclude_self=True)
    adj = np.zeros((m, m))
    rows = np.repeat(np.arange(m), n_neighbors)
    adj[rows, nbrs.ravel()] = 1.0
    adj = np.maximum(adj, adj.T)  # union symmetrisation, binary weights
    degrees = adj.sum(axis=1)  # >= n_neighbors, never zero
    inv_sqrt = 1.0 / np.sqrt(degrees)
    lap_sym = np.eye(m) - (inv_sqrt[:, None] * adj) * inv_sqrt[None, :]
    evals, evecs = np.linalg.eigh(lap_sym)
    order = np.argsort(evals, kind="stable")
    keep = order[1 : n_components + 1]
    # eigenvectors of the random-walk Laplacian share eigenvalues with the
    # symmetric one under u = D^-1/2 v
    embedding = _fix_signs(inv_sqrt[:, None] * evecs[:, keep], axis_rows=False)
    return SeModel(n_neighbors, x.copy(), embedding, np.maximum(evals[keep], 0.0), degrees)


# --- non-negative matrix factorisation ----------------------------------------

@dataclass
class NmfModel:
    basis: np.ndarray  # (D, d)
    l1_strength: float
    max_iter: int
    tol: float
    objective_history: list = field(default_factory=list)

    def transform(self, values) -> np.ndarray:
        """Solve for the weights of new samples with the basis held fixed."""
        x = _as_matrix(values)
        if x.shape[1] != self.basis.shape[0]:
            raise ShapeError("width mismatch with fitted model")
        if np.any(x < 0.0):
            raise DomainError("non-negative input required")
        v = x.T
        d = self.basis.shape[1]
        h = np.full((d, v.shape[1]), max(v.mean(), EPS) / d)
        col_sums = self.basis.sum(axis=0)[:, None]
        prev = _kl_objective(v, self.basis, h) + self.l1_strength * h.sum()
        for _ in range(self.max_iter):
            wh = self.basis @ h + EPS
            h *= (self.basis.T @ (v / wh)) / (col_sums + self.l1_strength)
            h = np.maximum(h, EPS)
            obj = _kl_objective(v, self.basis, h) + self.l1_strength * h.sum()
            if abs(prev - obj) <= self.tol * max(abs(prev), EPS):
                break
            prev = obj
        return h.T

    def save(self, path) -> None:
        dataio.write_blob(path, "nmf", {
            "basis": self.basis,
            "l1_strength": np.float64(self.l1_strength),
            "max_iter": np.float64(self.max_iter),
            "tol": np.float64(self.tol),
        })


def _kl_objective(v: np.ndarray, w: np.ndarray, h: np.ndarray) -> float:
    wh = w @ h + EPS
    log_term = np.where(v > 0.0, v * np.log(np.maximum(v, EPS) / wh), 0.0)
    return float(log_term.sum() - v.sum() + wh.sum())


def _nndsvda_init(v: np.ndarray, d: int):
    """Non-negative double SVD initialisation, zeros filled with the mean."""
    u, s, vt = np.linalg.svd(v, full_matrices=False)
    w = np.zeros((v.shape[0], d))
    h = np.zeros((d, v.shape[1]))
    w[:, 0] = np.sqrt(s[0]) * np.abs(u[:, 0])
    h[0, :] = np.sqrt(s[0]) * np.abs(vt[0, :])
    for j in range(1, min(d, s.size)):
        uj, vj = u[:, j], vt[j, :]
        up, un = np.maximum(uj, 0.0), np.maximum(-uj, 0.0)
        vp, vn = np.maximum(vj, 0.0), np.maximum(-vj, 0.0)
        pos = np.linalg.norm(up) * np.linalg.norm(vp)
        neg = np.linalg.norm(un) * np.linalg.norm(vn)
        if pos >= neg:
            scale, uu, vv = pos, up, vp
        else:
            scale, uu, vv = neg, un, vn
        if scale > 0.0:
            w[:, j] = np.sqrt(s[j] * scale) * uu / np.linalg.norm(uu)
            h[j, :] = np.sqrt(s[j] * scale) * vv / np.linalg.norm(vv)
    fill = max(v.mean(), EPS)
    w[w < EPS] = fill
    h[h < EPS] = fill
    return w, h


def nmf_fit(values, n_components: int, l1_strength: float = 1e-4,
            max_iter: int = 500, tol: float = 1e-6) -> NmfModel:
    """Non-negative factorisation under the generalised KL objective.

    Multiplicative updates with an L1 term on both factors; initialisation is
    the NNDSVD variant that fills zeros with the data mean. Stops after
    max_iter updates or when the relative objective change drops below tol.
    The recorded objective (KL plus L1 penalty) never increases.
    """
    x = _as_matrix(values)
    if np.any(x < 0.0):
        raise DomainError("non-negative input required")
    v = x.T
    w, h = _nndsvda_init(v, n_components)
    penalty = lambda: l1_strength * (w.sum() + h.sum())
    history = [_kl_objective(v, w, h) + penalty()]
    for _ in range(max_iter):
        wh = w @ h + EPS
        w *= ((v / wh) @ h.T) / (h.sum(axis=1)[None, :] + l1_strength)
        w = np.maximum(w, EPS)
        wh = w @ h + EPS
        h *= (w.T @ (v / wh)) / (w.sum(axis=0)[:, None] + l1_strength)
        h = np.maximum(h, EPS)
        history.append(_kl_objective(v, w, h) + penalty())
        if abs(history[-2] - history[-1]) <= tol * max(abs(history[-2]), EPS):
            break
    model = NmfModel(w, l1_strength, max_iter, tol, history)
    return model


# --- restricted Boltzmann machine ----------------------------------------------

@dataclass
class RbmModel:
    weights: np.ndarray       # (D, H)
    visible_bias: np.ndarray  # (D,)
    hidden_bias: np.ndarray   # (H,)
    reconstruction_errors: list = field(default_factory=list)

    def transform(self, values) -> np.ndarray:
        """Hidden-unit activation probabilities, strictly inside (0, 1)."""
        x = _as_matrix(values)
        if x.shape[1] != self.weights.shape[0]:
            raise ShapeError("width mismatch with fitted model")
        return _sigmoid(x @ self.weights + self.hidden_bias)

    def save(self, path) -> None:
        dataio.write_blob(path, "rbm", {
            "weights": self.weights,
            "visible_bias": self.visible_bias,
            "hidden_bias": self.hidden_bias,
        })


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def rbm_fit(values, n_hidden: int, seed: int = 0, learning_rate: float = 0.05,
            batch_size: int = 100, n_epochs: int = 10) -> RbmModel:
    """Bernoulli restricted Boltzmann machine trained by persistent
    contrastive divergence with a single Gibbs step per update.

    Visible units consume values in [0, 1]. The negative phase keeps a
    persistent fantasy batch; hidden states are sampled binary while the
    visible reconstruction stays a probability. Gradients average over the
    minibatch. Per-epoch mean squared reconstruction error is recorded.
    """
    x = _as_matrix(values)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise RangeError("visible units must lie in [0, 1]")
    m, d = x.shape
    rng = np.random.default_rng(np.random.SeedSequence([0x4B7, seed]))
    w = rng.normal(0.0, 0.01, size=(d, n_hidden))
    bv = np.zeros(d)
    bh = np.zeros(n_hidden)
    chain = (rng.random((min(batch_size, m), d)) < 0.5).astype(np.float64)

    errors = []
    for _ in range(n_epochs):
        order = rng.permutation(m)
        for start in range(0, m, batch_size):
            batch = x[order[start : start + batch_size]]
            b = batch.shape[0]
            h_data = _sigmoid(batch @ w + bh)
            # one persistent Gibbs step: sample hiddens, reconstruct visibles
            h_chain = _sigmoid(chain[:b] @ w + bh)
            h_sample = (rng.random(h_chain.shape) < h_chain).astype(np.float64)
            v_model = _sigmoid(h_sample @ w.T + bv)
            h_model = _sigmoid(v_model @ w + bh)
            w += learning_rate * (batch.T @ h_data - v_model.T @ h_model) / b
            bv += learning_rate * (batch - v_model).mean(axis=0)
            bh += learning_rate * (h_data - h_model).mean(axis=0)
            chain[:b] = v_model
        recon = _sigmoid(_sigmoid(x @ w + bh) @ w.T + bv)
        errors.append(float(((x - recon) ** 2).mean()))
    return RbmModel(w, bv, bh, errors)


# --- loading ---------------------------------------------------------------

def load_model(path):
    """Reconstruct any fitted classical model from its blob file."""
    tag, a = dataio.read_blob(path)
    if tag == "pca":
        return PcaModel(a["mean"], a["components"], a["explained_variance"])
    if tag == "ica":
        return IcaModel(a["mean"], a["whitening"], a["unmixing"],
                        bool(a["converged"]), int(a["n_iterations"]))
    if tag == "lle":
        return LleModel(int(a["n_neighbors"]), float(a["reg_scale"]),
                        a["training_points"], a["embedding"])
    if tag == "se":
        return SeModel(int(a["n_neighbors"]), a["training_points"],
                       a["embedding"], a["eigenvalues"], a["degrees"])
    if tag == "nmf":
        return NmfModel(a["basis"], float(a["l1_strength"]),
                        int(a["max_iter"]), float(a["tol"]))
    if tag == "rbm":
        return RbmModel(a["weights"], a["visible_bias"], a["hidden_bias"])
    raise DomainError(f"unknown model tag {tag!r}")
