"""Autoencoder family: vanilla, variational, classifier-guided, and the two
generator-matched variants trained against the Sinkhorn divergence.

All five share the same encoder/decoder trunk widths. Training is plain
minibatch Adam on hand-written gradients; every random draw (init, shuffle,
reparameterisation and generator noise) comes from per-purpose child streams
of the config seed, so runs are bit-reproducible and architectures that
share components draw identical initial weights for the same seed.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import FeatureMatrix
from .errors import DivergenceError, DomainError, IoError, RangeError, ShapeError
from .losses import bce_loss, kl_standard_normal, mse_loss
from .network import Adam, DenseNetwork, add_grads, backward, forward, load_network, save_network
from .sinkhorn import SinkhornConfig, sinkhorn_divergence

ARCHITECTURES = ("vanilla", "vae", "classifier", "sinkhorn", "sinkclass")

ENCODER_HIDDEN = (64, 52, 44, 32, 24)
DECODER_HIDDEN = (24, 32, 44, 52, 64)
VAE_TRUNK = (64, 52, 44, 32)
CLASSIFIER_HIDDEN = (128, 64, 32, 16, 8)
GAUSS_BRANCH = (64, 128)
LABEL_BRANCH = (64,)
MERGE_HIDDEN = (256, 192)

# fixed child-stream layout of the config seed; shared components must keep
# their index so e.g. sinkclass with zero weights replays the vanilla run
_STREAMS = ("encoder", "decoder", "classifier", "gen_gauss", "gen_label",
            "gen_merge", "mu_head", "logvar_head", "shuffle", "noise")


@dataclass(frozen=True)
class TrainConfig:
    architecture: str
    learning_rate: float = 0.0012
    batch_size: int = 128
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0
    latent_dim: int = 16
    kl_weight: float = 0.0
    classifier_weight: float = 0.0
    sinkhorn_weight: float = 0.0
    condition_on_labels: bool = True
    convex_mse: bool = False
    # batch-sized overlapping clouds converge slowly at small epsilon, so
    # training runs at a warmer temperature with a looser certificate than
    # the standalone divergence default
    sinkhorn: SinkhornConfig = field(
        default_factory=lambda: SinkhornConfig(epsilon=0.1, max_iterations=1000,
                                               tolerance=1e-3, anneal=True))

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise DomainError(f"unknown architecture {self.architecture!r}")
        for name in ("kl_weight", "classifier_weight", "sinkhorn_weight"):
            if getattr(self, name) < 0.0:
                raise DomainError(f"{name} must be non-negative")

    def component_weights(self) -> dict:
        """Map loss component -> weight in the training total."""
        a = self.architecture
        if a == "vanilla":
            return {"mse": 1.0}
        if a == "vae":
            return {"mse": 1.0 - self.kl_weight, "kl": self.kl_weight}
        if a == "classifier":
            return {"mse": 1.0 - self.classifier_weight, "bce": self.classifier_weight}
        if a == "sinkhorn":
            return {"mse": 1.0 - self.sinkhorn_weight, "sinkhorn": self.sinkhorn_weight}
        mse_w = (1.0 - self.sinkhorn_weight - self.classifier_weight
                 if self.convex_mse else 1.0)
        return {"mse": mse_w, "sinkhorn": self.sinkhorn_weight,
                "bce": self.classifier_weight}


def default_config(architecture: str, optimise: str = "bce", **overrides) -> TrainConfig:
    """Published training defaults per architecture.

    ``optimise`` picks the loss-weight operating point for the two
    architectures that were tuned separately for reconstruction ("mse") and
    classification ("bce").
    """
    if optimise not in ("bce", "mse"):
        raise DomainError("optimise must be 'bce' or 'mse'")
    base = {
        "vanilla": dict(learning_rate=0.0012),
        "vae": dict(learning_rate=0.001, kl_weight=0.0005),
        "classifier": dict(learning_rate=0.001,
                           classifier_weight=0.6 if optimise == "bce" else 3e-5),
        "sinkhorn": dict(learning_rate=0.001, sinkhorn_weight=0.06),
        "sinkclass": dict(learning_rate=0.001,
                          sinkhorn_weight=0.2 if optimise == "bce" else 0.0008,
                          classifier_weight=0.02 if optimise == "bce" else 0.9),
    }
    if architecture not in base:
        raise DomainError(f"unknown architecture {architecture!r}")
    kwargs = base[architecture]
    kwargs.update(overrides)
    return TrainConfig(architecture=architecture, **kwargs)


def _build_nets(cfg: TrainConfig, input_dim: int) -> dict:
    streams = {name: np.random.default_rng(ss) for name, ss in
               zip(_STREAMS, np.random.SeedSequence([0xAE, cfg.seed]).spawn(len(_STREAMS)))}
    d, k = input_dim, cfg.latent_dim
    nets = {}
    if cfg.architecture == "vae":
        nets["trunk"] = DenseNetwork.create(
            [d, *VAE_TRUNK], ["elu"] * len(VAE_TRUNK), streams["encoder"])
        nets["mu_head"] = DenseNetwork.create(
            [VAE_TRUNK[-1], k], ["linear"], streams["mu_head"])
        nets["logvar_head"] = DenseNetwork.create(
            [VAE_TRUNK[-1], k], ["linear"], streams["logvar_head"])
    else:
        nets["encoder"] = DenseNetwork.create(
            [d, *ENCODER_HIDDEN, k], ["elu"] * len(ENCODER_HIDDEN) + ["linear"],
            streams["encoder"])
    nets["decoder"] = DenseNetwork.create(
        [k, *DECODER_HIDDEN, d], ["elu"] * len(DECODER_HIDDEN) + ["sigmoid"],
        streams["decoder"])
    if cfg.architecture in ("classifier", "sinkclass"):
        nets["classifier"] = DenseNetwork.create(
            [k, *CLASSIFIER_HIDDEN, 1], ["elu"] * len(CLASSIFIER_HIDDEN) + ["sigmoid"],
            streams["classifier"])
    if cfg.architecture in ("sinkhorn", "sinkclass"):
        nets["gen_gauss"] = DenseNetwork.create(
            [k, *GAUSS_BRANCH], ["elu"] * len(GAUSS_BRANCH), streams["gen_gauss"])
        merge_in = GAUSS_BRANCH[-1]
        if cfg.condition_on_labels:
            nets["gen_label"] = DenseNetwork.create(
                [1, *LABEL_BRANCH], ["elu"] * len(LABEL_BRANCH), streams["gen_label"])
            merge_in += LABEL_BRANCH[-1]
        nets["gen_merge"] = DenseNetwork.create(
            [merge_in, *MERGE_HIDDEN, k], ["elu"] * len(MERGE_HIDDEN) + ["linear"],
            streams["gen_merge"])
    return nets, streams


class AutoencoderModel:
    """A trained autoencoder with its component networks."""

    def __init__(self, config: TrainConfig, nets: dict, history: list,
                 best_epoch: int):
        self.config = config
        self.architecture = config.architecture
        self.nets = nets
        self.history = history
        self.best_epoch = best_epoch

    def reduce(self, values) -> np.ndarray:
        """Deterministic latent representation (the mean head for the VAE)."""
        x = np.asarray(values, dtype=np.float64)
        if self.architecture == "vae":
            trunk = forward(self.nets["trunk"], x).outputs
            return forward(self.nets["mu_head"], trunk).outputs
        return forward(self.nets["encoder"], x).outputs

    def reconstruct(self, values) -> np.ndarray:
        return forward(self.nets["decoder"], self.reduce(values)).outputs

    def classify(self, values) -> np.ndarray:
        if "classifier" not in self.nets:
            raise DomainError(f"{self.architecture} has no classifier head")
        return forward(self.nets["classifier"], self.reduce(values)).outputs[:, 0]

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        meta = {
            "config": _config_to_dict(self.config),
            "history": self.history,
            "best_epoch": self.best_epoch,
            "nets": list(self.nets),
        }
        try:
            (directory / "meta.json").write_text(json.dumps(meta, indent=1))
        except OSError as exc:
            raise IoError(f"cannot write {directory}: {exc}") from exc
        for name, net in self.nets.items():
            save_network(net, directory / f"{name}.qrdn")


def _config_to_dict(cfg: TrainConfig) -> dict:
    out = dataclasses.asdict(cfg)
    return out


def load_autoencoder(directory) -> AutoencoderModel:
    directory = Path(directory)
    meta_path = directory / "meta.json"
    if not meta_path.exists():
        raise IoError(f"no such model directory: {directory}")
    meta = json.loads(meta_path.read_text())
    cfg_dict = dict(meta["config"])
    cfg_dict["sinkhorn"] = SinkhornConfig(**cfg_dict["sinkhorn"])
    cfg = TrainConfig(**cfg_dict)
    nets = {name: load_network(directory / f"{name}.qrdn") for name in meta["nets"]}
    return AutoencoderModel(cfg, nets, meta["history"], meta["best_epoch"])


def _batch_pass(nets, cfg: TrainConfig, xb, yb, noise_rng, with_grads: bool):
    """One forward (and optionally backward) pass on a batch.

    Returns (components, grads) where components maps loss names to
    unweighted scalars and grads maps net names to per-layer gradients.
    """
    weights = cfg.component_weights()
    comps, grads = {}, {}

    # encode
    if cfg.architecture == "vae":
        fp_trunk = forward(nets["trunk"], xb)
        fp_mu = forward(nets["mu_head"], fp_trunk.outputs)
        fp_lv = forward(nets["logvar_head"], fp_trunk.outputs)
        mu, logvar = fp_mu.outputs, fp_lv.outputs
        sigma = np.exp(0.5 * logvar)
        xi = noise_rng.normal(size=mu.shape)
        z = mu + sigma * xi
    else:
        fp_enc = forward(nets["encoder"], xb)
        z = fp_enc.outputs

    fp_dec = forward(nets["decoder"], z)
    comps["mse"], grad_recon = mse_loss(xb, fp_dec.outputs)

    if "classifier" in nets:
        fp_cls = forward(nets["classifier"], z)
        comps["bce"], grad_prob = bce_loss(yb, fp_cls.outputs)

    if cfg.architecture == "vae":
        comps["kl"], grad_kl_mu, grad_kl_sigma = kl_standard_normal(mu, sigma)

    gen_active = "gen_merge" in nets and weights.get("sinkhorn", 0.0) > 0.0
    if gen_active:
        xi_gen = noise_rng.normal(size=(xb.shape[0], cfg.latent_dim))
        fp_gauss = forward(nets["gen_gauss"], xi_gen)
        merged = fp_gauss.outputs
        if cfg.condition_on_labels:
            fp_label = forward(nets["gen_label"], yb.reshape(-1, 1))
            merged = np.concatenate([fp_gauss.outputs, fp_label.outputs], axis=1)
        fp_merge = forward(nets["gen_merge"], merged)
        z_gen = fp_merge.outputs
        comps["sinkhorn"], grad_sh_z, grad_sh_gen = sinkhorn_divergence(
            z, z_gen, cfg.sinkhorn, with_grad=True)
    elif "gen_merge" in nets:
        comps["sinkhorn"] = 0.0

    if not with_grads:
        return comps, grads

    grads["decoder"], dz = backward(nets["decoder"], fp_dec, weights["mse"] * grad_recon)

    if "classifier" in nets and weights.get("bce", 0.0) > 0.0:
        grads["classifier"], dz_cls = backward(
            nets["classifier"], fp_cls, weights["bce"] * grad_prob)
        dz = dz + dz_cls

    if gen_active:
        dz = dz + weights["sinkhorn"] * grad_sh_z
        grads["gen_merge"], dmerged = backward(
            nets["gen_merge"], fp_merge, weights["sinkhorn"] * grad_sh_gen)
        split = GAUSS_BRANCH[-1]
        grads["gen_gauss"], _ = backward(nets["gen_gauss"], fp_gauss, dmerged[:, :split])
        if cfg.condition_on_labels:
            grads["gen_label"], _ = backward(nets["gen_label"], fp_label, dmerged[:, split:])

    if cfg.architecture == "vae":
        w_kl = weights["kl"]
        dmu = dz + w_kl * grad_kl_mu
        dsigma = dz * xi + w_kl * grad_kl_sigma
        dlogvar = 0.5 * sigma * dsigma
        grads["mu_head"], dtrunk_mu = backward(nets["mu_head"], fp_mu, dmu)
        grads["logvar_head"], dtrunk_lv = backward(nets["logvar_head"], fp_lv, dlogvar)
        grads["trunk"], _ = backward(nets["trunk"], fp_trunk, dtrunk_mu + dtrunk_lv)
    else:
        grads["encoder"], _ = backward(nets["encoder"], fp_enc, dz)
    return comps, grads


def _total(comps: dict, weights: dict) -> float:
    return sum(weights[name] * comps[name] for name in comps)


def train_autoencoder(train: FeatureMatrix, val: FeatureMatrix, cfg: TrainConfig):
    """Train one architecture with early stopping on the validation loss.

    Returns (model, history); history rows carry per-epoch train and
    validation totals and unweighted components. The model keeps the
    parameters of the best validation epoch.
    """
    for name, part in (("train", train), ("val", val)):
        if np.any(part.values < 0.0) or np.any(part.values > 1.0):
            raise RangeError(f"{name} features must be minmax-scaled to [0, 1]")
    if train.n_features != val.n_features:
        raise ShapeError("train and validation widths differ")

    nets, streams = _build_nets(cfg, train.n_features)
    adams = {name: Adam(net, cfg.learning_rate) for name, net in nets.items()}
    shuffle_rng = streams["shuffle"]
    noise_rng = streams["noise"]
    weights = cfg.component_weights()

    y_train = train.labels.astype(np.float64)
    y_val = val.labels.astype(np.float64)

    def eval_split(values, labels):
        sums, count = {}, 0
        for start in range(0, values.shape[0], cfg.batch_size):
            xb = values[start : start + cfg.batch_size]
            yb = labels[start : start + cfg.batch_size]
            comps, _ = _batch_pass(nets, cfg, xb, yb, noise_rng, with_grads=False)
            for k, v in comps.items():
                sums[k] = sums.get(k, 0.0) + v * xb.shape[0]
            count += xb.shape[0]
        return {k: v / count for k, v in sums.items()}

    history = []
    best_val = np.inf
    best_params = None
    best_epoch = 0
    wait = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffle_rng.permutation(train.n_samples)
        sums, count = {}, 0
        for start in range(0, train.n_samples, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            comps, grads = _batch_pass(
                nets, cfg, train.values[idx], y_train[idx], noise_rng, with_grads=True)
            total = _total(comps, weights)
            if not np.isfinite(total):
                raise DivergenceError(f"non-finite loss at epoch {epoch}")
            for name, g in grads.items():
                adams[name].step(nets[name], g)
            for k, v in comps.items():
                sums[k] = sums.get(k, 0.0) + v * idx.size
            count += idx.size
        train_comps = {k: v / count for k, v in sums.items()}
        val_comps = eval_split(val.values, y_val)
        val_total = _total(val_comps, weights)
        row = {"epoch": epoch, "train_total": _total(train_comps, weights),
               "val_total": val_total}
        row.update({f"train_{k}": v for k, v in train_comps.items()})
        row.update({f"val_{k}": v for k, v in val_comps.items()})
        history.append(row)

        if val_total < best_val:
            best_val = val_total
            best_params = {name: [p.copy() for p in net.parameters()]
                           for name, net in nets.items()}
            best_epoch = epoch
            wait = 0
        else:
            wait += 1
            if wait >= cfg.patience:
                break

    if best_params is not None:
        for name, net in nets.items():
            for p, saved in zip(net.parameters(), best_params[name]):
                p[...] = saved
    return AutoencoderModel(cfg, nets, history, best_epoch), history


def reduce_features(model: AutoencoderModel, values) -> np.ndarray:
    """Latent coordinates of ``values`` under a trained model."""
    return model.reduce(values)


def evaluate_autoencoder(model: AutoencoderModel, data: FeatureMatrix) -> dict:
    """Reconstruction and classification quality on held-out data.

    Returns final MSE, and BCE plus ranking AUC when the architecture has a
    classifier head (None otherwise).
    """
    from .metrics import compute_auc

    recon = model.reconstruct(data.values)
    mse, _ = mse_loss(data.values, recon)
    out = {"mse": mse, "bce": None, "classifier_auc": None}
    if "classifier" in model.nets:
        probs = model.classify(data.values)
        bce, _ = bce_loss(data.labels.astype(np.float64), probs)
        out["bce"] = bce
        out["classifier_auc"] = compute_auc(data.labels, probs)
    return out
