"""End-to-end benchmark pipeline.

One method's run: load or synthesise the 67-feature dataset, split it,
minmax-scale on the training split, fit the reducer, map every split to the
latent space, rescale latents to [0, 1], carve the kernel-classifier subsets
out of the held-out split, build Gram matrices, grid-search C against the
validation subset, and score the evaluation subset in class-balanced
disjoint chunks. The benchmark loops that over a method list and aggregates
one report.

Reports contain no timestamps or durations, so rerunning a config
reproduces them byte for byte; wall times go to a separate sidecar file.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autoencoders, classical
from .config import PipelineConfig
from .data import FeatureMatrix, SplitSpec, apply_minmax, fit_minmax, generate_synthetic, split_dataset, take_balanced
from .dataio import load_matrix, save_matrix
from .errors import InsufficientDataError, QrdxError, StageError
from .metrics import compute_auc, roc_curve, subset_uncertainty
from .quantum import EncodingCircuit, kernel_matrix
from .svm import SvmModel, decision_values, grid_search_c, load_svm

FAMILIES = {
    "pca": "linear", "ica": "linear", "nmf": "matrix factorisation",
    "lle": "manifold", "se": "manifold", "rbm": "neural",
}


@dataclass
class ReducerHandle:
    """A fitted reducer with a uniform transform interface."""

    method: str
    model: object
    history: list | None = None  # per-epoch rows for trained networks

    def reduce(self, values: np.ndarray) -> np.ndarray:
        if isinstance(self.model, autoencoders.AutoencoderModel):
            return self.model.reduce(values)
        return self.model.transform(values)


def method_family(method: str) -> str:
    return FAMILIES.get(method, "autoencoder")


def _split_method(method: str):
    """'sinkclass-bce' -> ('sinkclass', 'bce'); bare ids keep the config default."""
    if "-" in method:
        arch, opt = method.split("-", 1)
        return arch, opt
    return method, None


def load_dataset(cfg: PipelineConfig) -> FeatureMatrix:
    """Synthetic draw or file load, per the dataset section."""
    ds = cfg.dataset
    if ds.source == "synthetic":
        return generate_synthetic(ds.synthetic_samples, cfg.seed, ds.synthetic_hardness)
    return load_matrix(ds.source)


def prepare_splits(cfg: PipelineConfig, data: FeatureMatrix):
    """Split and minmax-scale; the scaler is fitted on the training split only."""
    train, val, test = split_dataset(data, SplitSpec(seed=cfg.seed, fractions=cfg.dataset.fractions))
    spec = fit_minmax(train.values)
    return tuple(part.with_values(apply_minmax(part.values, spec)) for part in (train, val, test))


def fit_reducer(cfg: PipelineConfig, train: FeatureMatrix, val: FeatureMatrix,
                method: str | None = None) -> ReducerHandle:
    """Fit the configured reduction method on the (scaled) training split."""
    rd = cfg.reducer
    method = method or rd.method
    arch, opt = _split_method(method)
    k = rd.latent_dim
    if arch == "pca":
        return ReducerHandle(method, classical.pca_fit(train.values, k))
    if arch == "ica":
        return ReducerHandle(method, classical.ica_fit(train.values, k, seed=cfg.seed))
    if arch == "lle":
        return ReducerHandle(method, classical.lle_fit(
            train.values, k, n_neighbors=rd.n_neighbors or 12))
    if arch == "se":
        return ReducerHandle(method, classical.se_fit(
            train.values, k, n_neighbors=rd.n_neighbors or 9))
    if arch == "nmf":
        return ReducerHandle(method, classical.nmf_fit(
            train.values, k, l1_strength=rd.nmf_l1_strength, max_iter=rd.nmf_max_iter))
    if arch == "rbm":
        return ReducerHandle(method, classical.rbm_fit(
            train.values, k, seed=cfg.seed, learning_rate=rd.rbm_learning_rate,
            batch_size=rd.rbm_batch_size, n_epochs=rd.rbm_epochs))
    overrides = {"seed": cfg.seed, "latent_dim": k, "max_epochs": rd.max_epochs,
                 "patience": rd.patience}
    if rd.batch_size is not None:
        overrides["batch_size"] = rd.batch_size
    if rd.learning_rate is not None:
        overrides["learning_rate"] = rd.learning_rate
    train_cfg = autoencoders.default_config(arch, opt or rd.optimise, **overrides)
    model, history = autoencoders.train_autoencoder(train, val, train_cfg)
    return ReducerHandle(method, model, history)


def reduce_splits(handle: ReducerHandle, splits) -> tuple:
    """Map splits to latents and rescale them to [0, 1].

    The latent scaler is fitted on the reduced training split, matching the
    feature-space convention, and clips the other splits into range.
    """
    reduced = [FeatureMatrix(handle.reduce(part.values), part.labels) for part in splits]
    spec = fit_minmax(reduced[0].values)
    return tuple(part.with_values(apply_minmax(part.values, spec)) for part in reduced)


def carve_protocol(cfg: PipelineConfig, red_val: FeatureMatrix, red_source: FeatureMatrix):
    """Cut the kernel-classifier train/eval sets out of the source split.

    Requests are capped to what the split can hold: training takes at most
    half of each class, evaluation takes what remains, floored to a multiple
    of the subset count so the uncertainty estimate stays balanced. The two
    sets are disjoint by construction; the C-search set comes from the
    validation split.
    """
    ev = cfg.eval
    n_half = int(min((red_source.labels == 0).sum(), (red_source.labels == 1).sum()))
    tr_half = min(ev.qsvm_train // 2, n_half // 2)
    if tr_half < 1:
        raise InsufficientDataError("source split too small for kernel training")
    eval_half = min(ev.qsvm_test // 2, n_half - tr_half)
    eval_half -= eval_half % ev.n_subsets
    if eval_half < ev.n_subsets:
        raise InsufficientDataError("source split too small for subset evaluation")
    qsvm_train = take_balanced(red_source, 2 * tr_half)
    qsvm_eval = take_balanced(red_source, 2 * eval_half, offset=2 * tr_half)
    val_half = min(ev.qsvm_val // 2,
                   int(min((red_val.labels == 0).sum(), (red_val.labels == 1).sum())))
    if val_half < 1:
        raise InsufficientDataError("validation split too small for the C search")
    qsvm_val = take_balanced(red_val, 2 * val_half)
    return qsvm_train, qsvm_eval, qsvm_val


# --- kernel cache -----------------------------------------------------------

def _circuit(cfg: PipelineConfig) -> EncodingCircuit:
    qc = cfg.circuit
    return EncodingCircuit(qc.n_qubits, qc.angle_scale, qc.permutation_shift)


def kernel_cache_key(cfg: PipelineConfig, a: FeatureMatrix, b: FeatureMatrix | None) -> str:
    qc = cfg.circuit
    h = hashlib.sha256()
    h.update(json.dumps({
        "n_qubits": qc.n_qubits, "angle_scale": qc.angle_scale,
        "permutation_shift": qc.permutation_shift, "shots": qc.shots,
        "seed": cfg.seed if qc.shots else 0,
    }, sort_keys=True).encode())
    h.update(np.ascontiguousarray(a.values, dtype="<f8").tobytes())
    h.update(b"|")
    if b is not None:
        h.update(np.ascontiguousarray(b.values, dtype="<f8").tobytes())
    return h.hexdigest()


def cached_kernel(cfg: PipelineConfig, a: FeatureMatrix, b: FeatureMatrix | None,
                  cache_dir: Path | None) -> np.ndarray:
    """Gram matrix of a (rows) against b (columns; None means symmetric),
    served from the on-disk cache when an identical request was stored."""
    if cache_dir is not None:
        key = kernel_cache_key(cfg, a, b)
        path = cache_dir / f"{key}.qrdx"
        if path.exists():
            return load_matrix(path).values
    gram = kernel_matrix(a.values, None if b is None else b.values,
                         circuit=_circuit(cfg), shots=cfg.circuit.shots,
                         seed=cfg.seed).values
    if cache_dir is not None:
        cache_dir.mkdir(parents=True, exist_ok=True)
        save_matrix(FeatureMatrix(gram, a.labels[: gram.shape[0]]
                                  if gram.shape[0] == a.labels.shape[0]
                                  else np.zeros(gram.shape[0], np.uint8)), path)
    return gram


# --- single-method run -------------------------------------------------------

def run_pipeline(cfg: PipelineConfig, method: str | None = None,
                 write_artifacts: bool = True) -> dict:
    """Run one method end to end; returns its report row as a plain dict."""
    method = method or cfg.reducer.method
    out_dir = Path(cfg.output.directory)
    method_dir = out_dir / method
    cache_dir = out_dir / "cache" if cfg.output.cache else None

    def stage(name, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except QrdxError:
            raise
        except Exception as exc:  # numerical blowups etc. become stage errors
            raise StageError(name, str(exc)) from exc

    data = stage("dataset", load_dataset, cfg)
    splits = stage("split", prepare_splits, cfg, data)
    handle = stage("reduce", fit_reducer, cfg, splits[0], splits[1], method)
    red_train, red_val, red_test = stage("reduce", reduce_splits, handle, splits)

    source = red_test if cfg.eval.source == "test" else red_train
    qsvm_train, qsvm_eval, qsvm_val = stage("carve", carve_protocol, cfg, red_val, source)
    gram_train = stage("kernel", cached_kernel, cfg, qsvm_train, None, cache_dir)
    gram_val = stage("kernel", cached_kernel, cfg, qsvm_val, qsvm_train, cache_dir)
    gram_eval = stage("kernel", cached_kernel, cfg, qsvm_eval, qsvm_train, cache_dir)

    model, c_search = stage("svm", grid_search_c, gram_train, qsvm_train.labels,
                            gram_val, qsvm_val.labels, cfg.svm.c_grid,
                            cfg.svm.tolerance, cfg.svm.max_passes)
    scores = stage("evaluate", decision_values, model, gram_eval)
    auc_mean, auc_std = stage("evaluate", subset_uncertainty,
                              qsvm_eval.labels, scores, cfg.eval.n_subsets)

    row = {
        "method": method,
        "family": method_family(method),
        "status": "ok",
        "mse": None,
        "bce": None,
        "classifier_auc": None,
        "auc_mean": auc_mean,
        "auc_std": auc_std,
        "best_c": model.c_value,
        "c_search": {repr(c): auc for c, auc in sorted(c_search.items())},
        "n_qsvm_train": qsvm_train.n_samples,
        "n_qsvm_eval": qsvm_eval.n_samples,
    }
    if isinstance(handle.model, autoencoders.AutoencoderModel):
        quality = autoencoders.evaluate_autoencoder(handle.model, splits[2])
        row["mse"] = quality["mse"]
        row["bce"] = quality["bce"]
        row["classifier_auc"] = quality["classifier_auc"]

    if write_artifacts:
        _write_method_artifacts(cfg, method, method_dir, handle, model,
                                qsvm_eval.labels, scores, auc_mean)
    return row


def _write_method_artifacts(cfg, method, method_dir, handle, model,
                            eval_labels, scores, auc):
    method_dir.mkdir(parents=True, exist_ok=True)
    model.save(method_dir / "svm_model.json")
    if isinstance(handle.model, autoencoders.AutoencoderModel):
        handle.model.save(method_dir / "reducer")
    else:
        handle.model.save(method_dir / "reducer.qrdm")

    thresholds, tpr, fpr = roc_curve(eval_labels, scores)
    roc_path = Path(cfg.output.directory) / f"roc_{method}.csv"
    with open(roc_path, "w") as fh:
        fh.write("threshold,tpr,fpr\n")
        for t, tp, fp in zip(thresholds, tpr, fpr):
            fh.write(f"{repr(float(t))},{repr(float(tp))},{repr(float(fp))}\n")

    if handle.history:
        curves = method_dir / "training_curves.csv"
        keys = list(handle.history[0])
        with open(curves, "w") as fh:
            fh.write(",".join(keys) + "\n")
            for row in handle.history:
                fh.write(",".join(repr(row[k]) if k != "epoch" else str(row[k])
                                  for k in keys) + "\n")

    if cfg.output.figures:
        from . import plotting

        fig_dir = Path(cfg.output.directory) / "figures"
        plotting.plot_roc(fpr, tpr, auc, method, fig_dir / f"roc_{method}.png")
        if handle.history:
            plotting.plot_training_curves(handle.history, method,
                                          fig_dir / f"curves_{method}.png")


# --- benchmark ---------------------------------------------------------------

def run_benchmark(cfg: PipelineConfig, methods=None) -> dict:
    """Run every method and aggregate rows into one report dict.

    A failing method records its error in its row's status and the loop
    continues. Wall times per method go to a sidecar, never into the report.
    """
    methods = tuple(methods or cfg.benchmark_methods)
    out_dir = Path(cfg.output.directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows, timings = [], {}
    for method in methods:
        started = time.monotonic()
        try:
            rows.append(run_pipeline(cfg, method))
        except QrdxError as exc:
            rows.append({
                "method": method, "family": method_family(method),
                "status": f"failed: {exc}", "mse": None, "bce": None,
                "classifier_auc": None, "auc_mean": None, "auc_std": None,
                "best_c": None, "c_search": None,
                "n_qsvm_train": None, "n_qsvm_eval": None,
            })
        timings[method] = time.monotonic() - started

    report = {
        "seed": cfg.seed,
        "config": dataclasses.asdict(cfg),
        "rows": rows,
    }
    write_report(report, out_dir)
    (out_dir / "timings.json").write_text(json.dumps(timings, indent=1))
    if cfg.output.figures:
        from . import plotting

        plotting.plot_benchmark(rows, out_dir / "figures" / "benchmark_auc.png")
    return report


_TABLE_COLUMNS = ("method", "family", "mse", "bce", "classifier_auc",
                  "auc_mean", "auc_std", "best_c")


def _format_cell(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_table(report: dict) -> str:
    """Plain-text table of the report rows; numeric cells keep full
    precision so parse_table inverts exactly."""
    rows = [[_format_cell(r.get(c)) for c in _TABLE_COLUMNS] for r in report["rows"]]
    table = [list(_TABLE_COLUMNS)] + rows
    widths = [max(len(r[i]) for r in table) for i in range(len(_TABLE_COLUMNS))]
    lines = []
    for r in table:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines) + "\n"


def parse_table(text: str) -> list:
    """Invert render_table back into row dicts with floats restored."""
    lines = [ln for ln in text.strip().splitlines() if ln and not set(ln) <= {"-"}]
    header = lines[0].split()
    out = []
    for line in lines[1:]:
        cells = line.split()
        row = {}
        for key, cell in zip(header, cells):
            if cell == "-":
                row[key] = None
            elif key in ("method", "family"):
                row[key] = cell
            else:
                row[key] = float(cell)
        out.append(row)
    return out


def write_report(report: dict, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(
        json.dumps(report, indent=1, sort_keys=True))
    (out_dir / "report.txt").write_text(render_table(report))
    with open(out_dir / "report.csv", "w") as fh:
        fh.write(",".join(_TABLE_COLUMNS) + "\n")
        for row in report["rows"]:
            fh.write(",".join(_format_cell(row.get(c)) for c in _TABLE_COLUMNS) + "\n")


# --- staged runs (CLI verbs) ---------------------------------------------------

def _method_dir(cfg: PipelineConfig, method: str) -> Path:
    return Path(cfg.output.directory) / method


def stage_reduce(cfg: PipelineConfig) -> Path:
    """Fit the configured reducer and persist reduced splits plus the model."""
    method = cfg.reducer.method
    method_dir = _method_dir(cfg, method)
    method_dir.mkdir(parents=True, exist_ok=True)
    data = load_dataset(cfg)
    splits = prepare_splits(cfg, data)
    handle = fit_reducer(cfg, splits[0], splits[1], method)
    reduced = reduce_splits(handle, splits)
    for name, part in zip(("train", "val", "test"), reduced):
        save_matrix(part, method_dir / f"reduced_{name}.qrdx")
    if isinstance(handle.model, autoencoders.AutoencoderModel):
        handle.model.save(method_dir / "reducer")
        quality = autoencoders.evaluate_autoencoder(handle.model, splits[2])
        (method_dir / "metrics.json").write_text(json.dumps({
            "final_mse": quality["mse"], "final_bce": quality["bce"],
            "classifier_auc": quality["classifier_auc"],
            "epochs_run": len(handle.history),
            "best_epoch": handle.model.best_epoch,
            "config": dataclasses.asdict(handle.model.config),
        }, indent=1, sort_keys=True))
    else:
        handle.model.save(method_dir / "reducer.qrdm")
    if handle.history and cfg.output.figures:
        from . import plotting

        plotting.plot_training_curves(handle.history, method,
                                      Path(cfg.output.directory) / "figures" / f"curves_{method}.png")
    return method_dir


def stage_kernel(cfg: PipelineConfig) -> Path:
    """Carve the protocol subsets from stored reduced splits and write Grams."""
    method_dir = _method_dir(cfg, cfg.reducer.method)
    red = {name: load_matrix(method_dir / f"reduced_{name}.qrdx")
           for name in ("train", "val", "test")}
    source = red["test"] if cfg.eval.source == "test" else red["train"]
    qsvm_train, qsvm_eval, qsvm_val = carve_protocol(cfg, red["val"], source)
    cache_dir = Path(cfg.output.directory) / "cache" if cfg.output.cache else None
    grams = {
        "train": (qsvm_train, cached_kernel(cfg, qsvm_train, None, cache_dir)),
        "val": (qsvm_val, cached_kernel(cfg, qsvm_val, qsvm_train, cache_dir)),
        "eval": (qsvm_eval, cached_kernel(cfg, qsvm_eval, qsvm_train, cache_dir)),
    }
    for name, (fm, gram) in grams.items():
        save_matrix(FeatureMatrix(gram, fm.labels), method_dir / f"kernel_{name}.qrdx")
    return method_dir


def stage_train_svm(cfg: PipelineConfig) -> Path:
    """Grid-search C on stored kernels and persist the selected model."""
    method_dir = _method_dir(cfg, cfg.reducer.method)
    ktrain = load_matrix(method_dir / "kernel_train.qrdx")
    kval = load_matrix(method_dir / "kernel_val.qrdx")
    model, c_search = grid_search_c(ktrain.values, ktrain.labels, kval.values,
                                    kval.labels, cfg.svm.c_grid,
                                    cfg.svm.tolerance, cfg.svm.max_passes)
    model.save(method_dir / "svm_model.json")
    (method_dir / "c_search.json").write_text(
        json.dumps({repr(c): auc for c, auc in sorted(c_search.items())}, indent=1))
    return method_dir


def stage_evaluate(cfg: PipelineConfig) -> dict:
    """Score the stored evaluation kernel with the stored model and report."""
    method = cfg.reducer.method
    method_dir = _method_dir(cfg, method)
    model = load_svm(method_dir / "svm_model.json")
    keval = load_matrix(method_dir / "kernel_eval.qrdx")
    scores = decision_values(model, keval.values)
    auc_mean, auc_std = subset_uncertainty(keval.labels, scores, cfg.eval.n_subsets)
    row = {
        "method": method, "family": method_family(method), "status": "ok",
        "mse": None, "bce": None, "classifier_auc": None,
        "auc_mean": auc_mean, "auc_std": auc_std, "best_c": model.c_value,
        "c_search": None,
        "n_qsvm_train": int(model.alphas.shape[0]), "n_qsvm_eval": keval.n_samples,
    }
    metrics_path = method_dir / "metrics.json"
    if metrics_path.exists():
        stored = json.loads(metrics_path.read_text())
        row["mse"] = stored.get("final_mse")
        row["bce"] = stored.get("final_bce")
        row["classifier_auc"] = stored.get("classifier_auc")
    report = {"seed": cfg.seed, "config": dataclasses.asdict(cfg), "rows": [row]}
    write_report(report, method_dir)
    thresholds, tpr, fpr = roc_curve(keval.labels, scores)
    with open(Path(cfg.output.directory) / f"roc_{method}.csv", "w") as fh:
        fh.write("threshold,tpr,fpr\n")
        for t, tp, fp in zip(thresholds, tpr, fpr):
            fh.write(f"{repr(float(t))},{repr(float(tp))},{repr(float(fp))}\n")
    if cfg.output.figures:
        from . import plotting

        overall = compute_auc(keval.labels, scores)
        plotting.plot_roc(fpr, tpr, overall, method,
                          Path(cfg.output.directory) / "figures" / f"roc_{method}.png")
    return row
