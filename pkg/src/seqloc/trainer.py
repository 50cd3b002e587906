"""Training loop, evaluation and the experiment drivers (T sweep, FoV comparison)."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import checkpoint
from .errors import ConfigMismatch, DimensionMismatch, NonFiniteLoss, ZeroQuaternion
from .geometry import angular_error_deg, median, position_error_m
from .loss import LossWeights, balance_beta, loss_gradient, sequence_loss
from .net import CellOptions, backward, dims, forward_sequences, init_params
from .optim import Adam
from .plotting import emit_path_svg
from .synthdata import DataConfig, Dataset, generate_dataset

log = logging.getLogger(__name__)

LOG_HEADER = ["step", "position", "orientation", "weight_decay", "temporal", "total"]
VARIANTS = ("PoseNet-analog", "LSTM", "LSTM (Reg.)")


@dataclass(frozen=True, kw_only=True)
class TrainConfig:
    epochs: int
    T: int = 3
    batch_sequences: int = 20
    dropout_p: float = 0.5
    gamma: float = 0.0002
    delta: float = 0.0002
    beta: float | str = "auto"
    sigma_pos: float = 0.5
    sigma_orient: float = 0.01
    hidden: int = 128
    seed: int = 0
    lr: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    max_steps: int | None = None
    peepholes: bool = True
    output_peephole_current_cell: bool = False
    unsquared_weight_decay: bool = False
    temporal_on_error: bool = False

    def __post_init__(self):
        if isinstance(self.beta, str) and self.beta != "auto":
            raise ValueError(f"beta must be a number or 'auto', got {self.beta!r}")

    @property
    def cell_options(self) -> CellOptions:
        return CellOptions(self.peepholes, self.output_peephole_current_cell)

    def loss_weights(self, beta: float) -> LossWeights:
        return LossWeights(beta, self.gamma, self.delta, self.unsquared_weight_decay,
                           self.temporal_on_error)

    def replace(self, **changes) -> "TrainConfig":
        d = asdict(self)
        d.update(changes)
        return TrainConfig(**d)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "TrainConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class TrainResult:
    params: dict
    options: CellOptions
    optimizer: Adam
    beta: float
    log_rows: list = field(default_factory=list)

    def save_checkpoint(self, path) -> None:
        checkpoint.save(path, self.params, self.options, self.optimizer)

    def write_log(self, path) -> None:
        write_train_log(path, self.log_rows)


def write_train_log(path, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(LOG_HEADER)
        for r in rows:
            w.writerow([r["step"]] + [repr(float(r[k])) for k in LOG_HEADER[1:]])


def _rngs(seed: int):
    init_ss, shuffle_ss, drop_ss = np.random.SeedSequence(seed).spawn(3)
    return (np.random.default_rng(init_ss), np.random.default_rng(shuffle_ss),
            np.random.default_rng(drop_ss))


def resolve_beta(config: TrainConfig, params: dict, X, Y) -> float:
    if config.beta != "auto":
        return float(config.beta)
    preds, _, _ = forward_sequences(params, X, config.cell_options)
    return balance_beta(preds, Y)


def batch_gradient(params, X, Y, weights: LossWeights, options: CellOptions, *,
                   dropout_p=0.0, train=False, rng=None, masks=None):
    """Mean-over-sequences loss breakdown and gradient for one batch."""
    B = len(X)
    preds, _, cache = forward_sequences(params, X, options, dropout_p=dropout_p, train=train,
                                        rng=rng, masks=masks)
    terms = sequence_loss(preds, Y, weights, params).as_dict()
    terms = {k: v / B for k, v in terms.items()}
    dpreds, dtheta = loss_gradient(preds, Y, weights, params)
    grads = backward(params, X, dpreds / B, cache)
    for k in grads:
        grads[k] += dtheta[k] / B
    return terms, grads


def steps_per_epoch(n_sequences: int, batch_sequences: int) -> int:
    return math.ceil(n_sequences / batch_sequences)


def train(config: TrainConfig, dataset: Dataset, log_path=None) -> TrainResult:
    if dataset.T != config.T:
        raise ConfigMismatch(f"dataset windowed with T={dataset.T}, config has T={config.T}")
    X, Y, _ = dataset.windows("train")
    init_rng, shuffle_rng, drop_rng = _rngs(config.seed)
    params = init_params(init_rng, dataset.feature_dim, config.hidden, config.sigma_pos,
                         config.sigma_orient, config.peepholes)
    options = config.cell_options
    beta = resolve_beta(config, params, X, Y)
    weights = config.loss_weights(beta)
    opt = Adam(config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps)
    rows = []
    log.info("training %d sequences of T=%d, beta=%.4g", len(X), config.T, beta)
    done = False
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(len(X))
        for start in range(0, len(X), config.batch_sequences):
            if config.max_steps is not None and opt.step_count >= config.max_steps:
                done = True
                break
            idx = order[start:start + config.batch_sequences]
            terms, grads = batch_gradient(params, X[idx], Y[idx], weights, options,
                                          dropout_p=config.dropout_p, train=True, rng=drop_rng)
            if not math.isfinite(terms["total"]):
                raise NonFiniteLoss(f"loss became {terms['total']} at step {opt.step_count}, "
                                    f"epoch {epoch}: {terms}")
            opt.step(params, grads)
            rows.append({"step": opt.step_count, **terms})
        if done:
            break
    result = TrainResult(params, options, opt, beta, rows)
    if log_path is not None:
        result.write_log(log_path)
    return result


@dataclass
class EvalReport:
    median_position_m: float
    median_orientation_deg: float
    frames: np.ndarray          # dataset frame indices, (N,)
    truth: np.ndarray           # (N, 7)
    pred: np.ndarray            # (N, 7), raw regressor output
    position_errors: np.ndarray
    orientation_errors: np.ndarray
    gate_medians: np.ndarray    # (N, 3): median i, f, o over hidden units
    T: int

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    @property
    def sequence_starts(self) -> list[int]:
        return list(range(0, self.n_frames, self.T))

    def summary(self) -> dict:
        return {"median_position_m": float(self.median_position_m),
                "median_orientation_deg": float(self.median_orientation_deg),
                "n_frames": int(self.n_frames)}

    def mean_jump(self) -> float:
        """Mean predicted-position step between consecutive frames of the same sequence."""
        p = self.pred[:, :3].reshape(-1, self.T, 3)
        if self.T < 2:
            return 0.0
        return float(np.mean(np.linalg.norm(np.diff(p, axis=1), axis=-1)))


def _orientation_error(q_pred, q_true) -> float:
    try:
        return angular_error_deg(q_pred, q_true)
    except ZeroQuaternion:
        return 180.0


def evaluate(params: dict, dataset: Dataset, split: str = "test",
             options: CellOptions = CellOptions()) -> EvalReport:
    D, _ = dims(params)
    if D != dataset.feature_dim:
        raise DimensionMismatch(f"checkpoint expects D={D}, dataset has {dataset.feature_dim}")
    X, Y, idx = dataset.windows(split)
    preds, trace, _ = forward_sequences(params, X, options)
    gates = trace.median_per_step()            # (T, B, 3)
    gates = np.transpose(gates, (1, 0, 2)).reshape(-1, 3)
    truth = Y.reshape(-1, 7)
    pred = preds.reshape(-1, 7)
    pos_err = np.array([position_error_m(a[:3], b[:3]) for a, b in zip(pred, truth)])
    ang_err = np.array([_orientation_error(a[3:], b[3:]) for a, b in zip(pred, truth)])
    return EvalReport(median(pos_err), median(ang_err), idx.reshape(-1), truth, pred,
                      pos_err, ang_err, gates, dataset.T)


def _unit_or_raw(q):
    n = np.linalg.norm(q)
    return q / n if n > 1e-12 else q


def write_eval_outputs(report: EvalReport, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "eval_report.json").write_text(json.dumps(report.summary(), indent=2) + "\n")
    with open(out / "path.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["frame", "px", "py", "pz", "qw", "qx", "qy", "qz",
                    "pred_px", "pred_py", "pred_pz", "pred_qw", "pred_qx", "pred_qy", "pred_qz"])
        for k, t, p in zip(report.frames, report.truth, report.pred):
            p = np.concatenate([p[:3], _unit_or_raw(p[3:])])
            w.writerow([int(k)] + [f"{v:.9g}" for v in np.concatenate([t, p])])
    with open(out / "gates.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["frame", "median_i", "median_f", "median_o"])
        for k, g in zip(report.frames, report.gate_medians):
            w.writerow([int(k)] + [f"{v:.9g}" for v in g])
    (out / "path.svg").write_text(emit_path_svg(report))
    return out


def train_and_evaluate(config: TrainConfig, dataset: Dataset, split: str = "test"):
    result = train(config, dataset)
    return result, evaluate(result.params, dataset, split, result.options)


def step_matched(config: TrainConfig, dataset: Dataset, total_steps: int) -> TrainConfig:
    """Config that runs exactly ``total_steps`` Adam steps on ``dataset``."""
    n_seq = len(dataset.manifest["split"]["train"]) // dataset.T
    per_epoch = steps_per_epoch(n_seq, config.batch_sequences)
    return config.replace(epochs=math.ceil(total_steps / per_epoch), max_steps=total_steps)


def sweep_T(base_config: TrainConfig, dataset: Dataset, T_values, out_csv=None) -> list[dict]:
    """One model per T, re-windowing the same frames; identical seeds throughout."""
    T_values = list(T_values)
    if not T_values:
        raise ValueError("T_values is empty")
    rows = []
    for T in T_values:
        ds = dataset.rewindow(T) if T != dataset.T else dataset
        _, report = train_and_evaluate(base_config.replace(T=T), ds)
        log.info("T=%d: %.3f m, %.2f deg", T, report.median_position_m, report.median_orientation_deg)
        rows.append({"T": T, "median_position_m": report.median_position_m,
                     "median_orientation_deg": report.median_orientation_deg,
                     "n_test_frames": report.n_frames, "report": report})
    if out_csv is not None:
        _write_rows(out_csv, rows, ["T", "median_position_m", "median_orientation_deg", "n_test_frames"])
    return rows


def _write_rows(path, rows, columns) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([f"{r[c]:.9g}" if isinstance(r[c], float) else r[c] for c in columns])


def fov_variants(base_config: TrainConfig) -> dict[str, TrainConfig]:
    seq_T = base_config.T if base_config.T > 1 else 3
    return {
        "PoseNet-analog": base_config.replace(T=1, delta=0.0),
        "LSTM": base_config.replace(T=seq_T, delta=0.0),
        "LSTM (Reg.)": base_config.replace(T=seq_T, delta=0.0002),
    }


def optic_label(data_config: DataConfig) -> str:
    name = "Perspective" if data_config.model == "perspective" else "Fisheye"
    return f"{name}-{data_config.fov_deg:g}"


DEFAULT_FOV_SPECS = (("perspective", 90.0), ("fisheye_equidistant", 130.0),
                     ("fisheye_equidistant", 180.0))


def compare_fov(base_config: TrainConfig, data_config: DataConfig, fov_specs=DEFAULT_FOV_SPECS,
                out_csv=None) -> list[dict]:
    """Render one trajectory per optic and train the three model variants on each.

    All variants run the same number of Adam steps: ``base_config.max_steps``
    if set, otherwise what ``base_config.epochs`` gives the sequence model.
    """
    rows = []
    for model, fov in fov_specs:
        dcfg = data_config.replace(model=model, fov_deg=float(fov))
        variants = fov_variants(base_config)
        base_ds = generate_dataset(dcfg.replace(T=variants["LSTM"].T))
        total_steps = base_config.max_steps
        if total_steps is None:
            n_seq = len(base_ds.manifest["split"]["train"]) // base_ds.T
            total_steps = base_config.epochs * steps_per_epoch(n_seq, base_config.batch_sequences)
        for name in VARIANTS:
            cfg = variants[name]
            ds = base_ds.rewindow(cfg.T) if cfg.T != base_ds.T else base_ds
            _, report = train_and_evaluate(step_matched(cfg, ds, total_steps), ds)
            rows.append({"optic": optic_label(dcfg), "variant": name,
                         "median_position_m": report.median_position_m,
                         "median_orientation_deg": report.median_orientation_deg})
    if out_csv is not None:
        _write_rows(out_csv, rows, ["optic", "variant", "median_position_m", "median_orientation_deg"])
    return rows
