"""From-scratch fully connected channel estimator.

Two ReLU hidden layers of equal width and a linear output layer, trained
with mini-batch Adam on mean-squared error over standard-score-normalized
targets.  Model selection and reporting use NMSE on de-normalized channels.
All arithmetic runs in 64-bit floats regardless of the 32-bit dataset
storage.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .dataset_pipeline import (
    Dataset,
    Normalizer,
    apply_normalizer,
    fit_normalizer,
    invert_normalizer,
    pack_complex,
    unpack_complex,
)
from .errors import ChecksumError, FileFormatError, TrainingDivergedError

_PARAM_FIELDS = ("w1", "b1", "w2", "b2", "w3", "b3")

MODEL_MAGIC = b"FASM"
MODEL_VERSION = 1


@dataclass
class MlpParams:
    """Weights and biases; w1: (H, D_in), w2: (H, H), w3: (D_out, H)."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    def dims(self) -> tuple[int, int, int]:
        """(input width, hidden width, output width)."""
        return self.w1.shape[1], self.w1.shape[0], self.w3.shape[0]

    def copy(self) -> "MlpParams":
        return MlpParams(*(getattr(self, f).copy() for f in _PARAM_FIELDS))


@dataclass
class MlpGrads:
    """Loss gradients, one array per parameter, same shapes as MlpParams."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray


def init_params(d_in: int, hidden: int, d_out: int, rng: np.random.Generator) -> MlpParams:
    """Fan-in-scaled uniform weights, zero biases.

    Each weight layer draws Uniform(-sqrt(6/fan_in), +sqrt(6/fan_in)); draw
    order is w1, w2, w3 (determinism contract).
    """
    if min(d_in, hidden, d_out) < 1:
        raise ValueError(f"dimensions must be positive, got {(d_in, hidden, d_out)}")

    def layer(n_out: int, n_in: int) -> np.ndarray:
        bound = np.sqrt(6.0 / n_in)
        return rng.uniform(-bound, bound, size=(n_out, n_in))

    w1 = layer(hidden, d_in)
    w2 = layer(hidden, hidden)
    w3 = layer(d_out, hidden)
    return MlpParams(w1, np.zeros(hidden), w2, np.zeros(hidden), w3, np.zeros(d_out))


@dataclass
class ForwardCache:
    """Intermediate activations retained for the backward pass."""

    x: np.ndarray
    z1: np.ndarray
    a1: np.ndarray
    z2: np.ndarray
    a2: np.ndarray
    single: bool
    params: MlpParams


def forward(params: MlpParams, x: np.ndarray):
    """y = w3 @ relu(w2 @ relu(w1 @ x + b1) + b2) + b3.

    Accepts a single input vector (D_in,) or a batch (B, D_in); the output
    matches the input's batch shape.  Returns (y, cache).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    d_in, _, _ = params.dims()
    if xb.ndim != 2 or xb.shape[1] != d_in:
        raise ValueError(f"input width {x.shape} does not match d_in={d_in}")
    z1 = xb @ params.w1.T + params.b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ params.w2.T + params.b2
    a2 = np.maximum(z2, 0.0)
    y = a2 @ params.w3.T + params.b3
    cache = ForwardCache(xb, z1, a1, z2, a2, single, params)
    return (y[0] if single else y), cache


def mse_loss(pred: np.ndarray, target: np.ndarray):
    """Mean over all entries of the squared difference, and its gradient
    2*(pred - target)/count with respect to the prediction."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff**2))
    grad = 2.0 * diff / diff.size
    return loss, grad


def backward(params: MlpParams, cache: ForwardCache, d_out: np.ndarray) -> MlpGrads:
    """Exact reverse-mode gradients of the forward pass.

    ``d_out`` is the loss gradient at the output, matching the forward's
    output shape.  The ReLU subgradient at exactly zero is taken as zero.
    """
    if cache.params is not params:
        raise ValueError("cache was produced by a different parameter set")
    d_out = np.asarray(d_out, dtype=float)
    dy = d_out[None, :] if cache.single else d_out
    if dy.shape != (cache.x.shape[0], params.w3.shape[0]):
        raise ValueError(
            f"upstream gradient shape {d_out.shape} does not match forward output"
        )
    gw3 = dy.T @ cache.a2
    gb3 = dy.sum(axis=0)
    da2 = dy @ params.w3
    dz2 = da2 * (cache.z2 > 0)
    gw2 = dz2.T @ cache.a1
    gb2 = dz2.sum(axis=0)
    da1 = dz2 @ params.w2
    dz1 = da1 * (cache.z1 > 0)
    gw1 = dz1.T @ cache.x
    gb1 = dz1.sum(axis=0)
    return MlpGrads(gw1, gb1, gw2, gb2, gw3, gb3)


@dataclass
class AdamState:
    """Optimizer moments plus hyper-constants; step_count grows by 1 per update."""

    first_moment: MlpGrads
    second_moment: MlpGrads
    step_count: int
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8

    @classmethod
    def for_params(
        cls,
        params: MlpParams,
        learning_rate: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps_hat: float = 1e-8,
    ) -> "AdamState":
        zeros = lambda: MlpGrads(
            *(np.zeros_like(getattr(params, f)) for f in _PARAM_FIELDS)
        )
        return cls(zeros(), zeros(), 0, learning_rate, beta1, beta2, eps_hat)


def adam_step(params: MlpParams, grads: MlpGrads, state: AdamState):
    """One bias-corrected Adam update, in place; returns (params, state)."""
    for name in _PARAM_FIELDS:
        if not np.all(np.isfinite(getattr(grads, name))):
            raise ValueError(f"non-finite gradient in {name}")
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for name in _PARAM_FIELDS:
        g = getattr(grads, name)
        m = getattr(state.first_moment, name)
        v = getattr(state.second_moment, name)
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g**2
        update = (m / bc1) / (np.sqrt(v / bc2) + state.eps_hat)
        getattr(params, name)[...] -= state.learning_rate * update
    return params, state


# -- metrics ---------------------------------------------------------------


def nmse(h_hat: np.ndarray, h: np.ndarray) -> float:
    """||h_hat - h||^2 / ||h||^2 for a single channel vector."""
    h_hat = np.asarray(h_hat)
    h = np.asarray(h)
    if h_hat.shape != h.shape:
        raise ValueError(f"shape mismatch: {h_hat.shape} vs {h.shape}")
    denom = float(np.sum(np.abs(h) ** 2))
    if denom == 0.0:
        raise ValueError("true channel has zero norm")
    return float(np.sum(np.abs(h_hat - h) ** 2)) / denom


def nmse_db(value: float) -> float:
    return float(10.0 * np.log10(value))


def ensemble_nmse(h_hat: np.ndarray, h: np.ndarray) -> float:
    """Total squared error over total channel energy across a sample set.

    The linear-domain aggregate sum_i ||err_i||^2 / sum_i ||h_i||^2; rows
    are samples.  This weighting keeps the metric consistent with its
    closed-form predictions (an unweighted mean of per-sample ratios is
    biased upward by low-energy draws).
    """
    h_hat = np.asarray(h_hat)
    h = np.asarray(h)
    if h_hat.shape != h.shape:
        raise ValueError(f"shape mismatch: {h_hat.shape} vs {h.shape}")
    denom = float(np.sum(np.abs(h) ** 2))
    if denom == 0.0:
        raise ValueError("channel set has zero energy")
    return float(np.sum(np.abs(h_hat - h) ** 2)) / denom


# -- complexity counters -----------------------------------------------------


def count_forward_multiplies(d_in: int, hidden: int, d_out: int) -> int:
    """Real multiplications in one forward pass: D_in*H + H^2 + H*D_out."""
    if min(d_in, d_out) < 0 or hidden < 0:
        raise ValueError("dimensions must be non-negative")
    return d_in * hidden + hidden * hidden + hidden * d_out


def count_training_cost(
    epochs: int, n_train: int, d_in: int, hidden: int, d_out: int
) -> int:
    """Leading-order training multiplications: 3*E*N_tr*H*(D_in + H + D_out).

    Forward plus the roughly-double backward cost, per sample, per epoch.
    """
    if min(epochs, n_train, d_in, hidden, d_out) < 0:
        raise ValueError("arguments must be non-negative")
    return 3 * epochs * n_train * hidden * (d_in + hidden + d_out)


def instrumented_forward(params: MlpParams, x: np.ndarray):
    """Forward pass in explicit scalar arithmetic, counting real multiplies.

    Slow by construction; exists as an independent check of
    :func:`count_forward_multiplies`.  Returns (y, multiply_count).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("instrumented forward takes a single input vector")
    count = 0

    def affine(w: np.ndarray, v: np.ndarray, b: np.ndarray) -> np.ndarray:
        nonlocal count
        out = np.empty(w.shape[0])
        for i in range(w.shape[0]):
            acc = b[i]
            row = w[i]
            for j in range(w.shape[1]):
                acc += row[j] * v[j]
                count += 1
            out[i] = acc
        return out

    a1 = np.maximum(affine(params.w1, x, params.b1), 0.0)
    a2 = np.maximum(affine(params.w2, a1, params.b2), 0.0)
    y = affine(params.w3, a2, params.b3)
    return y, count


# -- training ----------------------------------------------------------------


@dataclass
class Hyperparams:
    hidden_width: int
    learning_rate: float
    batch_size: int
    max_epochs: int
    patience: int
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8


@dataclass
class Normalizers:
    """Feature- and target-side standard-score transforms fitted on train rows."""

    features: Normalizer
    targets: Normalizer


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)
    val_nmse: list[float] = field(default_factory=list)
    val_nmse_db: list[float] = field(default_factory=list)
    best_epoch: int = 0  # 1-indexed
    stopped_early: bool = False
    epochs_run: int = 0


def _rows_to_complex(packed: np.ndarray) -> np.ndarray:
    k = packed.shape[1] // 2
    return packed[:, :k] + 1j * packed[:, k:]


def train(
    train_ds: Dataset,
    val_ds: Dataset,
    hyper: Hyperparams,
    rng: np.random.Generator,
    shuffle_rng: np.random.Generator | None = None,
):
    """Mini-batch Adam training with early stopping on validation NMSE.

    Normalizers are fitted on the training rows only.  Each epoch reshuffles
    the training rows (the last partial batch is kept); after every epoch the
    validation NMSE is computed on de-normalized channel vectors.  Training
    stops once the epochs since the best validation NMSE exceed
    ``hyper.patience``, and the parameters from that best epoch are returned.

    ``rng`` seeds the parameter initialization and, when ``shuffle_rng`` is
    not given, the epoch shuffles too.  Returns (params, normalizers, report).
    """
    if train_ds.n_samples < 2 or val_ds.n_samples < 1:
        raise ValueError(
            f"need >= 2 train and >= 1 validation rows, got "
            f"{train_ds.n_samples}/{val_ds.n_samples}"
        )
    if train_ds.features.shape[1] != val_ds.features.shape[1] or (
        train_ds.targets.shape[1] != val_ds.targets.shape[1]
    ):
        raise ValueError("train and validation widths differ")
    if shuffle_rng is None:
        shuffle_rng = rng

    feat_nrm = fit_normalizer(train_ds.features)
    tgt_nrm = fit_normalizer(train_ds.targets)
    normalizers = Normalizers(feat_nrm, tgt_nrm)

    x_train = apply_normalizer(feat_nrm, train_ds.features.astype(float))
    t_train = apply_normalizer(tgt_nrm, train_ds.targets.astype(float))
    x_val = apply_normalizer(feat_nrm, val_ds.features.astype(float))
    h_val = _rows_to_complex(val_ds.targets.astype(float))

    d_in = x_train.shape[1]
    d_out = t_train.shape[1]
    params = init_params(d_in, hyper.hidden_width, d_out, rng)
    state = AdamState.for_params(
        params, hyper.learning_rate, hyper.beta1, hyper.beta2, hyper.eps_hat
    )

    report = TrainReport()
    best_nmse = np.inf
    best_params = params.copy()
    n = train_ds.n_samples

    for epoch in range(1, hyper.max_epochs + 1):
        perm = shuffle_rng.permutation(n)
        sq_err_sum = 0.0
        entry_count = 0
        for start in range(0, n, hyper.batch_size):
            idx = perm[start : start + hyper.batch_size]
            xb = x_train[idx]
            tb = t_train[idx]
            pred, cache = forward(params, xb)
            loss, dloss = mse_loss(pred, tb)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch)
            grads = backward(params, cache, dloss)
            adam_step(params, grads, state)
            sq_err_sum += loss * pred.size
            entry_count += pred.size
        report.train_loss.append(sq_err_sum / entry_count)

        val_pred, _ = forward(params, x_val)
        h_hat = _rows_to_complex(invert_normalizer(tgt_nrm, val_pred))
        val_nmse = ensemble_nmse(h_hat, h_val)
        report.val_nmse.append(val_nmse)
        report.val_nmse_db.append(nmse_db(val_nmse))
        report.epochs_run = epoch

        if val_nmse < best_nmse:
            best_nmse = val_nmse
            best_params = params.copy()
            report.best_epoch = epoch
        elif epoch - report.best_epoch > hyper.patience:
            report.stopped_early = True
            break

    return best_params, normalizers, report


def predict(
    params: MlpParams, normalizers: Normalizers, pilot_samples: np.ndarray
) -> np.ndarray:
    """Estimate the complex port-domain channel from one stacked pilot vector.

    Pipeline: pack -> feature-normalize with training statistics -> forward
    -> de-normalize with target statistics -> unpack.
    """
    packed = pack_complex(pilot_samples)
    x = apply_normalizer(normalizers.features, packed[None, :])
    y, _ = forward(params, x)
    return unpack_complex(invert_normalizer(normalizers.targets, y)[0])


def predict_batch(
    params: MlpParams, normalizers: Normalizers, pilot_matrix: np.ndarray
) -> np.ndarray:
    """Vectorized :func:`predict` over rows of a complex pilot matrix."""
    pilot_matrix = np.asarray(pilot_matrix)
    packed = np.concatenate([pilot_matrix.real, pilot_matrix.imag], axis=1)
    x = apply_normalizer(normalizers.features, packed.astype(float))
    y, _ = forward(params, x)
    return _rows_to_complex(invert_normalizer(normalizers.targets, y))


def report_to_csv(report: TrainReport) -> str:
    """Per-epoch convergence trace: epoch, train_loss, val_nmse_db."""
    lines = ["epoch,train_loss,val_nmse_db"]
    for i in range(report.epochs_run):
        lines.append(
            f"{i + 1},{report.train_loss[i]:.6g},{report.val_nmse_db[i]:.6g}"
        )
    return "\n".join(lines) + "\n"


# -- model persistence --------------------------------------------------------

_MODEL_HEADER = struct.Struct("<4sHIII")


def save_model(path, params: MlpParams, normalizers: Normalizers) -> None:
    """Binary model file: dims, both normalizers, all parameters as
    little-endian float64, integrity checksum at the end."""
    d_in, hidden, d_out = params.dims()
    if normalizers.features.width != d_in or normalizers.targets.width != d_out:
        raise ValueError("normalizer widths do not match parameter dims")
    blob = bytearray()
    blob += _MODEL_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, d_in, hidden, d_out)
    blob += struct.pack("<dd", normalizers.features.epsilon, normalizers.targets.epsilon)
    for vec in (
        normalizers.features.mean,
        normalizers.features.std,
        normalizers.targets.mean,
        normalizers.targets.std,
    ):
        blob += np.ascontiguousarray(vec, dtype="<f8").tobytes()
    for name in _PARAM_FIELDS:
        blob += np.ascontiguousarray(getattr(params, name), dtype="<f8").tobytes()
    checksum = hashlib.sha256(bytes(blob)).digest()
    with open(path, "wb") as fh:
        fh.write(bytes(blob))
        fh.write(checksum)


def load_model(path) -> tuple[MlpParams, Normalizers]:
    """Inverse of :func:`save_model` with magic/version/checksum validation."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _MODEL_HEADER.size + 32:
        raise FileFormatError(f"{path}: file too short for a model header")
    body, checksum = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != checksum:
        raise ChecksumError(f"{path}: model checksum mismatch (corrupt or truncated)")
    magic, version, d_in, hidden, d_out = _MODEL_HEADER.unpack(body[: _MODEL_HEADER.size])
    if magic != MODEL_MAGIC:
        raise FileFormatError(f"{path}: bad magic {magic!r}, expected {MODEL_MAGIC!r}")
    if version != MODEL_VERSION:
        raise FileFormatError(f"{path}: unsupported version {version}")
    offset = _MODEL_HEADER.size
    feat_eps, tgt_eps = struct.unpack_from("<dd", body, offset)
    offset += 16

    def take(count: int) -> np.ndarray:
        nonlocal offset
        out = np.frombuffer(body, dtype="<f8", count=count, offset=offset).copy()
        offset += 8 * count
        return out

    feat_nrm = Normalizer(take(d_in), take(d_in), feat_eps)
    tgt_nrm = Normalizer(take(d_out), take(d_out), tgt_eps)
    shapes = [
        (hidden, d_in),
        (hidden,),
        (hidden, hidden),
        (hidden,),
        (d_out, hidden),
        (d_out,),
    ]
    arrays = [take(int(np.prod(s))).reshape(s) for s in shapes]
    if offset != len(body):
        raise FileFormatError(f"{path}: trailing bytes after model payload")
    return MlpParams(*arrays), Normalizers(feat_nrm, tgt_nrm)
