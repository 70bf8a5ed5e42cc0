"""Supervised (pilot, channel) pair generation, packing, normalization, storage.

Datasets hold raw (unnormalized) rows as 32-bit floats; normalization
statistics are fitted at training time so a stored dataset stays
normalization-agnostic.
"""

from __future__ import annotations

import hashlib
import struct
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .channel_model import draw_channel
from .config import ExperimentConfig, dataset_fingerprint
from .errors import ChecksumError, FileFormatError
from .pilot_system import noise_variance_for_snr, observe

MAGIC = b"FASD"
VERSION = 1
STD_EPSILON = 1e-8  # guard for zero-variance feature dimensions

# magic, version, num_ports, num_antennas, num_slots, n_samples,
# feature_width, target_width
_HEADER = struct.Struct("<4sHIIIQII")

# Scalar SNR keys occupy [0, 2**32); sentinels for the mixed mode and the
# noiseless/zero-signal infinities sit above that range.
_MIXED_STREAM_KEY = 2**32
_POS_INF_KEY = 2**32 + 1
_NEG_INF_KEY = 2**32 + 2


def pack_complex(v: np.ndarray) -> np.ndarray:
    """[Re(v); Im(v)] — all real parts first, then all imaginary parts."""
    v = np.asarray(v)
    return np.concatenate([np.real(v), np.imag(v)]).astype(float)


def unpack_complex(r: np.ndarray) -> np.ndarray:
    """Exact inverse of :func:`pack_complex`; rejects odd-length input."""
    r = np.asarray(r, dtype=float)
    if r.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {r.shape}")
    if r.size % 2 != 0:
        raise ValueError(f"length must be even, got {r.size}")
    k = r.size // 2
    return r[:k] + 1j * r[k:]


@dataclass
class Dataset:
    """Row-aligned packed observations (features) and channels (targets).

    Feature width is 2*P*M, target width 2*N.  The schedule dimensions ride
    along so files are self-describing.
    """

    features: np.ndarray
    targets: np.ndarray
    config_fingerprint: bytes
    num_ports: int
    num_antennas: int
    num_slots: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float32)
        self.targets = np.asarray(self.targets, dtype=np.float32)
        if self.features.ndim != 2 or self.targets.ndim != 2:
            raise ValueError("features and targets must be 2-D matrices")
        if self.features.shape[0] != self.targets.shape[0]:
            raise ValueError(
                f"row mismatch: {self.features.shape[0]} features vs "
                f"{self.targets.shape[0]} targets"
            )
        if len(self.config_fingerprint) != 32:
            raise ValueError("config_fingerprint must be 32 bytes")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]


def sample_stream(master_seed: int, snr_key: int, index: int) -> np.random.Generator:
    """Counter-derived per-sample stream.

    Keyed on (master seed, SNR tag, sample index) so generation order and
    worker count cannot change the output.
    """
    return np.random.default_rng((master_seed, snr_key, index))


def snr_stream_key(snr_db) -> int:
    """Non-negative integer tag entering per-sample stream derivation.

    Scalar SNRs quantize to milli-dB wrapped into the uint32 range (seed
    entropy must be non-negative).
    """
    if isinstance(snr_db, (list, tuple)):
        return _MIXED_STREAM_KEY
    value = float(snr_db)
    if np.isinf(value):
        return _POS_INF_KEY if value > 0 else _NEG_INF_KEY
    return int(round(value * 1000.0)) & 0xFFFFFFFF


def generate_dataset(
    cfg: ExperimentConfig, n_samples: int, snr_db, master_seed: int
) -> Dataset:
    """Draw ``n_samples`` independent (observation, channel) rows.

    ``snr_db`` is a single SNR in dB, or a sequence of SNRs for the mixed
    mode, where each sample draws its SNR uniformly from the list (that
    choice comes first in the per-sample stream, then the channel, then the
    noise).  Output bytes are fully determined by (cfg, n_samples, snr_db,
    master_seed).
    """
    cfg.validate()
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    geometry = cfg.geometry()
    scattering = cfg.scattering()
    schedule = cfg.build_schedule()

    mixed = isinstance(snr_db, (list, tuple))
    snrs = [float(s) for s in snr_db] if mixed else [float(snr_db)]
    variances = [noise_variance_for_snr(s) for s in snrs]
    key = snr_stream_key(snr_db)

    pm = schedule.num_samples
    n_ports = cfg.num_ports
    features = np.empty((n_samples, 2 * pm), dtype=np.float32)
    targets = np.empty((n_samples, 2 * n_ports), dtype=np.float32)
    for i in range(n_samples):
        rng = sample_stream(master_seed, key, i)
        sigma2 = variances[rng.integers(len(variances))] if mixed else variances[0]
        h = draw_channel(scattering, geometry, rng)
        obs = observe(h, schedule, sigma2, rng)
        features[i, :pm] = obs.samples.real
        features[i, pm:] = obs.samples.imag
        targets[i, :n_ports] = h.real
        targets[i, n_ports:] = h.imag
    return Dataset(
        features,
        targets,
        dataset_fingerprint(cfg, snr_db),
        cfg.num_ports,
        cfg.num_antennas,
        cfg.num_slots,
    )


def split(ds: Dataset, rho: float, rng: np.random.Generator) -> tuple[Dataset, Dataset]:
    """Disjoint (train, validation) row partition with |val| = round(rho * n).

    Rows are permuted first; validation takes the head of the permutation.
    """
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie strictly between 0 and 1, got {rho}")
    n = ds.n_samples
    n_val = int(round(rho * n))
    if n_val < 1 or n - n_val < 1:
        raise ValueError(
            f"degenerate split: {n} rows at rho={rho} gives {n_val} validation rows"
        )
    perm = rng.permutation(n)
    val_idx = perm[:n_val]
    train_idx = perm[n_val:]
    make = lambda idx: replace(
        ds, features=ds.features[idx].copy(), targets=ds.targets[idx].copy()
    )
    return make(train_idx), make(val_idx)


@dataclass
class Normalizer:
    """Per-dimension standard-score transform with a zero-variance guard."""

    mean: np.ndarray
    std: np.ndarray
    epsilon: float = STD_EPSILON

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.std = np.asarray(self.std, dtype=float)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValueError("mean and std must be 1-D vectors of equal length")
        if np.any(self.std < 0):
            raise ValueError("std entries must be >= 0")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    @property
    def width(self) -> int:
        return self.mean.size

    def scale(self) -> np.ndarray:
        return np.maximum(self.std, self.epsilon)


def fit_normalizer(train_matrix: np.ndarray, epsilon: float = STD_EPSILON) -> Normalizer:
    """Per-dimension mean and population standard deviation of training rows."""
    m = np.asarray(train_matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] < 2:
        raise ValueError(
            f"need a 2-D matrix with at least 2 rows, got shape {m.shape}"
        )
    return Normalizer(m.mean(axis=0), m.std(axis=0, ddof=0), epsilon)


def _check_width(nrm: Normalizer, matrix: np.ndarray) -> np.ndarray:
    m = np.asarray(matrix, dtype=float)
    if m.shape[-1] != nrm.width:
        raise ValueError(
            f"width mismatch: normalizer fitted on {nrm.width} dims, got {m.shape[-1]}"
        )
    return m


def apply_normalizer(nrm: Normalizer, matrix: np.ndarray) -> np.ndarray:
    return (_check_width(nrm, matrix) - nrm.mean) / nrm.scale()


def invert_normalizer(nrm: Normalizer, matrix: np.ndarray) -> np.ndarray:
    return _check_width(nrm, matrix) * nrm.scale() + nrm.mean


def save_dataset(ds: Dataset, path) -> None:
    """Bit-exact binary format: fixed header, fingerprint, payload checksum,
    then features and targets as little-endian float32, row-major."""
    feat = np.ascontiguousarray(ds.features, dtype="<f4")
    tgt = np.ascontiguousarray(ds.targets, dtype="<f4")
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        ds.num_ports,
        ds.num_antennas,
        ds.num_slots,
        ds.n_samples,
        feat.shape[1],
        tgt.shape[1],
    )
    payload = feat.tobytes() + tgt.tobytes()
    checksum = hashlib.sha256(payload).digest()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(ds.config_fingerprint)
        fh.write(checksum)
        fh.write(payload)


def load_dataset(path, expected_fingerprint: bytes | None = None) -> Dataset:
    """Inverse of :func:`save_dataset` with integrity checks.

    A fingerprint differing from ``expected_fingerprint`` warns (the file is
    still usable); corrupt or truncated payloads raise ChecksumError.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size + 64:
        raise FileFormatError(f"{path}: file too short for a dataset header")
    magic, version, n_ports, n_ant, n_slots, n_samples, feat_w, tgt_w = _HEADER.unpack(
        raw[: _HEADER.size]
    )
    if magic != MAGIC:
        raise FileFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FileFormatError(f"{path}: unsupported version {version}")
    offset = _HEADER.size
    fingerprint = raw[offset : offset + 32]
    checksum = raw[offset + 32 : offset + 64]
    payload = raw[offset + 64 :]
    expected_bytes = 4 * n_samples * (feat_w + tgt_w)
    if len(payload) != expected_bytes or hashlib.sha256(payload).digest() != checksum:
        raise ChecksumError(f"{path}: payload checksum mismatch (corrupt or truncated)")
    feat_bytes = 4 * n_samples * feat_w
    features = np.frombuffer(payload[:feat_bytes], dtype="<f4").reshape(n_samples, feat_w)
    targets = np.frombuffer(payload[feat_bytes:], dtype="<f4").reshape(n_samples, tgt_w)
    if expected_fingerprint is not None and fingerprint != expected_fingerprint:
        warnings.warn(
            f"{path}: dataset fingerprint does not match the requesting "
            "configuration; proceeding anyway",
            stacklevel=2,
        )
    return Dataset(
        features.copy(), targets.copy(), fingerprint, n_ports, n_ant, n_slots
    )
