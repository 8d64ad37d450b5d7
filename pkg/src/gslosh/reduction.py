"""Grouped sparse autoencoders, the linear POD baseline, and latent assembly.

Each of the five field groups gets its own autoencoder with an L1 penalty
on the bottleneck, so unused latent channels collapse during training and
the data's intrinsic dimensionality emerges on its own. The surviving
channels of the five groups are concatenated, in a fixed and versioned
order, into the latent state that the downstream integrator and sequence
encoder operate on.

Loss conventions (documented once, used everywhere): the reconstruction
term is the mean over snapshots of the squared-error sum across
components; the sparsity term is the mean over snapshots of the L1 norm
of the bottleneck activations.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .data import GROUPS
from .exceptions import ConfigurationError, TrainingError
from .nn import Adam, DenseNet, LrSchedule, mlp
from .validation import as_matrix

LATENT_MAP_VERSION = "gslosh-latent/1"

# paper-scale training defaults per group: (lr, wd, sparsity weight)
SAE_GROUP_DEFAULTS = {
    "q": (1e-4, 1e-6, 1e-3),
    "v": (1e-4, 1e-5, 1e-3),
    "e": (1e-4, 1e-5, 1e-4),
    "sigma": (1e-4, 1e-5, 5e-3),
    "tau": (1e-3, 1e-6, 5e-3),
}

# paper-scale architectures per group: (hidden widths, bottleneck)
SAE_GROUP_ARCHITECTURES = {
    "q": ((120, 120), 20),
    "v": ((200, 200, 200, 200), 20),
    "e": ((40, 40, 40), 10),
    "sigma": ((200, 200, 200), 20),
    "tau": ((200, 200, 200), 20),
}


def scaled_hidden_widths(paper_widths, group_dim, paper_dim, floor=24):
    """Shrink hidden widths proportionally with the group dimension."""
    ratio = group_dim / paper_dim
    return tuple(max(floor, int(round(w * ratio))) for w in paper_widths)


class SparseAutoencoder(BaseEstimator, TransformerMixin):
    """Autoencoder with an L1 bottleneck penalty, mirrored decoder.

    The encoder chain runs input -> hidden widths -> bottleneck with
    linear first/last layers and relu in between; the decoder uses the
    exact reverse widths. ``fit`` expects already-normalized data.
    """

    def __init__(
        self,
        bottleneck=20,
        hidden=(120, 120),
        sparsity_weight=1e-3,
        learning_rate=1e-4,
        weight_decay=1e-6,
        epochs=200,
        batch_size=64,
        lr_milestones=((1000, 0.1), (3000, 0.1)),
        seed=0,
        group="",
    ):
        self.bottleneck = bottleneck
        self.hidden = hidden
        self.sparsity_weight = sparsity_weight
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr_milestones = lr_milestones
        self.seed = seed
        self.group = group

    def _build(self, d_in):
        rng = np.random.default_rng(self.seed)
        enc_dims = (d_in, *self.hidden, self.bottleneck)
        dec_dims = tuple(reversed(enc_dims))
        self.encoder_ = mlp(enc_dims, rng)
        self.decoder_ = mlp(dec_dims, rng)

    def _loss_and_grads(self, batch):
        n = batch.shape[0]
        latent = self.encoder_.forward(batch, remember=True)
        recon = self.decoder_.forward(latent, remember=True)
        diff = recon - batch
        mse = float(np.sum(diff * diff) / n)
        reg = float(np.sum(np.abs(latent)) / n)
        dec_grads, dlatent = self.decoder_.backward(2.0 * diff / n)
        dlatent = dlatent + self.sparsity_weight * np.sign(latent) / n
        enc_grads, _ = self.encoder_.backward(dlatent)
        return mse, reg, enc_grads + dec_grads

    def fit(self, X, y=None):
        X = as_matrix(X, name="training batch")
        self._build(X.shape[1])
        params = self.encoder_.parameters() + self.decoder_.parameters()
        opt = Adam(params, lr=self.learning_rate, weight_decay=self.weight_decay)
        schedule = LrSchedule(self.lr_milestones)
        rng = np.random.default_rng(self.seed + 1)
        n = X.shape[0]
        batch = self.batch_size or n
        history = []
        initial_total = None
        for epoch in range(self.epochs):
            schedule.apply(opt, epoch)
            order = rng.permutation(n) if batch < n else np.arange(n)
            mse_acc = reg_acc = 0.0
            for start in range(0, n, batch):
                idx = order[start : start + batch]
                mse, reg, grads = self._loss_and_grads(X[idx])
                opt.step(params, grads, context=f"group {self.group} epoch {epoch}")
                mse_acc += mse * len(idx)
                reg_acc += reg * len(idx)
            mse_epoch = mse_acc / n
            reg_epoch = reg_acc / n
            total = mse_epoch + self.sparsity_weight * reg_epoch
            history.append((epoch, mse_epoch, reg_epoch, total))
            if initial_total is None:
                initial_total = total
            elif total > 1e3 * max(initial_total, 1e-12):
                raise TrainingError(
                    f"sae group {self.group!r} diverged at epoch {epoch}: "
                    f"loss {total:.3e} vs initial {initial_total:.3e}"
                )
        self.history_ = np.array(history)
        return self

    def transform(self, X):
        self._check_fitted()
        return self.encoder_.forward(np.asarray(X, dtype=np.float64))

    def inverse_transform(self, Z):
        self._check_fitted()
        return self.decoder_.forward(np.asarray(Z, dtype=np.float64))

    def loss(self, X):
        """(total, mse, reg) on a batch, without touching training state."""
        X = as_matrix(X, name="batch")
        self._check_fitted()
        latent = self.encoder_.forward(X)
        recon = self.decoder_.forward(latent)
        if latent.ndim == 1:
            latent = latent[None, :]
            recon = recon[None, :]
        n = X.shape[0]
        mse = float(np.sum((recon - X) ** 2) / n)
        reg = float(np.sum(np.abs(latent)) / n)
        return mse + self.sparsity_weight * reg, mse, reg

    def get_weights(self):
        self._check_fitted()
        return [p.copy() for p in self.encoder_.parameters() + self.decoder_.parameters()]

    def set_weights(self, arrays, d_in):
        self._build(d_in)
        params = self.encoder_.parameters() + self.decoder_.parameters()
        if len(arrays) != len(params):
            raise ConfigurationError("weight block does not match architecture")
        for p, a in zip(params, arrays):
            if p.shape != a.shape:
                raise ConfigurationError(
                    f"weight shape mismatch: expected {p.shape}, got {a.shape}"
                )
            p[...] = a
        return self

    def _check_fitted(self):
        if not hasattr(self, "encoder_"):
            raise ConfigurationError("autoencoder used before fit")


def sae_loss(batch, model):
    """(total, mse, reg) of a batch under a trained autoencoder."""
    return model.loss(batch)


def measure_active_dims(model, X, eps=1e-3):
    """Count latent channels whose variation exceeds ``eps`` of the largest.

    A channel is active when its standard deviation over the dataset is
    above ``eps`` times the largest channel standard deviation.
    """
    return len(active_channels(model, X, eps))


def active_channels(model, X, eps=1e-3):
    latent = model.transform(as_matrix(X, name="data"))
    stds = latent.std(axis=0)
    top = stds.max()
    if top <= 0.0:
        return np.array([], dtype=int)
    return np.flatnonzero(stds > eps * top)


class PodReducer(BaseEstimator, TransformerMixin):
    """Truncated SVD of mean-centered snapshots: the optimal linear baseline."""

    def __init__(self, n_modes=10):
        self.n_modes = n_modes

    def fit(self, X, y=None):
        X = as_matrix(X, name="snapshot matrix")
        if self.n_modes < 1 or self.n_modes > min(X.shape):
            raise ConfigurationError(
                f"n_modes must be in [1, {min(X.shape)}], got {self.n_modes}"
            )
        self.mean_ = X.mean(axis=0)
        centered = X - self.mean_
        _, s, vt = np.linalg.svd(centered, full_matrices=False)
        self.singular_values_ = s
        tol = max(X.shape) * np.finfo(np.float64).eps * (s[0] if s.size else 0.0)
        rank = int(np.sum(s > tol))
        if self.n_modes > rank:
            warnings.warn(
                f"requested {self.n_modes} modes but data rank is {rank}; "
                "extra modes carry no variance",
                stacklevel=2,
            )
        self.modes_ = vt[: self.n_modes].T
        return self

    def transform(self, X):
        self._check_fitted()
        return (np.asarray(X, dtype=np.float64) - self.mean_) @ self.modes_

    def inverse_transform(self, Z):
        self._check_fitted()
        return np.asarray(Z, dtype=np.float64) @ self.modes_.T + self.mean_

    def reconstruction_error(self, X):
        """Mean over snapshots of the squared residual norm."""
        X = as_matrix(X, name="snapshot matrix")
        recon = self.inverse_transform(self.transform(X))
        return float(np.sum((X - recon) ** 2) / X.shape[0])

    def _check_fitted(self):
        if not hasattr(self, "modes_"):
            raise ConfigurationError("pod reducer used before fit")


@dataclass
class LatentMap:
    """Versioned layout of the concatenated latent state.

    ``active`` lists the surviving bottleneck channels per group (fixed
    group order q, v, e, sigma, tau); retained channels are standardized
    with ``mean``/``scale``. ``inactive_fill`` stores the training mean of
    collapsed channels so decoding can reconstruct the full bottleneck
    vector each decoder expects.
    """

    active: dict
    mean: np.ndarray
    scale: np.ndarray
    inactive_fill: dict
    group_order: tuple = GROUPS
    version: str = LATENT_MAP_VERSION

    def __post_init__(self):
        if tuple(self.group_order) != GROUPS:
            raise ConfigurationError(
                f"latent group order {self.group_order} does not match {GROUPS}"
            )
        if self.version != LATENT_MAP_VERSION:
            raise ConfigurationError(
                f"latent map version {self.version!r} is not {LATENT_MAP_VERSION!r}"
            )

    @property
    def dim(self):
        return sum(len(idx) for idx in self.active.values())

    @property
    def slices(self):
        out = {}
        start = 0
        for name in self.group_order:
            stop = start + len(self.active[name])
            out[name] = slice(start, stop)
            start = stop
        return out

    def to_jsonable(self):
        return {
            "version": self.version,
            "group_order": list(self.group_order),
            "active": {k: [int(i) for i in v] for k, v in self.active.items()},
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "inactive_fill": {k: list(map(float, v)) for k, v in self.inactive_fill.items()},
        }

    @classmethod
    def from_jsonable(cls, doc):
        return cls(
            active={k: np.asarray(v, dtype=int) for k, v in doc["active"].items()},
            mean=np.asarray(doc["mean"], dtype=np.float64),
            scale=np.asarray(doc["scale"], dtype=np.float64),
            inactive_fill={
                k: np.asarray(v, dtype=np.float64)
                for k, v in doc["inactive_fill"].items()
            },
            group_order=tuple(doc["group_order"]),
            version=doc["version"],
        )


def build_latent_map(saes, grouped_normalized, eps=1e-3):
    """Measure active channels on training data and fix the latent layout."""
    active = {}
    fills = {}
    columns = []
    for name in GROUPS:
        latent = saes[name].transform(grouped_normalized[name])
        idx = active_channels(saes[name], grouped_normalized[name], eps)
        if len(idx) == 0:
            # never let a group vanish entirely: keep its most active channel
            idx = np.array([int(np.argmax(latent.std(axis=0)))])
        active[name] = idx
        inactive = np.setdiff1d(np.arange(latent.shape[1]), idx)
        fills[name] = latent[:, inactive].mean(axis=0) if len(inactive) else np.zeros(0)
        columns.append(latent[:, idx])
    stacked = np.concatenate(columns, axis=1)
    mean = stacked.mean(axis=0)
    scale = stacked.std(axis=0)
    scale = np.where(scale <= 0.0, 1.0, scale)
    return LatentMap(active=active, mean=mean, scale=scale, inactive_fill=fills)


class FullStateCodec:
    """Encode/decode between grouped full states and the latent state."""

    def __init__(self, saes, normalizer, latent_map):
        missing = [g for g in GROUPS if g not in saes]
        if missing:
            raise ConfigurationError(f"codec is missing autoencoders for {missing}")
        self.saes = saes
        self.normalizer = normalizer
        self.latent_map = latent_map

    @property
    def dim(self):
        return self.latent_map.dim

    def encode(self, grouped_raw):
        """Grouped field matrices -> standardized latent matrix (n, d)."""
        normalized = self.normalizer.transform(grouped_raw)
        columns = []
        for name in GROUPS:
            latent = self.saes[name].transform(normalized[name])
            if latent.ndim == 1:
                latent = latent[None, :]
            columns.append(latent[:, self.latent_map.active[name]])
        stacked = np.concatenate(columns, axis=1)
        return (stacked - self.latent_map.mean) / self.latent_map.scale

    def decode(self, latent):
        """Latent matrix (n, d) -> grouped field matrices, denormalized."""
        latent = np.atleast_2d(np.asarray(latent, dtype=np.float64))
        raw = latent * self.latent_map.scale + self.latent_map.mean
        normalized = {}
        for name, sl in self.latent_map.slices.items():
            sae = self.saes[name]
            bottleneck = sae.bottleneck
            full = np.empty((latent.shape[0], bottleneck))
            idx = self.latent_map.active[name]
            inactive = np.setdiff1d(np.arange(bottleneck), idx)
            full[:, idx] = raw[:, sl]
            if len(inactive):
                full[:, inactive] = self.latent_map.inactive_fill[name]
            normalized[name] = sae.inverse_transform(full)
        return self.normalizer.inverse_transform(normalized)

    def encode_snapshot(self, snapshot):
        grouped = {name: snapshot.group(name)[None, :] for name in GROUPS}
        return self.encode(grouped)[0]


def encode_full(snapshot, codec):
    """Latent vector of one snapshot."""
    return codec.encode_snapshot(snapshot)


def decode_full(latent, codec):
    """Grouped fields of one latent vector."""
    return {name: arr[0] for name, arr in codec.decode(latent).items()}
