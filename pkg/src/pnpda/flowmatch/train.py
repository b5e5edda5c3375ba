"""OT Bayesian flow-matching training.

Each minibatch pairs Gaussian source draws ``z0`` with analysis states by
an exact assignment on the background-penalised cost, regresses the
network onto the straight-line velocities ``xa_j(i) - z0_i`` at random
flow times, and takes an AdamW step.  Validation couplings are drawn once
so the plateau scheduler and early stopping see a deterministic signal.
"""

from dataclasses import asdict, dataclass, field
import logging

import numpy as np

from ..errors import NonFiniteLoss
from ..transport import augmented_cost, emd_assignment
from .net import VelocityNet

__all__ = [
    "PairDataset",
    "TrainConfig",
    "TrainingBatch",
    "AdamState",
    "PlateauScheduler",
    "make_training_batch",
    "adamw_step",
    "normalization_stats",
    "train",
]

log = logging.getLogger(__name__)


@dataclass
class PairDataset:
    xb: np.ndarray
    xa: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.xb = np.atleast_2d(np.asarray(self.xb, dtype=float))
        self.xa = np.atleast_2d(np.asarray(self.xa, dtype=float))
        if self.xb.shape != self.xa.shape:
            raise ValueError("background and analysis arrays differ in shape")

    def __len__(self):
        return self.xb.shape[0]

    @property
    def dim(self):
        return self.xb.shape[1]


@dataclass
class TrainConfig:
    widths: tuple = (32, 64, 64, 32)
    d_tau: int = 32
    lr: float = 3e-4
    weight_decay: float = 1e-5
    batch: int = 32
    max_epochs: int = 1000
    plateau_factor: float = 0.5
    plateau_patience: int = 10
    early_stop_patience: int = 50
    beta: float = 1000.0
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if min(self.lr, self.batch, self.max_epochs, self.plateau_factor) <= 0:
            raise ValueError("training hyperparameters must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        self.widths = tuple(int(w) for w in self.widths)

    @classmethod
    def from_dict(cls, d):
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def to_dict(self):
        out = asdict(self)
        out["widths"] = list(self.widths)
        return out


@dataclass
class TrainingBatch:
    xb: np.ndarray
    z0: np.ndarray
    xa: np.ndarray  # matched targets xa_{j(i)}
    tau: np.ndarray
    z_tau: np.ndarray
    vstar: np.ndarray
    perm: np.ndarray


def make_training_batch(xb, xa, beta, rng, tau=None):
    """Couple a minibatch of pairs with fresh Gaussian source samples.

    With ``beta > 0`` the coupling is the exact assignment on
    ``|z0_i - xa_j|^2 + beta |xb_i - xb_j|^2``; with ``beta == 0`` pairs
    keep their own index.  ``tau`` overrides the uniform flow-time draw.
    """
    xb = np.atleast_2d(np.asarray(xb, dtype=float))
    xa = np.atleast_2d(np.asarray(xa, dtype=float))
    N, d = xb.shape
    if N < 1:
        raise ValueError("empty batch")
    z0 = rng.standard_normal((N, d))
    t = rng.random(N)
    if tau is not None:
        t = np.broadcast_to(np.asarray(tau, dtype=float), (N,)).copy()
    if beta > 0:
        perm = emd_assignment(augmented_cost(z0, xb, xa, beta))
    else:
        perm = np.arange(N)
    target = xa[perm]
    vstar = target - z0
    z_tau = z0 + t[:, None] * vstar
    return TrainingBatch(xb, z0, target, t, z_tau, vstar, perm)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n), 0)


def adamw_step(params, grads, state, lr, weight_decay, beta1=0.9, beta2=0.999, eps=1e-8):
    """In-place AdamW update of the flat ``params`` array (also returned)."""
    state.t += 1
    if weight_decay:
        params *= 1.0 - lr * weight_decay
    state.m *= beta1
    state.m += (1.0 - beta1) * grads
    state.v *= beta2
    state.v += (1.0 - beta2) * grads * grads
    mhat = state.m / (1.0 - beta1**state.t)
    vhat = state.v / (1.0 - beta2**state.t)
    params -= lr * mhat / (np.sqrt(vhat) + eps)
    return params, state


class PlateauScheduler:
    """Multiply the learning rate by ``factor`` after more than ``patience``
    epochs without a relative improvement of ``threshold``."""

    def __init__(self, lr, factor=0.5, patience=10, threshold=1e-4):
        self.lr = lr
        self.factor = factor
        self.patience = patience
        self.threshold = threshold
        self.best = np.inf
        self.num_bad = 0

    def step(self, metric):
        if metric < self.best * (1.0 - self.threshold):
            self.best = metric
            self.num_bad = 0
        else:
            self.num_bad += 1
        if self.num_bad > self.patience:
            self.lr *= self.factor
            self.num_bad = 0
            return True
        return False


def normalization_stats(xb, xa):
    """Per-component mean and std pooled over backgrounds and analyses."""
    both = np.concatenate([xb, xa], axis=0)
    mean = both.mean(axis=0)
    std = both.std(axis=0)
    std = np.where(np.isfinite(std) & (std > 0), std, 1.0)
    return mean, std


def _split(n, val_fraction, rng):
    order = rng.permutation(n)
    n_val = int(round(val_fraction * n))
    if n >= 2:
        n_val = min(max(n_val, 1), n - 1)
    else:
        n_val = 0
    return order[n_val:], order[:n_val]


def _chunks(idx, size):
    return [idx[i : i + size] for i in range(0, len(idx), size)]


def train(dataset, cfg, rng, log_every=0):
    """Fit a velocity network; returns ``(best_net, history)``.

    ``history`` holds one dict per epoch with ``train_loss``, ``val_loss``
    and ``lr``.
    """
    train_idx, val_idx = _split(len(dataset), cfg.val_fraction, rng)
    mean, std = normalization_stats(dataset.xb[train_idx], dataset.xa[train_idx])
    xb = (dataset.xb - mean) / std
    xa = (dataset.xa - mean) / std

    net = VelocityNet.initialize(dataset.dim, cfg.widths, rng, cfg.d_tau)
    net.norm_mean = mean
    net.norm_std = std

    val_sets = [make_training_batch(xb[c], xa[c], cfg.beta, rng) for c in _chunks(val_idx, cfg.batch)]
    n_val = sum(len(b.tau) for b in val_sets)

    def val_loss():
        total = 0.0
        for b in val_sets:
            v = net.forward(b.z_tau, b.tau, b.xb)
            total += float(np.sum((v - b.vstar) ** 2))
        return total / n_val

    state = AdamState.zeros(net.size)
    sched = PlateauScheduler(cfg.lr, cfg.plateau_factor, cfg.plateau_patience)
    best = np.inf
    best_flat = net.flat.copy()
    since_best = 0
    history = []
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(train_idx)
        total = 0.0
        for chunk in _chunks(order, cfg.batch):
            b = make_training_batch(xb[chunk], xa[chunk], cfg.beta, rng)
            loss, grad = net.loss_and_grad(b.z_tau, b.tau, b.xb, b.vstar)
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise NonFiniteLoss(
                    f"non-finite loss {loss} at epoch {epoch}, lr {sched.lr:.3g}"
                )
            adamw_step(net.flat, grad, state, sched.lr, cfg.weight_decay)
            total += loss * len(chunk)
        tl = total / len(train_idx)
        vl = val_loss() if n_val else tl
        history.append({"epoch": epoch, "train_loss": tl, "val_loss": vl, "lr": sched.lr})
        if log_every and epoch % log_every == 0:
            log.info("epoch %d train %.5f val %.5f lr %.2e", epoch, tl, vl, sched.lr)
        sched.step(vl)
        if vl < best:
            best = vl
            best_flat[...] = net.flat
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.early_stop_patience:
                break
    net.flat[...] = best_flat
    net.n_forward = net.n_backward = 0
    return net, history
