"""Context-window MLP acoustic model with manual backprop and plain SGD.

Maps a T x d feature sequence to T x (n_symbols + 1) log-probabilities:
each frame sees +/- ``context`` neighboring frames (zero padded at the
edges), one tanh hidden layer, log-softmax output.  Small enough that
hand-written reverse mode stays readable; big enough to learn the toy
corpus.
"""

import json
import logging
from dataclasses import dataclass, asdict, replace

import numpy as np

from .ctc import ctc_loss, logits_gradient
from .errors import DivergedError, InfeasibleAlignment, InvalidInput, ShapeError
from .mh import HypothesisSet, mh_ctc_loss

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"MHCTCKP1"


@dataclass(frozen=True)
class ModelConfig:
    feat_dim: int
    n_outputs: int
    context: int = 4
    hidden: int = 128
    seed: int = 0


@dataclass
class ModelParams:
    config: ModelConfig
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    lineage: tuple = ()

    def copy(self):
        return ModelParams(
            config=self.config,
            w1=self.w1.copy(),
            b1=self.b1.copy(),
            w2=self.w2.copy(),
            b2=self.b2.copy(),
            lineage=self.lineage,
        )

    def tensors(self):
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 10
    batch_size: int = 4
    seed: int = 0
    grad_clip: float = 5.0


def init_model(config):
    """Xavier-uniform initialization, fully determined by config.seed."""
    rng = np.random.default_rng(config.seed)
    d_in = config.feat_dim * (2 * config.context + 1)
    lim1 = np.sqrt(6.0 / (d_in + config.hidden))
    lim2 = np.sqrt(6.0 / (config.hidden + config.n_outputs))
    return ModelParams(
        config=config,
        w1=rng.uniform(-lim1, lim1, size=(d_in, config.hidden)),
        b1=np.zeros(config.hidden),
        w2=rng.uniform(-lim2, lim2, size=(config.hidden, config.n_outputs)),
        b2=np.zeros(config.n_outputs),
        lineage=(f"init:seed={config.seed}",),
    )


def stack_context(x, context):
    """T x d -> T x d*(2w+1) by concatenating +/- w frames, zero padded."""
    T, d = x.shape
    w = context
    padded = np.zeros((T + 2 * w, d))
    padded[w : w + T] = x
    cols = [padded[i : i + T] for i in range(2 * w + 1)]
    return np.concatenate(cols, axis=1)


def _check_features(params, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.config.feat_dim:
        raise ShapeError(
            f"expected T x {params.config.feat_dim} features, got {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise InvalidInput("features contain non-finite values")
    return x


def _forward_activations(params, x):
    """Validated input plus every intermediate needed for backprop."""
    x = _check_features(params, x)
    xc = stack_context(x, params.config.context)
    h = np.tanh(xc @ params.w1 + params.b1)
    u = h @ params.w2 + params.b2
    logp = u - np.logaddexp.reduce(u, axis=1, keepdims=True)
    return xc, h, logp


def forward(params, x):
    """Per-frame log-probabilities, rows normalized by log-softmax."""
    return _forward_activations(params, x)[2]


def _backward_from(params, xc, h, logp, grad_logp):
    grad_logp = np.asarray(grad_logp, dtype=np.float64)
    if grad_logp.shape != logp.shape:
        raise ShapeError(
            f"grad_logp shape {grad_logp.shape} != output shape {logp.shape}"
        )
    du = logits_gradient(logp, grad_logp)
    dh = du @ params.w2.T
    dz = dh * (1.0 - h * h)
    return {
        "w1": xc.T @ dz,
        "b1": dz.sum(axis=0),
        "w2": h.T @ du,
        "b2": du.sum(axis=0),
    }


def backward(params, x, grad_logp):
    """Gradients of the loss w.r.t. every parameter.

    ``grad_logp`` is d(loss)/d(logp) at the forward output; the chain rule
    runs back through log-softmax, the affine output layer, tanh, and the
    affine input layer.
    """
    xc, h, logp = _forward_activations(params, x)
    return _backward_from(params, xc, h, logp, grad_logp)


def _utterance_loss(params, x, target):
    """Loss and parameter gradient for one utterance.

    ``target`` is either a transcription (plain CTC) or a HypothesisSet
    (multi-hypothesis CTC).
    """
    xc, h, logp = _forward_activations(params, x)
    if isinstance(target, HypothesisSet):
        res = mh_ctc_loss(logp, target)
    else:
        res = ctc_loss(logp, target)
    return res.loss, _backward_from(params, xc, h, logp, res.grad)


def sgd_train(params, dataset, cfg):
    """Mini-batch SGD on the summed loss over each batch.

    ``dataset`` is a list of (features, target) pairs; targets may mix
    transcriptions and HypothesisSets.  Infeasible utterances are skipped
    with a log message.  Returns (new params, per-epoch mean-loss curve);
    fully deterministic given cfg.seed.
    """
    params = params.copy()
    if cfg.epochs == 0:
        return params, []
    rng = np.random.default_rng(cfg.seed)
    curve = []
    n = len(dataset)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            grads = {k: np.zeros_like(v) for k, v in params.tensors().items()}
            used = 0
            for i in batch:
                x, target = dataset[i]
                try:
                    loss, g = _utterance_loss(params, x, target)
                except InfeasibleAlignment as exc:
                    log.warning("skipping infeasible utterance %d: %s", i, exc)
                    continue
                losses.append(loss)
                for k in grads:
                    grads[k] += g[k]
                used += 1
            if used == 0:
                continue
            if cfg.grad_clip is not None:
                norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
                if norm > cfg.grad_clip:
                    scale = cfg.grad_clip / norm
                    for k in grads:
                        grads[k] *= scale
            params.w1 -= cfg.learning_rate * grads["w1"]
            params.b1 -= cfg.learning_rate * grads["b1"]
            params.w2 -= cfg.learning_rate * grads["w2"]
            params.b2 -= cfg.learning_rate * grads["b2"]
        mean_loss = float(np.mean(losses)) if losses else float("nan")
        if losses and not np.isfinite(mean_loss):
            raise DivergedError(f"non-finite loss at epoch {epoch}", epoch=epoch)
        curve.append(mean_loss)
    return params, curve


def with_lineage(params, step):
    """Return params with one lineage step appended (checkpoint provenance)."""
    return replace(params.copy(), lineage=params.lineage + (step,))


def save_checkpoint(params, path, alphabet_symbols=()):
    """Deterministic binary container: magic, JSON header, raw tensor bytes."""
    tensors = params.tensors()
    header = {
        "version": 1,
        "config": asdict(params.config),
        "alphabet": list(alphabet_symbols),
        "lineage": list(params.lineage),
        "tensors": [
            {"name": k, "shape": list(v.shape), "dtype": str(v.dtype)}
            for k, v in tensors.items()
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(len(blob).to_bytes(8, "little"))
        f.write(blob)
        for k in tensors:
            f.write(np.ascontiguousarray(tensors[k]).tobytes())


def load_checkpoint(path):
    """Inverse of save_checkpoint; bit-exact round trip."""
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != CHECKPOINT_MAGIC:
            raise InvalidInput(f"{path}: not a checkpoint file")
        n = int.from_bytes(f.read(8), "little")
        header = json.loads(f.read(n))
        tensors = {}
        for spec in header["tensors"]:
            shape = tuple(spec["shape"])
            dtype = np.dtype(spec["dtype"])
            count = int(np.prod(shape)) if shape else 1
            buf = f.read(count * dtype.itemsize)
            tensors[spec["name"]] = np.frombuffer(buf, dtype=dtype).reshape(shape).copy()
    config = ModelConfig(**header["config"])
    params = ModelParams(
        config=config,
        w1=tensors["w1"],
        b1=tensors["b1"],
        w2=tensors["w2"],
        b2=tensors["b2"],
        lineage=tuple(header["lineage"]),
    )
    return params, tuple(header["alphabet"])
