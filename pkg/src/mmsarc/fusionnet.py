"""Two-branch fusion network with hand-written backpropagation.

Text branch: one-hot unigrams -> affine -> ReLU (512 units by default).
Image branch: a fixed, precomputed AVR vector (4096 by default) passed
through unchanged.  The two are concatenated (4608), rectified, and mapped by
a single affine layer to a softmax over {non-sarcastic, sarcastic}.

In single-modality modes the concatenation layer is kept and the missing
branch feeds zeros into it.  Training is Nesterov-momentum SGD on the mean
cross-entropy::

    v <- mu * v - lr * grad(theta + mu * v)
    theta <- theta + v
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Mode",
    "NetConfig",
    "NetTrainConfig",
    "FusionNet",
    "NetDataset",
    "forward",
    "loss_and_grads",
    "train",
    "save_checkpoint",
    "load_checkpoint",
]

PARAM_NAMES = ("W_text", "b_text", "W_out", "b_out")
MAGIC = b"mmsarc-net 1\n"


class Mode(str, enum.Enum):
    TEXT_ONLY = "text_only"
    IMAGE_ONLY = "image_only"
    FUSION = "fusion"


@dataclass(frozen=True)
class NetConfig:
    text_in_dim: int
    text_hidden: int = 512
    image_dim: int = 4096
    n_classes: int = 2

    @property
    def concat_dim(self) -> int:
        return self.text_hidden + self.image_dim


@dataclass(frozen=True)
class NetTrainConfig:
    batch_size: int = 128
    epochs: int = 30
    learning_rate: float = 0.01
    momentum: float = 0.9
    seed: int = 0
    mode: Mode = Mode.FUSION

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        object.__setattr__(self, "mode", Mode(self.mode))


@dataclass
class FusionNet:
    config: NetConfig
    params: dict[str, np.ndarray]
    mode: Mode = Mode.FUSION
    history: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        c = self.config
        want = {
            "W_text": (c.text_in_dim, c.text_hidden),
            "b_text": (c.text_hidden,),
            "W_out": (c.concat_dim, c.n_classes),
            "b_out": (c.n_classes,),
        }
        for name, shape in want.items():
            if self.params[name].shape != shape:
                raise ValueError(f"{name} has shape {self.params[name].shape}, expected {shape}")

    @classmethod
    def init(cls, config: NetConfig, seed: int = 0, mode: Mode = Mode.FUSION) -> "FusionNet":
        """Uniform weights in +-1/sqrt(fan_in); zero biases."""
        rng = np.random.default_rng(seed)
        a1 = 1.0 / np.sqrt(config.text_in_dim)
        a2 = 1.0 / np.sqrt(config.concat_dim)
        params = {
            "W_text": rng.uniform(-a1, a1, (config.text_in_dim, config.text_hidden)),
            "b_text": np.zeros(config.text_hidden),
            "W_out": rng.uniform(-a2, a2, (config.concat_dim, config.n_classes)),
            "b_out": np.zeros(config.n_classes),
        }
        return cls(config, params, Mode(mode))

    @classmethod
    def zeros(cls, config: NetConfig, mode: Mode = Mode.FUSION) -> "FusionNet":
        net = cls.init(config, 0, mode)
        for p in net.params.values():
            p[...] = 0.0
        return net

    def topology(self) -> dict[str, int]:
        c = self.config
        return {
            "text_input": c.text_in_dim,
            "text_hidden": c.text_hidden,
            "image_input": c.image_dim,
            "concatenation": c.concat_dim,
            "output": c.n_classes,
        }

    def predict_proba(self, text, avr) -> np.ndarray:
        return forward(self, text, avr)

    def predict(self, text, avr) -> np.ndarray:
        """Class index per row (1 = sarcastic); ties go to class 1."""
        p = forward(self, text, avr)
        return (p[:, 1] >= p[:, 0]).astype(np.int64)


@dataclass
class NetDataset:
    text: np.ndarray  # (n, text_in_dim) one-hot rows
    avr: np.ndarray  # (n, image_dim)
    y: np.ndarray  # (n,) class indices, 1 = sarcastic

    def __post_init__(self):
        self.text = np.asarray(self.text, dtype=np.float64)
        self.avr = np.asarray(self.avr, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if not (len(self.text) == len(self.avr) == len(self.y)):
            raise ValueError("text, avr and y must have the same number of rows")

    def __len__(self):
        return len(self.y)

    def subset(self, idx) -> "NetDataset":
        return NetDataset(self.text[idx], self.avr[idx], self.y[idx])


def _as_batch(net: FusionNet, text, avr) -> tuple[np.ndarray, np.ndarray]:
    c = net.config
    text = np.atleast_2d(np.asarray(text, dtype=np.float64))
    avr = np.atleast_2d(np.asarray(avr, dtype=np.float64))
    if text.shape[1] != c.text_in_dim:
        raise ValueError(f"text input has dim {text.shape[1]}, network expects {c.text_in_dim}")
    if avr.shape[1] != c.image_dim:
        raise ValueError(f"image input has dim {avr.shape[1]}, network expects {c.image_dim}")
    if text.shape[0] != avr.shape[0]:
        raise ValueError("text and image batches differ in size")
    return text, avr


def _forward(params, mode, text, avr):
    a = text @ params["W_text"] + params["b_text"]
    h = np.maximum(a, 0.0)
    if mode is Mode.IMAGE_ONLY:
        h = np.zeros_like(h)
    if mode is Mode.TEXT_ONLY:
        avr = np.zeros_like(avr)
    z = np.concatenate([h, avr], axis=1)
    r = np.maximum(z, 0.0)
    logits = r @ params["W_out"] + params["b_out"]
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=1, keepdims=True)
    return p, (a, z, r, shifted)


def forward(net: FusionNet, text, avr) -> np.ndarray:
    """Class probabilities, shape (batch, n_classes)."""
    text, avr = _as_batch(net, text, avr)
    return _forward(net.params, net.mode, text, avr)[0]


def _loss_and_grads(params, mode, text, avr, y):
    n = len(y)
    p, (a, z, r, shifted) = _forward(params, mode, text, avr)
    log_p = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -log_p[np.arange(n), y].mean()

    d_logits = p.copy()
    d_logits[np.arange(n), y] -= 1.0
    d_logits /= n
    grads = {
        "W_out": r.T @ d_logits,
        "b_out": d_logits.sum(axis=0),
    }
    d_r = d_logits @ params["W_out"].T
    d_z = d_r * (z > 0)
    H = params["b_text"].shape[0]
    if mode is Mode.IMAGE_ONLY:
        d_a = np.zeros_like(a)
    else:
        d_a = d_z[:, :H] * (a > 0)
    grads["W_text"] = text.T @ d_a
    grads["b_text"] = d_a.sum(axis=0)
    return float(loss), grads


def loss_and_grads(net: FusionNet, batch: NetDataset) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch and its gradient for every parameter."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    text, avr = _as_batch(net, batch.text, batch.avr)
    return _loss_and_grads(net.params, net.mode, text, avr, batch.y)


def mean_loss(net: FusionNet, data: NetDataset) -> float:
    return loss_and_grads(net, data)[0]


def train(data: NetDataset, net_config: NetConfig, cfg: NetTrainConfig = NetTrainConfig()) -> FusionNet:
    """Train a freshly initialized network for exactly ``cfg.epochs`` epochs.

    Minibatches are drawn without replacement from a seeded permutation each
    epoch (the last batch of an epoch may be smaller).  The mean training
    loss after every epoch is kept in ``net.history``.
    """
    if len(np.unique(data.y)) < 2:
        raise ValueError("training labels contain a single class")
    rng = np.random.default_rng(cfg.seed)
    net = FusionNet.init(net_config, seed=int(rng.integers(2**63)), mode=cfg.mode)
    text, avr = _as_batch(net, data.text, data.avr)
    y = data.y
    mu, lr = cfg.momentum, cfg.learning_rate
    velocity = {k: np.zeros_like(v) for k, v in net.params.items()}

    for _ in range(cfg.epochs):
        perm = rng.permutation(len(y))
        for start in range(0, len(y), cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            ahead = {k: net.params[k] + mu * velocity[k] for k in PARAM_NAMES}
            _, g = _loss_and_grads(ahead, net.mode, text[idx], avr[idx], y[idx])
            for k in PARAM_NAMES:
                velocity[k] = mu * velocity[k] - lr * g[k]
                net.params[k] = net.params[k] + velocity[k]
        net.history.append(_loss_and_grads(net.params, net.mode, text, avr, y)[0])
    return net


# --------------------------------------------------------------------------
# checkpoints
#
# Layout: the magic line, one line of JSON (config, mode, vocab hash, tensor
# table with byte offsets), then the tensors as little-endian float64 in
# table order.


def save_checkpoint(
    net: FusionNet, path: str | Path, vocab_hash: str = "", extra: dict | None = None
) -> None:
    tensors, blobs, offset = [], [], 0
    for name in PARAM_NAMES:
        arr = np.ascontiguousarray(net.params[name], dtype="<f8")
        tensors.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    header = {
        "config": asdict(net.config),
        "mode": net.mode.value,
        "vocab_hash": vocab_hash,
        "tensors": tensors,
        "history": [float(x).hex() for x in net.history],
        "extra": extra or {},
    }
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for b in blobs:
            fh.write(b)


def load_checkpoint(path: str | Path) -> tuple[FusionNet, dict]:
    """Return the network and the header (vocab hash, extra metadata)."""
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise ValueError(f"{path}: not an mmsarc network checkpoint")
    rest = raw[len(MAGIC) :]
    nl = rest.index(b"\n")
    header = json.loads(rest[:nl])
    body = rest[nl + 1 :]
    params = {}
    for t in header["tensors"]:
        count = int(np.prod(t["shape"]))
        arr = np.frombuffer(body, dtype="<f8", count=count, offset=t["offset"])
        params[t["name"]] = arr.reshape(t["shape"]).astype(np.float64)
    net = FusionNet(NetConfig(**header["config"]), params, Mode(header["mode"]))
    net.history = [float.fromhex(x) for x in header["history"]]
    return net, header


def checkpoint_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
