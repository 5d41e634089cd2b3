"""Feed-forward softmax classifier with exact mean and per-sample gradients.

Parameters live in a single flat float64 vector so the unlearning code can
treat the model as a point in R^d.  Weight matrices are stored input-major,
shape ``(n_in, n_out)``, followed by the bias vector for the same layer;
layers are laid out in network order.

The forward/backward engine is shared with the LoRA module: the private
helpers operate on explicit weight/bias lists, so adapted effective weights
can be pushed through the identical code path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import format_sections, parse_sections_text

__all__ = [
    "ACTIVATIONS",
    "NetworkSpec",
    "ParamVector",
    "Batch",
    "init_params",
    "forward",
    "mean_loss_and_grad",
    "per_sample_grads",
    "evaluate_accuracy",
    "apply_update",
    "pretrain",
    "save_checkpoint",
    "load_checkpoint",
    "CHECKPOINT_HEADER",
]

ACTIVATIONS = ("relu", "tanh")

CHECKPOINT_HEADER = "ORTHOGRAD-CKPT v1"


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture: layer sizes from input to output plus hidden activation."""

    layer_sizes: tuple[int, ...]
    activation: str = "relu"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise ValueError(f"layer_sizes needs at least input and output, got {sizes}")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer sizes must be positive, got {sizes}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")

    @property
    def n_layers(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]

    def layer_shapes(self) -> list[tuple[tuple[int, int], tuple[int]]]:
        """Per layer: (weight shape (n_in, n_out), bias shape (n_out,))."""
        sizes = self.layer_sizes
        return [((sizes[l], sizes[l + 1]), (sizes[l + 1],)) for l in range(self.n_layers)]

    def layout(self) -> list[tuple[int, tuple[int, int], int, tuple[int]]]:
        """Per layer: (weight offset, weight shape, bias offset, bias shape)."""
        slots = []
        off = 0
        for w_shape, b_shape in self.layer_shapes():
            w_off = off
            off += w_shape[0] * w_shape[1]
            b_off = off
            off += b_shape[0]
            slots.append((w_off, w_shape, b_off, b_shape))
        return slots

    @property
    def param_dim(self) -> int:
        sizes = self.layer_sizes
        return sum(sizes[l] * sizes[l + 1] + sizes[l + 1] for l in range(self.n_layers))


@dataclass(frozen=True)
class ParamVector:
    """Flat parameter vector bound to its architecture.

    ``weights(l)`` / ``biases(l)`` return views into ``flat``; treat the
    vector as immutable and produce updates through ``apply_update``.
    """

    flat: np.ndarray
    spec: NetworkSpec

    def __post_init__(self):
        flat = np.asarray(self.flat, dtype=np.float64)
        object.__setattr__(self, "flat", flat)
        if flat.ndim != 1 or flat.shape[0] != self.spec.param_dim:
            raise ValueError(
                f"flat vector has shape {flat.shape}, spec needs ({self.spec.param_dim},)")

    @property
    def dim(self) -> int:
        return self.flat.shape[0]

    def weights(self, layer: int) -> np.ndarray:
        w_off, w_shape, _, _ = self.spec.layout()[layer]
        return self.flat[w_off:w_off + w_shape[0] * w_shape[1]].reshape(w_shape)

    def biases(self, layer: int) -> np.ndarray:
        _, _, b_off, b_shape = self.spec.layout()[layer]
        return self.flat[b_off:b_off + b_shape[0]]

    def weight_list(self) -> list[np.ndarray]:
        return [self.weights(l) for l in range(self.spec.n_layers)]

    def bias_list(self) -> list[np.ndarray]:
        return [self.biases(l) for l in range(self.spec.n_layers)]

    def copy(self) -> "ParamVector":
        return ParamVector(self.flat.copy(), self.spec)


@dataclass(frozen=True)
class Batch:
    """Mini-batch of inputs (k, n_in) and integer labels (k,)."""

    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "inputs", np.asarray(self.inputs, dtype=np.float64))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))

    @property
    def size(self) -> int:
        return self.inputs.shape[0]


def _check_batch(batch, n_in: int, n_classes: int) -> None:
    x, y = batch.inputs, batch.labels
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError(f"batch inputs must be (k, n_in) with k >= 1, got shape {x.shape}")
    if x.shape[1] != n_in:
        raise ValueError(f"batch inputs have {x.shape[1]} features, network expects {n_in}")
    if y.shape != (x.shape[0],):
        raise ValueError(f"batch labels must have shape ({x.shape[0]},), got {y.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("batch inputs contain non-finite values")
    if y.min() < 0 or y.max() >= n_classes:
        raise ValueError(f"batch labels must lie in [0, {n_classes}), got range [{y.min()}, {y.max()}]")


# ---------------------------------------------------------------------------
# shared forward/backward engine (also used with LoRA effective weights)


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activation_grad(name: str, pre: np.ndarray, act: np.ndarray) -> np.ndarray:
    # act is the stored activation output for the same pre-activation
    if name == "relu":
        return (pre > 0.0).astype(np.float64)
    return 1.0 - act * act


def _forward_layers(weights, biases, activation, x):
    """Forward pass; returns (logits, pre-activations, activations).

    ``acts[0]`` is the input; ``acts[l+1]`` is layer l's output.  The final
    layer is linear (logits), hidden layers apply the activation.
    """
    a = np.asarray(x, dtype=np.float64)
    acts = [a]
    pres = []
    last = len(weights) - 1
    for l, (w, b) in enumerate(zip(weights, biases)):
        z = a @ w + b
        pres.append(z)
        a = z if l == last else _activate(activation, z)
        acts.append(a)
    return acts[-1], pres, acts


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _cross_entropy_losses(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    logp = _log_softmax(logits)
    return -logp[np.arange(logits.shape[0]), labels]


def _backprop_deltas(weights, activation, pres, delta_out):
    """Per-layer deltas from an output-layer delta (any scaling).

    Rows of each delta stay per-sample, so the same pass serves both the
    mean gradient (pre-scaled delta) and per-sample gradients (unscaled).
    """
    n = len(weights)
    deltas = [None] * n
    delta = delta_out
    for l in range(n - 1, -1, -1):
        deltas[l] = delta
        if l > 0:
            act = _activate(activation, pres[l - 1])
            delta = (delta @ weights[l].T) * _activation_grad(activation, pres[l - 1], act)
    return deltas


# ---------------------------------------------------------------------------
# public operations


def init_params(spec: NetworkSpec, seed: int) -> ParamVector:
    """Deterministic parameter init.

    Weights are zero-mean normal with variance 2/n_in for relu and 1/n_in
    for tanh; biases start at zero.
    """
    rng = np.random.default_rng(seed)
    flat = np.zeros(spec.param_dim)
    gain = 2.0 if spec.activation == "relu" else 1.0
    for w_off, w_shape, _, _ in spec.layout():
        n_in = w_shape[0]
        std = np.sqrt(gain / n_in)
        block = rng.normal(0.0, std, size=w_shape)
        flat[w_off:w_off + n_in * w_shape[1]] = block.reshape(-1)
    return ParamVector(flat, spec)


def forward(params: ParamVector, inputs: np.ndarray) -> np.ndarray:
    """Logits for a batch of inputs, shape (k, n_classes)."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.spec.in_dim:
        raise ValueError(f"inputs must be (k, {params.spec.in_dim}), got shape {x.shape}")
    logits, _, _ = _forward_layers(params.weight_list(), params.bias_list(),
                                   params.spec.activation, x)
    return logits


def mean_loss_and_grad(params: ParamVector, batch: Batch) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy over the batch and its gradient in R^d."""
    spec = params.spec
    _check_batch(batch, spec.in_dim, spec.n_classes)
    weights = params.weight_list()
    logits, pres, acts = _forward_layers(weights, params.bias_list(), spec.activation, batch.inputs)
    k = batch.size
    loss = float(np.mean(_cross_entropy_losses(logits, batch.labels)))

    delta_out = _softmax(logits)
    delta_out[np.arange(k), batch.labels] -= 1.0
    delta_out /= k
    deltas = _backprop_deltas(weights, spec.activation, pres, delta_out)

    grad = np.empty(spec.param_dim)
    for l, (w_off, w_shape, b_off, b_shape) in enumerate(spec.layout()):
        dw = acts[l].T @ deltas[l]
        grad[w_off:w_off + w_shape[0] * w_shape[1]] = dw.reshape(-1)
        grad[b_off:b_off + b_shape[0]] = deltas[l].sum(axis=0)
    return loss, grad


def per_sample_grads(params: ParamVector, batch: Batch) -> np.ndarray:
    """Gradient of each sample's individual loss, columns of a (d, k) matrix.

    Column i is the full-parameter gradient of sample i's cross-entropy, not
    divided by the batch size; the column mean therefore matches
    ``mean_loss_and_grad`` up to roundoff.
    """
    spec = params.spec
    _check_batch(batch, spec.in_dim, spec.n_classes)
    weights = params.weight_list()
    logits, pres, acts = _forward_layers(weights, params.bias_list(), spec.activation, batch.inputs)
    k = batch.size

    delta_out = _softmax(logits)
    delta_out[np.arange(k), batch.labels] -= 1.0
    deltas = _backprop_deltas(weights, spec.activation, pres, delta_out)

    grads = np.empty((spec.param_dim, k))
    for l, (w_off, w_shape, b_off, b_shape) in enumerate(spec.layout()):
        # per-sample outer products a_i (x) delta_i, kept unreduced
        dw = np.einsum("ki,ko->kio", acts[l], deltas[l])
        grads[w_off:w_off + w_shape[0] * w_shape[1], :] = dw.reshape(k, -1).T
        grads[b_off:b_off + b_shape[0], :] = deltas[l].T
    return grads


def evaluate_accuracy(params: ParamVector, data) -> float:
    """Accuracy in percent; argmax ties resolve to the lowest class index."""
    x = np.asarray(data.inputs, dtype=np.float64)
    y = np.asarray(data.labels, dtype=np.int64)
    if x.shape[0] == 0:
        raise ValueError("cannot evaluate accuracy on an empty dataset")
    logits = forward(params, x)
    pred = np.argmax(logits, axis=1)
    return 100.0 * float(np.count_nonzero(pred == y)) / x.shape[0]


def apply_update(params: ParamVector, g: np.ndarray, eta: float) -> ParamVector:
    """Gradient-descent step ``params - eta * g`` as a new ParamVector."""
    g = np.asarray(g, dtype=np.float64)
    if g.shape != params.flat.shape:
        raise ValueError(f"update has shape {g.shape}, parameters have {params.flat.shape}")
    return ParamVector(params.flat - eta * g, params.spec)


def pretrain(spec: NetworkSpec, dataset, epochs: int, batch_size: int,
             eta: float, seed: int) -> ParamVector:
    """Mini-batch gradient descent from a fresh init; deterministic in seed."""
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    params = init_params(spec, seed)
    n = dataset.inputs.shape[0]
    if n == 0:
        raise ValueError("cannot pretrain on an empty dataset")
    shuffle_rng = np.random.default_rng([seed, 1])
    for _ in range(epochs):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            batch = Batch(dataset.inputs[idx], dataset.labels[idx])
            _, grad = mean_loss_and_grad(params, batch)
            params = apply_update(params, grad, eta)
    return params


# ---------------------------------------------------------------------------
# checkpoint format: text metadata block, blank line, raw float64 payload


def _encode_checkpoint(header: str, sections, payload: np.ndarray) -> bytes:
    # metadata must stay free of blank lines: the first blank line is the
    # metadata/payload boundary
    text = header + "\n" + format_sections(sections)
    return text.encode("utf-8") + b"\n\n" + payload.astype("<f8").tobytes()


def _decode_checkpoint(blob: bytes, header: str, path) -> tuple[dict, np.ndarray]:
    sep = blob.find(b"\n\n")
    if sep < 0:
        raise ValueError(f"{path}: malformed checkpoint (no metadata/payload separator)")
    text = blob[:sep].decode("utf-8")
    lines = text.split("\n", 1)
    if lines[0] != header:
        raise ValueError(f"{path}: expected header {header!r}, got {lines[0]!r}")
    sections = parse_sections_text(lines[1] if len(lines) > 1 else "", source=str(path))
    payload = np.frombuffer(blob[sep + 2:], dtype="<f8")
    return sections, payload


def save_checkpoint(path, params: ParamVector, seed: int) -> None:
    """Write a model checkpoint; round-trips bit-exactly via load_checkpoint."""
    from pathlib import Path

    meta = {
        "layer_sizes": ",".join(str(s) for s in params.spec.layer_sizes),
        "activation": params.spec.activation,
        "seed": str(int(seed)),
        "d": str(params.dim),
    }
    Path(path).write_bytes(_encode_checkpoint(CHECKPOINT_HEADER, {"model": meta}, params.flat))


def load_checkpoint(path) -> tuple[ParamVector, dict]:
    """Read a model checkpoint; returns (params, metadata dict)."""
    from pathlib import Path

    blob = Path(path).read_bytes()
    sections, payload = _decode_checkpoint(blob, CHECKPOINT_HEADER, path)
    if "model" not in sections:
        raise ValueError(f"{path}: checkpoint missing [model] metadata")
    meta = sections["model"]
    sizes = tuple(int(s) for s in meta["layer_sizes"].split(","))
    spec = NetworkSpec(sizes, meta["activation"])
    d = int(meta["d"])
    if d != spec.param_dim:
        raise ValueError(f"{path}: metadata d={d} does not match architecture ({spec.param_dim})")
    if payload.shape[0] != d:
        raise ValueError(f"{path}: payload has {payload.shape[0]} values, expected {d}")
    return ParamVector(payload.copy(), spec), {"seed": int(meta["seed"]), "d": d}
