"""Low-rank adapters over the feed-forward classifier's weight matrices.

An adapted layer replaces its weight by ``W + (scale/rank) * (B A)^T`` where
``A`` has shape ``(rank, n_in)`` and ``B`` has shape ``(n_out, rank)`` (the
transpose appears because weights are stored input-major).  ``B`` starts at
zero, so attaching adapters does not change the function; ``A`` is random so
the first update to ``B`` already moves the effective weight.  Biases are
never adapted.

Adapter parameters live in their own flat vector (dimension
``sum_l rank * (n_in + n_out)``); the unlearning steps treat that vector
exactly like the full-model parameter vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .net import (
    Batch, NetworkSpec, ParamVector, _backprop_deltas, _check_batch,
    _cross_entropy_losses, _decode_checkpoint, _encode_checkpoint,
    _forward_layers, _softmax,
)

__all__ = [
    "LoraAdapterSet",
    "AdaptedModel",
    "attach_lora",
    "merge_lora",
    "save_adapter_checkpoint",
    "load_adapter_checkpoint",
    "ADAPTER_HEADER",
]

ADAPTER_HEADER = "ORTHOGRAD-LORA v1"


@dataclass(frozen=True)
class LoraAdapterSet:
    """Adapter shapes and placement for one architecture."""

    spec: NetworkSpec
    rank: int
    scale: float
    layers: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(int(l) for l in self.layers))
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if not (self.scale > 0):
            raise ValueError(f"scale must be positive, got {self.scale}")
        if len(self.layers) == 0:
            raise ValueError("at least one layer must be adapted")
        if len(set(self.layers)) != len(self.layers):
            raise ValueError(f"duplicate layer indices: {self.layers}")
        shapes = self.spec.layer_shapes()
        for l in self.layers:
            if not 0 <= l < self.spec.n_layers:
                raise ValueError(f"layer index {l} out of range for {self.spec.n_layers} layers")
            (n_in, n_out), _ = shapes[l]
            if self.rank > min(n_in, n_out):
                raise ValueError(
                    f"rank {self.rank} exceeds min(n_in, n_out)={min(n_in, n_out)} at layer {l}")

    @property
    def multiplier(self) -> float:
        """Effective low-rank update multiplier scale/rank."""
        return self.scale / self.rank

    def layout(self) -> list[tuple[int, int, tuple[int, int], int, tuple[int, int]]]:
        """Per adapted layer: (layer, A offset, A shape, B offset, B shape)."""
        slots = []
        off = 0
        shapes = self.spec.layer_shapes()
        for l in self.layers:
            (n_in, n_out), _ = shapes[l]
            a_off = off
            off += self.rank * n_in
            b_off = off
            off += n_out * self.rank
            slots.append((l, a_off, (self.rank, n_in), b_off, (n_out, self.rank)))
        return slots

    @property
    def param_dim(self) -> int:
        shapes = self.spec.layer_shapes()
        return sum(self.rank * (shapes[l][0][0] + shapes[l][0][1]) for l in self.layers)


class AdaptedModel:
    """Base parameters plus a flat adapter vector, with gradient operations.

    Mirrors the full-model operations but differentiates with respect to the
    adapter coordinates only.  ``apply_update`` returns a new model; the base
    parameters are shared, never copied or mutated.
    """

    def __init__(self, base: ParamVector, adapters: LoraAdapterSet, theta: np.ndarray):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (adapters.param_dim,):
            raise ValueError(f"adapter vector has shape {theta.shape}, "
                             f"expected ({adapters.param_dim},)")
        if base.spec != adapters.spec:
            raise ValueError("base parameters and adapters disagree on the architecture")
        self.base = base
        self.adapters = adapters
        self.theta = theta

    @property
    def spec(self) -> NetworkSpec:
        return self.base.spec

    @property
    def param_dim(self) -> int:
        return self.adapters.param_dim

    def a_matrix(self, slot: int) -> np.ndarray:
        _, a_off, a_shape, _, _ = self.adapters.layout()[slot]
        return self.theta[a_off:a_off + a_shape[0] * a_shape[1]].reshape(a_shape)

    def b_matrix(self, slot: int) -> np.ndarray:
        _, _, _, b_off, b_shape = self.adapters.layout()[slot]
        return self.theta[b_off:b_off + b_shape[0] * b_shape[1]].reshape(b_shape)

    def weight_delta(self, slot: int) -> np.ndarray:
        """Scaled low-rank update (scale/rank) B A, output-major (n_out, n_in)."""
        return self.adapters.multiplier * (self.b_matrix(slot) @ self.a_matrix(slot))

    def effective_weights(self) -> list[np.ndarray]:
        weights = self.base.weight_list()
        for slot, (l, *_rest) in enumerate(self.adapters.layout()):
            weights[l] = weights[l] + self.weight_delta(slot).T
        return weights

    def forward(self, inputs: np.ndarray) -> np.ndarray:
        x = np.asarray(inputs, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.spec.in_dim:
            raise ValueError(f"inputs must be (k, {self.spec.in_dim}), got shape {x.shape}")
        logits, _, _ = _forward_layers(self.effective_weights(), self.base.bias_list(),
                                       self.spec.activation, x)
        return logits

    def _engine_pass(self, batch: Batch, per_sample: bool):
        spec = self.spec
        _check_batch(batch, spec.in_dim, spec.n_classes)
        weights = self.effective_weights()
        logits, pres, acts = _forward_layers(weights, self.base.bias_list(),
                                             spec.activation, batch.inputs)
        k = batch.size
        delta_out = _softmax(logits)
        delta_out[np.arange(k), batch.labels] -= 1.0
        if not per_sample:
            delta_out /= k
        deltas = _backprop_deltas(weights, spec.activation, pres, delta_out)
        return logits, acts, deltas

    def mean_loss_and_grad(self, batch: Batch) -> tuple[float, np.ndarray]:
        """Mean cross-entropy and its gradient in adapter coordinates."""
        logits, acts, deltas = self._engine_pass(batch, per_sample=False)
        loss = float(np.mean(_cross_entropy_losses(logits, batch.labels)))
        mult = self.adapters.multiplier
        grad = np.empty(self.param_dim)
        for slot, (l, a_off, a_shape, b_off, b_shape) in enumerate(self.adapters.layout()):
            gw = acts[l].T @ deltas[l]                       # (n_in, n_out)
            da = mult * (gw @ self.b_matrix(slot)).T          # (r, n_in)
            db = mult * gw.T @ self.a_matrix(slot).T          # (n_out, r)
            grad[a_off:a_off + da.size] = da.reshape(-1)
            grad[b_off:b_off + db.size] = db.reshape(-1)
        return loss, grad

    def per_sample_grads(self, batch: Batch) -> np.ndarray:
        """Per-sample adapter gradients as columns of a (d', k) matrix."""
        _, acts, deltas = self._engine_pass(batch, per_sample=True)
        k = batch.size
        mult = self.adapters.multiplier
        grads = np.empty((self.param_dim, k))
        for slot, (l, a_off, a_shape, b_off, b_shape) in enumerate(self.adapters.layout()):
            u = deltas[l] @ self.b_matrix(slot)               # (k, r)
            da = mult * np.einsum("kr,ki->kri", u, acts[l])   # (k, r, n_in)
            v = acts[l] @ self.a_matrix(slot).T               # (k, r)
            db = mult * np.einsum("ko,kr->kor", deltas[l], v) # (k, n_out, r)
            grads[a_off:a_off + da[0].size, :] = da.reshape(k, -1).T
            grads[b_off:b_off + db[0].size, :] = db.reshape(k, -1).T
        return grads

    def apply_update(self, g: np.ndarray, eta: float) -> "AdaptedModel":
        g = np.asarray(g, dtype=np.float64)
        if g.shape != self.theta.shape:
            raise ValueError(f"update has shape {g.shape}, adapter vector has {self.theta.shape}")
        return AdaptedModel(self.base, self.adapters, self.theta - eta * g)

    def merged(self) -> ParamVector:
        return merge_lora(self.base, self)


def attach_lora(base: ParamVector, rank: int, scale: float,
                layers: tuple[int, ...] | None = None, seed: int = 0) -> AdaptedModel:
    """Attach freshly initialized adapters to a model.

    ``A`` entries are zero-mean normal with variance 1/n_in, ``B`` starts at
    zero, so the adapted model computes exactly the base function until the
    first update.  ``layers`` defaults to every weight layer.
    """
    if layers is None:
        layers = tuple(range(base.spec.n_layers))
    adapters = LoraAdapterSet(spec=base.spec, rank=rank, scale=float(scale), layers=tuple(layers))
    rng = np.random.default_rng(seed)
    theta = np.zeros(adapters.param_dim)
    for _, a_off, a_shape, _b_off, _b_shape in adapters.layout():
        n_in = a_shape[1]
        block = rng.normal(0.0, np.sqrt(1.0 / n_in), size=a_shape)
        theta[a_off:a_off + block.size] = block.reshape(-1)
        # B block stays zero
    return AdaptedModel(base, adapters, theta)


def merge_lora(base: ParamVector, model: AdaptedModel) -> ParamVector:
    """Fold the adapter update into a standalone parameter vector."""
    if base.spec != model.spec:
        raise ValueError("base parameters and adapted model disagree on the architecture")
    flat = base.flat.copy()
    merged = ParamVector(flat, base.spec)
    for slot, (l, *_rest) in enumerate(model.adapters.layout()):
        w = merged.weights(l)
        w += model.weight_delta(slot).T
    return merged


# ---------------------------------------------------------------------------
# adapter checkpoints: same container as model checkpoints, different header


def save_adapter_checkpoint(path, model: AdaptedModel, seed: int = 0) -> None:
    from pathlib import Path

    adapters = model.adapters
    sections = {
        "adapter": {
            "rank": str(adapters.rank),
            "scale": repr(float(adapters.scale)),
            "layers": ",".join(str(l) for l in adapters.layers),
            "seed": str(int(seed)),
            "d": str(model.param_dim),
        },
        "model": {
            "layer_sizes": ",".join(str(s) for s in adapters.spec.layer_sizes),
            "activation": adapters.spec.activation,
        },
    }
    Path(path).write_bytes(_encode_checkpoint(ADAPTER_HEADER, sections, model.theta))


def load_adapter_checkpoint(path, base: ParamVector) -> AdaptedModel:
    from pathlib import Path

    blob = Path(path).read_bytes()
    sections, payload = _decode_checkpoint(blob, ADAPTER_HEADER, path)
    if "adapter" not in sections or "model" not in sections:
        raise ValueError(f"{path}: adapter checkpoint missing metadata sections")
    meta = sections["adapter"]
    sizes = tuple(int(s) for s in sections["model"]["layer_sizes"].split(","))
    spec = NetworkSpec(sizes, sections["model"]["activation"])
    if spec != base.spec:
        raise ValueError(f"{path}: adapter architecture {sizes} does not match base model")
    adapters = LoraAdapterSet(
        spec=spec,
        rank=int(meta["rank"]),
        scale=float(meta["scale"]),
        layers=tuple(int(l) for l in meta["layers"].split(",")),
    )
    if payload.shape[0] != adapters.param_dim:
        raise ValueError(f"{path}: payload has {payload.shape[0]} values, "
                         f"expected {adapters.param_dim}")
    return AdaptedModel(base, adapters, payload.copy())
