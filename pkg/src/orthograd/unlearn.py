"""Unlearning update rules and the epoch loop.

The central step removes the influence of an unlearn batch while shielding
the retain data: the unlearn gradient is projected onto the orthogonal
complement of the span of per-sample retain gradients, then combined with
the mean retain gradient,

    g = alpha * g_retain_mean - (1 - alpha) * g_unlearn_perp

and applied as a descent step.  The retain term descends (preserves retain
behaviour) while the projected unlearn term ascends; to first order the
ascent direction leaves every spanned retain sample's loss unchanged.

Baselines share the plumbing: plain gradient ascent on the unlearn batch
(``neggrad``), the same combination without the projection
(``neggrad_plus``), and descent on the retain batch only (``finetune``).
Any method can run either on the full parameter vector or inside a low-rank
adapter space attached to a frozen base model.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import net
from .data import Splits
from .evaluation import AccuracyReport, evaluate_splits
from .linalg import cosine, project_onto_complement, qr_orthonormal_basis
from .lora import AdaptedModel, attach_lora

__all__ = [
    "MethodKind",
    "StoppingRule",
    "UnlearnConfig",
    "StepDiagnostics",
    "UnlearnResult",
    "combine_update",
    "orthograd_step",
    "baseline_step",
    "stopping_check",
    "run_unlearning",
]


class MethodKind(str, Enum):
    """Update rules; values double as the method tags in result files."""

    ORTHOGRAD_PER_SAMPLE = "orthograd_per_sample"
    ORTHOGRAD_MEAN = "orthograd_mean"
    NEGGRAD = "neggrad"
    NEGGRAD_PLUS = "neggrad_plus"
    FINETUNE = "finetune"


@dataclass(frozen=True)
class StoppingRule:
    """Accuracy-based early stopping.

    ``random_forget``: stop once the unlearn-set accuracy has dropped to the
    pretrained test accuracy (``target``) plus ``threshold`` points or below.
    ``class_forget``: stop once the unlearn-set accuracy falls below
    ``threshold`` percent.
    """

    mode: str
    target: float = 0.0
    threshold: float = 0.5

    def __post_init__(self):
        if self.mode not in ("random_forget", "class_forget"):
            raise ValueError(f"mode must be 'random_forget' or 'class_forget', got {self.mode!r}")

    @classmethod
    def random_forget(cls, target: float, threshold: float = 0.5) -> "StoppingRule":
        return cls(mode="random_forget", target=target, threshold=threshold)

    @classmethod
    def class_forget(cls, threshold: float = 1.0) -> "StoppingRule":
        return cls(mode="class_forget", threshold=threshold)


@dataclass(frozen=True)
class UnlearnConfig:
    method: MethodKind
    stopping: StoppingRule
    alpha: float = 0.9
    eta: float = 0.001
    unlearn_batch: int = 32
    retain_batch: int = 32
    max_epochs: int = 30
    use_lora: bool = False
    lora_rank: int = 8
    lora_scale: float = 32.0
    seed: int = 0
    drop_tol: float | None = None   # rank tolerance for the retain basis

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.unlearn_batch < 1 or self.retain_batch < 1:
            raise ValueError("batch sizes must be >= 1")
        if self.max_epochs < 0:
            raise ValueError(f"max_epochs must be >= 0, got {self.max_epochs}")


@dataclass(frozen=True)
class StepDiagnostics:
    """Geometry of one projection step."""

    basis_rank: int
    g_u_norm: float
    g_u_perp_norm: float
    max_abs_cos: float   # vs the per-sample retain gradient columns


@dataclass(frozen=True)
class UnlearnResult:
    params: net.ParamVector          # final full-parameter model (merged if LoRA)
    trace: tuple[AccuracyReport, ...]
    stop_epoch: int
    stopped_early: bool


# ---------------------------------------------------------------------------
# model dispatch: the same steps run on full parameters or adapter vectors


def _mean_grad(model, batch):
    if isinstance(model, AdaptedModel):
        return model.mean_loss_and_grad(batch)
    return net.mean_loss_and_grad(model, batch)


def _per_sample(model, batch):
    if isinstance(model, AdaptedModel):
        return model.per_sample_grads(batch)
    return net.per_sample_grads(model, batch)


def _update(model, g, eta):
    if isinstance(model, AdaptedModel):
        return model.apply_update(g, eta)
    return net.apply_update(model, g, eta)


def _full_params(model) -> net.ParamVector:
    if isinstance(model, AdaptedModel):
        return model.merged()
    return model


# ---------------------------------------------------------------------------
# update rules


def combine_update(g_retain_mean: np.ndarray, g_unlearn: np.ndarray, alpha: float) -> np.ndarray:
    """Blend retain descent with unlearn ascent: alpha*g_r - (1-alpha)*g_u.

    The caller applies the result as a descent step, so the second term
    ascends on the unlearn objective.  alpha=1 returns the retain mean
    bit-for-bit; alpha=0 returns the pure ascent direction.
    """
    g_retain_mean = np.asarray(g_retain_mean, dtype=np.float64)
    g_unlearn = np.asarray(g_unlearn, dtype=np.float64)
    if g_retain_mean.shape != g_unlearn.shape:
        raise ValueError(f"shape mismatch: {g_retain_mean.shape} vs {g_unlearn.shape}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha * g_retain_mean - (1.0 - alpha) * g_unlearn


def orthograd_step(model, batch_u: net.Batch, batch_r: net.Batch, cfg: UnlearnConfig):
    """One projected update; returns (updated model, diagnostics).

    Per-sample variant: the retain basis spans every per-sample retain
    gradient, so the projected unlearn direction is orthogonal to each of
    them.  Mean variant: the basis spans only the mean retain gradient;
    conflicting retain samples can then leak through the projection.
    """
    if cfg.method not in (MethodKind.ORTHOGRAD_PER_SAMPLE, MethodKind.ORTHOGRAD_MEAN):
        raise ValueError(f"orthograd_step cannot run method {cfg.method.value}")
    _, g_u = _mean_grad(model, batch_u)
    per_sample = _per_sample(model, batch_r)
    g_r_mean = per_sample.mean(axis=1)

    if cfg.method is MethodKind.ORTHOGRAD_PER_SAMPLE:
        basis_input = per_sample
    else:
        basis_input = g_r_mean[:, None]
    basis = qr_orthonormal_basis(basis_input, tol=cfg.drop_tol)
    g_u_perp = project_onto_complement(g_u, basis)

    g = combine_update(g_r_mean, g_u_perp, cfg.alpha)
    updated = _update(model, g, cfg.eta)

    max_cos = max((abs(cosine(g_u_perp, per_sample[:, i]))
                   for i in range(per_sample.shape[1])), default=0.0)
    diag = StepDiagnostics(
        basis_rank=basis.rank,
        g_u_norm=float(np.linalg.norm(g_u)),
        g_u_perp_norm=float(np.linalg.norm(g_u_perp)),
        max_abs_cos=max_cos,
    )
    return updated, diag


def baseline_step(model, batch_u: net.Batch, batch_r: net.Batch, cfg: UnlearnConfig):
    """One update for the non-projecting baselines."""
    if cfg.method is MethodKind.NEGGRAD:
        _, g_u = _mean_grad(model, batch_u)
        return _update(model, -g_u, cfg.eta)
    if cfg.method is MethodKind.NEGGRAD_PLUS:
        _, g_u = _mean_grad(model, batch_u)
        g_r_mean = _per_sample(model, batch_r).mean(axis=1)
        return _update(model, combine_update(g_r_mean, g_u, cfg.alpha), cfg.eta)
    if cfg.method is MethodKind.FINETUNE:
        g_r_mean = _per_sample(model, batch_r).mean(axis=1)
        return _update(model, g_r_mean, cfg.eta)
    raise ValueError(f"baseline_step cannot run method {cfg.method.value}")


def stopping_check(report: AccuracyReport, rule: StoppingRule) -> bool:
    if rule.mode == "random_forget":
        return report.A_u <= rule.target + rule.threshold
    return report.A_u < rule.threshold


# ---------------------------------------------------------------------------
# epoch loop


class _CyclicSampler:
    """Deterministic batches from a shuffled index cycle.

    Always yields exactly ``batch`` indices; when the current permutation
    runs out mid-draw it is reshuffled and the draw continues.
    """

    def __init__(self, n: int, batch: int, rng: np.random.Generator):
        if n < 1 or batch < 1:
            raise ValueError("sampler needs n >= 1 and batch >= 1")
        self.n = n
        self.batch = batch
        self.rng = rng
        self.order = rng.permutation(n)
        self.pos = 0

    def take(self) -> np.ndarray:
        out = np.empty(self.batch, dtype=np.int64)
        filled = 0
        while filled < self.batch:
            if self.pos == self.n:
                self.order = self.rng.permutation(self.n)
                self.pos = 0
            grab = min(self.batch - filled, self.n - self.pos)
            out[filled:filled + grab] = self.order[self.pos:self.pos + grab]
            self.pos += grab
            filled += grab
        return out


def run_unlearning(pretrained: net.ParamVector, splits: Splits,
                   cfg: UnlearnConfig) -> UnlearnResult:
    """Run one unlearning method until its stopping rule fires or epochs cap.

    Epoch 0 is an evaluation of the starting model: if the stopping rule is
    already satisfied the pretrained parameters come back unchanged.  Each
    later epoch is one shuffled pass over the unlearn set; every unlearn
    batch is paired with a retain batch drawn from a reshuffling cycle.
    Separate seed streams drive the unlearn order, the retain cycle, and the
    adapter init, so runs are bit-reproducible and methods that ignore the
    retain set are unaffected by its size.
    """
    if len(splits.unlearn) == 0 or len(splits.retain) == 0:
        raise ValueError("unlearn and retain sets must be non-empty")

    order_rng = np.random.default_rng([cfg.seed, 0])
    retain_rng = np.random.default_rng([cfg.seed, 1])

    if cfg.use_lora:
        model = attach_lora(pretrained, rank=cfg.lora_rank, scale=cfg.lora_scale,
                            seed=[cfg.seed, 2])
    else:
        model = pretrained

    method_tag = cfg.method.value
    trace = [evaluate_splits(_full_params(model), splits, epoch=0,
                             method=method_tag, seed=cfg.seed)]
    if stopping_check(trace[0], cfg.stopping):
        return UnlearnResult(params=_full_params(model), trace=tuple(trace),
                             stop_epoch=0, stopped_early=True)

    is_orthograd = cfg.method in (MethodKind.ORTHOGRAD_PER_SAMPLE, MethodKind.ORTHOGRAD_MEAN)
    sampler = _CyclicSampler(len(splits.retain), cfg.retain_batch, retain_rng)
    n_u = len(splits.unlearn)

    stop_epoch = cfg.max_epochs
    stopped_early = False
    for epoch in range(1, cfg.max_epochs + 1):
        order = order_rng.permutation(n_u)
        for start in range(0, n_u, cfg.unlearn_batch):
            idx = order[start:start + cfg.unlearn_batch]
            batch_u = net.Batch(splits.unlearn.inputs[idx], splits.unlearn.labels[idx])
            ridx = sampler.take()
            batch_r = net.Batch(splits.retain.inputs[ridx], splits.retain.labels[ridx])
            if is_orthograd:
                model, _ = orthograd_step(model, batch_u, batch_r, cfg)
            else:
                model = baseline_step(model, batch_u, batch_r, cfg)
        report = evaluate_splits(_full_params(model), splits, epoch=epoch,
                                 method=method_tag, seed=cfg.seed)
        trace.append(report)
        if stopping_check(report, cfg.stopping):
            stop_epoch = epoch
            stopped_early = True
            break

    return UnlearnResult(params=_full_params(model), trace=tuple(trace),
                         stop_epoch=stop_epoch, stopped_early=stopped_early)
