"""Motif fusion, loss weighting and the alternating training loop.

Each epoch runs four steps:

1. supervised batches over the labelled nodes with the sample weights ``beta``
   held fixed (updates the encoder, gates, attention vector and classifier);
2. recompute the motif attention ``alpha`` for every node;
3. MI batches over all nodes with ``alpha`` held fixed (updates the encoder,
   gates, instance encoders and discriminators);
4. recompute ``beta`` from the labelled nodes' attention profiles.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.special import softmax

from .autodiff import (AdamState, ContractError, Tensor, adam_step, backward, concat,
                       cross_entropy_logits, deterministic, gather_rows,
                       load_checkpoint, matmul, mul, parameter, reshape, row_softmax,
                       save_checkpoint, sum, using_dtype, vjp)
from .gnn import (CITATION_HIDDEN, ClassifierParams, GcnParams, forward_base, glorot,
                  init_classifier, init_gcn, logits as classifier_logits)
from .graphstore import normalized_adjacency
from .motifs.sampling import sample_negative_batch, sample_positive_batch
from .regularizer import MotifParams, batch_mi_losses, gate, init_motif_params

LR_GRID = (1e-4, 1e-3, 1e-2)


class TrainingDivergence(FloatingPointError):
    """A loss or gradient became non-finite during training."""


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 256
    lr: float = 1e-3
    q: int = 20
    seed: int = 0
    hidden: tuple = CITATION_HIDDEN
    dropout: float = 0.5
    patience: int = 10
    no_novelty: bool = False
    no_task_weights: bool = False
    base_only: bool = False
    skip_mi: bool = False
    deterministic: bool = True
    dtype: str = "float64"
    dataset: str | None = None
    registry: str | None = None

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if not 1 <= self.epochs <= 100:
            raise ValueError(f"epochs must be in 1..100, got {self.epochs}")
        for name in ("batch_size", "q", "patience"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not 0 <= self.dropout < 1:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if not self.hidden or min(self.hidden) < 1:
            raise ValueError(f"hidden sizes must be positive, got {self.hidden}")
        if self.dtype not in ("float64", "float32"):
            raise ValueError(f"dtype must be float64 or float32, got {self.dtype}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)

    @property
    def uses_motifs(self) -> bool:
        return not self.base_only

    @property
    def runs_mi_phase(self) -> bool:
        return not (self.base_only or self.skip_mi)


# ------------------------------------------------------------------ model

@dataclass
class AttentionParams:
    vector: Tensor  # D


@dataclass
class CurriculumState:
    alpha: np.ndarray | None
    beta: np.ndarray  # over the labelled training nodes, in training-node order
    epoch: int = 0


class ModelState:
    """All trainable parameters of one model plus what is needed to rebuild it."""

    def __init__(self, gcn: GcnParams, classifier: ClassifierParams,
                 motifs: list[MotifParams] | None = None,
                 attention: AttentionParams | None = None, motif_ids=()):
        self.gcn = gcn
        self.classifier = classifier
        self.motifs = list(motifs or [])
        self.attention = attention
        self.motif_ids = list(motif_ids)
        if self.motifs and (attention is None or len(self.motif_ids) != len(self.motifs)):
            raise ContractError("motif parameters need an attention vector and one id per motif")

    @property
    def base_only(self) -> bool:
        return not self.motifs

    def motif_prefix(self, t: int) -> str:
        return f"motif.{self.motif_ids[t]}"

    def parameters(self) -> dict:
        out = dict(self.gcn.named())
        for t, p in enumerate(self.motifs):
            out.update(p.named(self.motif_prefix(t)))
        if self.attention is not None:
            out["attn.p"] = self.attention.vector
        out.update(self.classifier.named())
        return out

    def supervised_parameters(self) -> dict:
        """Parameters on the path of the supervised loss."""
        out = dict(self.gcn.named())
        for t, p in enumerate(self.motifs):
            out.update(p.gate_params(self.motif_prefix(t)))
        if self.attention is not None:
            out["attn.p"] = self.attention.vector
        out.update(self.classifier.named())
        return out

    def mi_parameters(self) -> dict:
        """Parameters on the path of the MI regularizer."""
        out = dict(self.gcn.named())
        for t, p in enumerate(self.motifs):
            out.update(p.named(self.motif_prefix(t)))
        return out

    def state_dict(self) -> dict:
        return {k: v.data.copy() for k, v in self.parameters().items()}

    def load_state_dict(self, state: dict) -> None:
        params = self.parameters()
        if set(state) != set(params):
            raise ContractError(f"state keys differ: {sorted(set(state) ^ set(params))}")
        for k, p in params.items():
            if state[k].shape != p.shape:
                raise ContractError(f"{k}: shape {state[k].shape} != {p.shape}")
            p.data = np.array(state[k], dtype=p.data.dtype)


def init_model(in_dim: int, num_classes: int, registry=None, hidden=CITATION_HIDDEN,
               seed: int = 0) -> ModelState:
    """Fresh parameters; ``registry=None`` gives the plain GCN classifier."""
    rng = np.random.default_rng(seed)
    gcn = init_gcn(in_dim, hidden, rng)
    d = gcn.out_dim
    clf = init_classifier(d, num_classes, rng)
    if registry is None:
        return ModelState(gcn, clf)
    attention = AttentionParams(parameter(glorot(rng, d, 1).ravel(), name="attn.p"))
    motifs = [init_motif_params(d, rng, f"motif.{m.id}") for m in registry]
    return ModelState(gcn, clf, motifs, attention, registry.ids)


# --------------------------------------------------- fusion and weighting

def motif_attention(gated: list, p) -> tuple[Tensor, Tensor]:
    """``alpha_vt = softmax_t(p . h_v^t)`` and ``z_v = sum_t alpha_vt h_v^t``."""
    if not gated:
        raise ContractError("motif_attention needs at least one motif")
    p = p.vector if isinstance(p, AttentionParams) else p
    r = gated[0].shape[0]
    scores = concat([reshape(matmul(h, p), (r, 1)) for h in gated], axis=1)
    alpha = row_softmax(scores)
    z = None
    for t, h in enumerate(gated):
        term = mul(alpha[:, t:t + 1], h)
        z = term if z is None else z + term
    return alpha, z


def weighted_mi_loss(alpha: np.ndarray, motif_losses, num_nodes: int | None = None,
                     no_task_weights: bool = False) -> Tensor:
    """``(1/nT) sum_t sum_v alpha_vt L^t(v)`` with ``alpha`` treated as constant.

    ``motif_losses[t]`` is ``(nodes, losses)``: node ids and a tensor of their
    per-node losses for motif ``t`` (masked nodes carry zero loss).  ``n`` is
    the full node count, not the batch size.
    """
    alpha = np.asarray(alpha)
    n = alpha.shape[0] if num_nodes is None else num_nodes
    t_count = alpha.shape[1]
    if len(motif_losses) != t_count:
        raise ContractError(f"{len(motif_losses)} motif losses for {t_count} attention columns")
    total = None
    for t, (nodes, losses) in enumerate(motif_losses):
        w = np.ones(len(nodes)) if no_task_weights else alpha[np.asarray(nodes), t]
        term = sum(mul(losses, w))
        total = term if total is None else total + term
    return mul(total, 1.0 / (n * t_count))


def novelty_weights(alpha_labeled: np.ndarray) -> np.ndarray:
    """Softmax over labelled nodes of the squared distance to the mean attention profile."""
    a = np.asarray(alpha_labeled, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1:
        raise ContractError("novelty_weights needs a non-empty (|V_L| x T) matrix")
    dist = ((a - a.mean(axis=0)) ** 2).sum(axis=1)
    return softmax(dist)


def weighted_supervised_loss(beta, logits, labels) -> Tensor:
    """``-sum_v beta_v log softmax(logits_v)[y_v]`` over a labelled batch."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and labels.min() < 0:
        raise ContractError("supervised loss over a batch containing unlabeled nodes")
    return cross_entropy_logits(logits, labels, np.asarray(beta, dtype=np.float64))


def represent(model: ModelState, h: Tensor):
    """Final representations ``Z`` for the rows of ``h`` and their attention."""
    if model.base_only:
        return None, h
    gated = [gate(h, p) for p in model.motifs]
    return motif_attention(gated, model.attention)


# -------------------------------------------------------------- evaluation

@dataclass
class Metrics:
    train_acc: float
    val_acc: float
    test_acc: float
    per_class: dict = field(default_factory=dict)  # split name -> list (nan for absent classes)

    def to_dict(self) -> dict:
        return asdict(self)


def inference(model: ModelState, g, adj=None):
    """Dropout-free forward pass: ``(class probabilities, attention or None)``."""
    h = forward_base(g, adj, model.gcn, train_mode=False)
    alpha, z = represent(model, h)
    probs = row_softmax(classifier_logits(z, model.classifier)).data
    return probs, (None if alpha is None else alpha.data)


def predict_proba(model: ModelState, g, adj=None) -> np.ndarray:
    """Class probabilities for every node with dropout off."""
    return inference(model, g, adj)[0]


def attention_profiles(model: ModelState, g, adj=None) -> np.ndarray | None:
    """Motif attention ``alpha`` (n x T) with dropout off; ``None`` for the plain GCN."""
    return inference(model, g, adj)[1]


def accuracy(pred, labels, nodes) -> float:
    nodes = np.asarray(nodes, dtype=np.int64)
    if len(nodes) == 0:
        return float("nan")
    return float(np.mean(pred[nodes] == labels[nodes]))


def per_class_accuracy(pred, labels, nodes, num_classes) -> list:
    nodes = np.asarray(nodes, dtype=np.int64)
    out = []
    for c in range(num_classes):
        sel = nodes[labels[nodes] == c]
        out.append(float(np.mean(pred[sel] == c)) if len(sel) else float("nan"))
    return out


def evaluate(model: ModelState, g, index=None, split=None, adj=None, probs=None) -> Metrics:
    """Accuracy on each split part (dropout off) and per-class test accuracy."""
    if split is None:
        raise ContractError("evaluate needs a split")
    probs = predict_proba(model, g, adj) if probs is None else probs
    pred = probs.argmax(axis=1)
    labels = g.labels
    c = g.num_classes
    return Metrics(
        accuracy(pred, labels, split.train), accuracy(pred, labels, split.val),
        accuracy(pred, labels, split.test),
        {"train": per_class_accuracy(pred, labels, split.train, c),
         "val": per_class_accuracy(pred, labels, split.val, c),
         "test": per_class_accuracy(pred, labels, split.test, c)})


# ---------------------------------------------------------------- training

@dataclass
class EpochRecord:
    epoch: int
    L_S: float
    L_MI: float
    val_acc: float
    test_acc: float
    wallclock_ms: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PhaseTimes:
    """Wall-clock seconds spent in each part of one epoch."""
    supervised: float = 0.0
    mi_base: float = 0.0         # encoder forward/backward inside the MI phase
    mi_regularizer: float = 0.0  # sampling, gating, encoding, discrimination
    bookkeeping: float = 0.0     # attention/novelty recomputation and evaluation

    @property
    def mi_total(self) -> float:
        return self.mi_base + self.mi_regularizer


@dataclass
class TrainResult:
    model: ModelState
    history: list
    best_epoch: int
    metrics: Metrics
    state: CurriculumState
    times: list = field(default_factory=list)
    config: TrainConfig | None = None


def _epoch_rngs(seed: int, epoch: int):
    sup, mi = np.random.SeedSequence([seed, epoch]).spawn(2)
    return np.random.default_rng(sup), np.random.default_rng(mi)


def _check_finite(value, what, epoch, batch):
    if not np.isfinite(value):
        raise TrainingDivergence(f"non-finite {what} at epoch {epoch}, batch {batch}")


def _step(params, grads, state, lr, what, epoch, batch):
    try:
        adam_step(params, grads, state, lr)
    except FloatingPointError as exc:
        raise TrainingDivergence(f"{what} at epoch {epoch}, batch {batch}: {exc}") from exc


def _batches(order, size):
    return [order[i:i + size] for i in range(0, len(order), size)]


def supervised_epoch(model, g, adj, train_nodes, beta, config, rng, opt_state, epoch):
    """One pass of the supervised phase; returns the mean batch loss."""
    params = model.supervised_parameters()
    beta_of = dict(zip(train_nodes.tolist(), beta))
    losses = []
    for b, batch in enumerate(_batches(rng.permutation(train_nodes), config.batch_size)):
        h = forward_base(g, adj, model.gcn, True, rng, config.dropout)
        _, z = represent(model, gather_rows(h, batch))
        unit = config.no_novelty or not config.uses_motifs
        w = np.ones(len(batch)) if unit else np.array([beta_of[v] for v in batch])
        loss = weighted_supervised_loss(w, classifier_logits(z, model.classifier), g.labels[batch])
        _check_finite(float(loss.data), "supervised loss", epoch, b)
        grads = backward(loss)
        _step(params, {k: grads.get(id(p), np.zeros_like(p.data)) for k, p in params.items()},
              opt_state, config.lr, "supervised phase", epoch, b)
        losses.append(float(loss.data))
    return float(np.mean(losses)) if losses else 0.0


class MotifSamples:
    """One epoch's positive and negative samples for every node and motif."""

    def __init__(self, index, q, rng):
        n = index.num_nodes
        self.per_motif = []
        for inst in index.per_motif:
            owner, pos = sample_positive_batch(inst, np.arange(n), q, rng)
            if len(owner):
                neg, _ = sample_negative_batch(inst, owner, n, rng)
            else:
                neg = np.empty((0, 3), np.int64)
            # owner is sorted; CSR pointer over nodes
            ptr = np.zeros(n + 1, np.int64)
            np.cumsum(np.bincount(owner, minlength=n), out=ptr[1:])
            self.per_motif.append((ptr, pos, neg))

    def for_batch(self, t, batch):
        """``(owner positions in batch, positive triples, negative triples)``."""
        ptr, pos, neg = self.per_motif[t]
        counts = ptr[batch + 1] - ptr[batch]
        total = int(counts.sum())
        owner = np.repeat(np.arange(len(batch)), counts)
        rows = ptr[batch][owner] + (np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts))
        return owner, pos[rows], neg[rows]


def mi_epoch(model, g, adj, index, alpha, config, rng, opt_state, epoch, times: PhaseTimes):
    """One pass of the MI phase; returns the mean batch loss."""
    n = g.num_nodes
    params = model.mi_parameters()
    gcn_params = model.gcn.named()
    reg_params = {k: p for k, p in params.items() if k not in gcn_params}
    t0 = time.perf_counter()
    samples = MotifSamples(index, config.q, rng)
    times.mi_regularizer += time.perf_counter() - t0
    losses = []
    for b, batch in enumerate(_batches(rng.permutation(n), config.batch_size)):
        t0 = time.perf_counter()
        h = forward_base(g, adj, model.gcn, True, rng, config.dropout)
        t1 = time.perf_counter()
        motif_losses, leaves = [], []
        for t, p in enumerate(model.motifs):
            owner, pos, neg = samples.for_batch(t, batch)
            if len(owner) == 0:  # every batch node is masked for this motif
                motif_losses.append((batch, Tensor(np.zeros(len(batch)))))
                continue
            rows = np.unique(np.concatenate([batch, pos.ravel(), neg.ravel()]))
            local = lambda a: np.searchsorted(rows, a)  # noqa: E731
            # a leaf over only the touched rows keeps this phase independent of n
            leaf = Tensor(h.data[rows], requires_grad=True)
            leaves.append((rows, leaf))
            per_node, _ = batch_mi_losses(gate(leaf, p), local(batch), owner, local(pos), local(neg), p)
            motif_losses.append((batch, per_node))
        loss = weighted_mi_loss(alpha, motif_losses, n, config.no_task_weights)
        _check_finite(float(loss.data), "MI loss", epoch, b)
        grads = backward(loss) if loss.requires_grad else {}
        reg_grads = {k: grads.get(id(p), np.zeros_like(p.data)) for k, p in reg_params.items()}
        t2 = time.perf_counter()
        dh = np.zeros_like(h.data)
        for rows, leaf in leaves:  # rows are unique, so plain fancy-index accumulation is exact
            if id(leaf) in grads:
                dh[rows] += grads[id(leaf)]
        reg_grads.update(vjp(h, dh, gcn_params))
        _step(params, reg_grads, opt_state, config.lr, "MI phase", epoch, b)
        t3 = time.perf_counter()
        times.mi_base += (t1 - t0) + (t3 - t2)
        times.mi_regularizer += t2 - t1
        losses.append(float(loss.data))
    return float(np.mean(losses)) if losses else 0.0


def train(g, index, registry, config: TrainConfig, split, *, adj=None, log_path=None,
          model: ModelState | None = None) -> TrainResult:
    """Alternating supervised / MI training with early stopping on validation accuracy."""
    with using_dtype(config.dtype):
        if config.deterministic:
            with deterministic():
                return _train(g, index, registry, config, split, adj, log_path, model)
        return _train(g, index, registry, config, split, adj, log_path, model)


def _train(g, index, registry, config, split, adj, log_path, model):
    if g.labels is None or g.num_classes is None:
        raise ContractError("training needs a labelled graph")
    if config.uses_motifs:
        if index is None or registry is None:
            raise ContractError("motif training needs an instance index and a registry")
        if len(index) != len(registry):
            raise ContractError("index and registry disagree on the number of motifs")
    adj = normalized_adjacency(g) if adj is None else adj
    train_nodes = np.asarray(split.train, dtype=np.int64)
    if len(train_nodes) == 0 or (g.labels[train_nodes] < 0).any():
        raise ContractError("training nodes must be non-empty and labelled")
    if model is None:
        model = init_model(g.num_features, g.num_classes,
                           registry if config.uses_motifs else None, config.hidden, config.seed)
    sup_state, mi_state = AdamState(), AdamState()
    state = CurriculumState(None, np.full(len(train_nodes), 1.0 / len(train_nodes)))
    history, times = [], []
    best = (-1.0, -1, model.state_dict())
    stale = 0
    log = open(log_path, "w") if log_path else None
    try:
        for epoch in range(config.epochs):
            start = time.perf_counter()
            pt = PhaseTimes()
            sup_rng, mi_rng = _epoch_rngs(config.seed, epoch)
            loss_s = supervised_epoch(model, g, adj, train_nodes, state.beta, config, sup_rng,
                                      sup_state, epoch)
            t1 = time.perf_counter()
            pt.supervised = t1 - start
            loss_mi = 0.0
            if config.runs_mi_phase:
                state.alpha = attention_profiles(model, g, adj)
                pt.bookkeeping += time.perf_counter() - t1
                loss_mi = mi_epoch(model, g, adj, index, state.alpha, config, mi_rng, mi_state,
                                   epoch, pt)
            t2 = time.perf_counter()
            probs, alpha = inference(model, g, adj)
            if config.uses_motifs:
                state.alpha = alpha
                state.beta = novelty_weights(state.alpha[train_nodes])
            state.epoch = epoch + 1
            m = evaluate(model, g, index, split, adj, probs)
            pt.bookkeeping += time.perf_counter() - t2
            rec = EpochRecord(epoch, loss_s, loss_mi, m.val_acc, m.test_acc,
                              (time.perf_counter() - start) * 1000.0)
            history.append(rec)
            times.append(pt)
            if log:
                log.write(json.dumps(rec.to_dict()) + "\n")
                log.flush()
            improved = m.val_acc > best[0]
            if m.val_acc >= best[0]:  # ties keep the later, longer-trained state
                best = (m.val_acc, epoch, model.state_dict())
            stale = 0 if improved else stale + 1
            if stale >= config.patience:
                break
    finally:
        if log:
            log.close()
    model.load_state_dict(best[2])
    final = evaluate(model, g, index, split, adj)
    return TrainResult(model, history, best[1], final, state, times, config)


# ------------------------------------------------------------ persistence

def save_model(path, model: ModelState, config: TrainConfig | None = None, extra=None) -> None:
    meta = {"in_dim": model.gcn.in_dim, "hidden": [w.shape[1] for w in model.gcn.weights],
            "num_classes": model.classifier.num_classes, "motif_ids": model.motif_ids,
            "config": config.to_dict() if config else None, "extra": extra or {}}
    save_checkpoint(path, model.state_dict(), meta)


def load_model(path, registry=None) -> tuple[ModelState, dict]:
    """Rebuild a model from a checkpoint; ``registry`` must match its motif ids."""
    tensors, meta = load_checkpoint(path)
    if meta["motif_ids"]:
        if registry is None or registry.ids != meta["motif_ids"]:
            raise ContractError("checkpoint motif ids do not match the registry")
        reg = registry
    else:
        reg = None
    with using_dtype(next(iter(tensors.values())).dtype):
        model = init_model(meta["in_dim"], meta["num_classes"], reg, tuple(meta["hidden"]))
        model.load_state_dict(tensors)
    return model, meta


def replace_config(config: TrainConfig, **changes) -> TrainConfig:
    return replace(config, **changes)
