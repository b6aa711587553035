"""Twin-network embedding trained with a contrastive cosine loss.

Two copies of the same stack (shared weights) map a pair of vectors to a
low-dimensional space; the loss is (y - cos(e1, e2))^2 with pair label
y = +1 for same-dialect pairs and -1 otherwise. Backpropagation is
implemented by hand; both twins' contributions accumulate into the shared
parameter gradients. The convolution kernels live in `_kernels` and run
under numba or numpy depending on the DIALECTID_NO_NUMBA flag.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels
from .data import Domain, IVectorSet
from .errors import NumericError, ValidationError

ZERO_EMBEDDING_EPS = 1e-12


@dataclass(frozen=True)
class Conv1d:
    """1-D valid convolution layer over (channels, length) inputs."""

    kernel: int
    in_channels: int
    out_channels: int
    stride: int = 1
    activation: Optional[str] = "tanh"


@dataclass(frozen=True)
class Dense:
    """Fully connected layer; flattens whatever shape it receives."""

    in_dim: int
    out_dim: int
    activation: Optional[str] = None


Layer = Union[Conv1d, Dense]


@dataclass(frozen=True)
class SiameseArch:
    """Layer stack descriptor with declared input and output widths."""

    layers: tuple[Layer, ...]
    input_dim: int = 400
    output_dim: int = 200

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        self.shape_trace()  # raises on inconsistency

    def shape_trace(self) -> list[tuple[int, int]]:
        """Per-layer output (channels, length), validating the whole chain.

        The final layer must be a Dense with no activation so the embedding
        space stays linear at the output.
        """
        if not self.layers:
            raise ValidationError("architecture needs at least one layer")
        shape = (1, self.input_dim)  # channels, length
        trace = []
        for i, layer in enumerate(self.layers):
            if isinstance(layer, Conv1d):
                ch, length = shape
                if layer.in_channels != ch:
                    raise ValidationError(
                        "layer %d expects %d channels, gets %d" % (i, layer.in_channels, ch)
                    )
                if layer.kernel < 1 or layer.stride < 1:
                    raise ValidationError("layer %d has non-positive kernel/stride" % i)
                t_out = (length - layer.kernel) // layer.stride + 1
                if t_out < 1:
                    raise ValidationError(
                        "layer %d kernel %d does not fit input length %d"
                        % (i, layer.kernel, length)
                    )
                shape = (layer.out_channels, t_out)
            elif isinstance(layer, Dense):
                flat = shape[0] * shape[1]
                if layer.in_dim != flat:
                    raise ValidationError(
                        "layer %d expects in_dim %d, gets %d" % (i, layer.in_dim, flat)
                    )
                shape = (1, layer.out_dim)
            else:
                raise ValidationError("unsupported layer type %r" % (layer,))
            if layer.activation not in (None, "tanh"):
                raise ValidationError("unsupported activation %r" % (layer.activation,))
            trace.append(shape)
        last = self.layers[-1]
        if not isinstance(last, Dense) or last.activation is not None:
            raise ValidationError("final layer must be fully connected with no activation")
        if shape[0] * shape[1] != self.output_dim:
            raise ValidationError(
                "declared output dim %d but stack produces %d"
                % (self.output_dim, shape[0] * shape[1])
            )
        return trace


def default_arch(input_dim: int = 400, output_dim: int = 200) -> SiameseArch:
    """Two tanh conv layers (kernel 8, stride 2, channels 1->4->8) + linear dense."""
    t1 = (input_dim - 8) // 2 + 1
    t2 = (t1 - 8) // 2 + 1
    if t2 < 1:
        raise ValidationError("input dim %d too small for the default stack" % input_dim)
    return SiameseArch(
        layers=(
            Conv1d(kernel=8, in_channels=1, out_channels=4, stride=2, activation="tanh"),
            Conv1d(kernel=8, in_channels=4, out_channels=8, stride=2, activation="tanh"),
            Dense(in_dim=8 * t2, out_dim=output_dim, activation=None),
        ),
        input_dim=input_dim,
        output_dim=output_dim,
    )


@dataclass(frozen=True)
class SiameseParams:
    """Weights and biases for every layer, plus the arch and init seed."""

    arch: SiameseArch
    weights: tuple[np.ndarray, ...] = field(repr=False)
    biases: tuple[np.ndarray, ...] = field(repr=False)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(self.weights))
        object.__setattr__(self, "biases", tuple(self.biases))
        if len(self.weights) != len(self.arch.layers) or len(self.biases) != len(self.arch.layers):
            raise ValidationError("parameter count does not match layer count")
        for i, (layer, w, b) in enumerate(zip(self.arch.layers, self.weights, self.biases)):
            if isinstance(layer, Conv1d):
                expect_w = (layer.out_channels, layer.in_channels, layer.kernel)
                expect_b = (layer.out_channels,)
            else:
                expect_w = (layer.out_dim, layer.in_dim)
                expect_b = (layer.out_dim,)
            if w.shape != expect_w or b.shape != expect_b:
                raise ValidationError("layer %d parameter shape mismatch" % i)
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValidationError("layer %d has non-finite parameters" % i)

    def replace_arrays(self, weights, biases) -> "SiameseParams":
        return SiameseParams(arch=self.arch, weights=tuple(weights),
                             biases=tuple(biases), seed=self.seed)


@dataclass(frozen=True)
class IVectorPair:
    a: np.ndarray
    b: np.ndarray
    y: int  # +1 same dialect, -1 different

    def __post_init__(self):
        if self.y not in (1, -1):
            raise ValidationError("pair label must be +1 or -1, got %r" % (self.y,))


def init_params(arch: SiameseArch, seed: int = 0) -> SiameseParams:
    """Fan-in scaled uniform init (+-sqrt(6/fan_in)), zero biases, seeded."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for layer in arch.layers:
        if isinstance(layer, Conv1d):
            fan_in = layer.in_channels * layer.kernel
            shape = (layer.out_channels, layer.in_channels, layer.kernel)
            b_shape = (layer.out_channels,)
        else:
            fan_in = layer.in_dim
            shape = (layer.out_dim, layer.in_dim)
            b_shape = (layer.out_dim,)
        lim = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-lim, lim, size=shape))
        biases.append(np.zeros(b_shape))
    return SiameseParams(arch=arch, weights=tuple(weights), biases=tuple(biases), seed=seed)


def _forward_batch(params: SiameseParams, X: np.ndarray):
    """Run the stack on a (B, input_dim) batch; returns embeddings and caches.

    Cache per layer: (input in layer shape, activated output) — what the
    backward pass needs for weight gradients and tanh derivatives.
    """
    cur = np.ascontiguousarray(X, dtype=np.float64)[:, None, :]  # (B, 1, L)
    caches = []
    for layer, w, b in zip(params.arch.layers, params.weights, params.biases):
        if isinstance(layer, Conv1d):
            x_in = cur
            z = _kernels.conv1d_forward(x_in, w, b, layer.stride)
        else:
            x_in = cur.reshape(cur.shape[0], -1)
            z = x_in @ w.T + b
        if not np.all(np.isfinite(z)):
            raise NumericError("non-finite activations in forward pass (divergence)")
        a = np.tanh(z) if layer.activation == "tanh" else z
        caches.append((x_in, a))
        cur = a if a.ndim == 3 else a[:, None, :]
    return cur.reshape(cur.shape[0], -1), caches


def forward(params: SiameseParams, v: np.ndarray) -> np.ndarray:
    """Embed a single vector (input_dim,) -> (output_dim,)."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != params.arch.input_dim:
        raise ValidationError(
            "expected a vector of length %d, got shape %r" % (params.arch.input_dim, v.shape)
        )
    out, _ = _forward_batch(params, v[None, :])
    return out[0]


def forward_batch(params: SiameseParams, X: np.ndarray) -> np.ndarray:
    """Embed a (n, input_dim) matrix row-wise."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.arch.input_dim:
        raise ValidationError("expected (n, %d) input, got %r" % (params.arch.input_dim, X.shape))
    out, _ = _forward_batch(params, X)
    return out


def pair_distance(e1: np.ndarray, e2: np.ndarray) -> float:
    """Cosine similarity between two embeddings, in [-1, 1]."""
    n1 = np.linalg.norm(e1)
    n2 = np.linalg.norm(e2)
    if n1 < ZERO_EMBEDDING_EPS or n2 < ZERO_EMBEDDING_EPS:
        raise NumericError("zero embedding has no direction to score")
    return float(np.dot(e1, e2) / (n1 * n2))


def pair_loss(e1: np.ndarray, e2: np.ndarray, y: int) -> float:
    """(y - cos(e1, e2))^2; in [0, 4] since cos is in [-1, 1] and y is +-1."""
    return float((y - pair_distance(e1, e2)) ** 2)


def _backward_twin(params: SiameseParams, caches, d_embed, grads_w, grads_b):
    """Push d_embed back through one twin, accumulating into grads_w/b."""
    g = d_embed
    for idx in range(len(params.arch.layers) - 1, -1, -1):
        layer = params.arch.layers[idx]
        x_in, a = caches[idx]
        g = g.reshape(a.shape)
        if layer.activation == "tanh":
            g = g * (1.0 - a * a)
        if isinstance(layer, Dense):
            grads_w[idx] += g.T @ x_in
            grads_b[idx] += g.sum(axis=0)
            g = g @ params.weights[idx]
        else:
            g = np.ascontiguousarray(g)
            dx, dw, db = _kernels.conv1d_backward(x_in, params.weights[idx], layer.stride, g)
            grads_w[idx] += dw
            grads_b[idx] += db
            g = dx
    return grads_w, grads_b


def grad(params: SiameseParams, batch: Sequence[IVectorPair]):
    """Analytic gradient of the mean pair loss over `batch`.

    Returns (grad_weights, grad_biases, mean_loss) with gradients shaped
    exactly like the parameters. The cosine Jacobian flows through both
    twins and the shared weights accumulate both contributions. Pairs whose
    embedding norm falls below 1e-12 are skipped (they have no direction);
    if every pair degenerates the gradient is zero and the loss 0.0.
    """
    if not batch:
        raise ValidationError("gradient needs a non-empty batch")
    Xa = np.stack([p.a for p in batch]).astype(np.float64)
    Xb = np.stack([p.b for p in batch]).astype(np.float64)
    y = np.array([p.y for p in batch], dtype=np.float64)

    ea, ca = _forward_batch(params, Xa)
    eb, cb = _forward_batch(params, Xb)
    with np.errstate(over="ignore", invalid="ignore"):
        # overflow here is the divergence signal caught right below
        na = np.linalg.norm(ea, axis=1)
        nb = np.linalg.norm(eb, axis=1)
        keep = (na > ZERO_EMBEDDING_EPS) & (nb > ZERO_EMBEDDING_EPS)
        m = int(keep.sum())

        grads_w = [np.zeros_like(w) for w in params.weights]
        grads_b = [np.zeros_like(b) for b in params.biases]
        if m == 0:
            return grads_w, grads_b, 0.0

        na_s = np.where(keep, na, 1.0)
        nb_s = np.where(keep, nb, 1.0)
        cos = np.where(keep, (ea * eb).sum(axis=1) / (na_s * nb_s), 0.0)
        residual = np.where(keep, y - cos, 0.0)
        mean_loss = float((residual ** 2).sum() / m)
    if not np.isfinite(mean_loss):
        raise NumericError("non-finite pair loss (divergence)")

    # dL/dcos per pair, already divided by the retained count
    dcos = -2.0 * residual / m
    dea = dcos[:, None] * (eb / (na_s * nb_s)[:, None] - (cos / na_s ** 2)[:, None] * ea)
    deb = dcos[:, None] * (ea / (na_s * nb_s)[:, None] - (cos / nb_s ** 2)[:, None] * eb)
    dea[~keep] = 0.0
    deb[~keep] = 0.0

    _backward_twin(params, ca, dea, grads_w, grads_b)
    _backward_twin(params, cb, deb, grads_w, grads_b)
    for gw, gb in zip(grads_w, grads_b):
        if not (np.all(np.isfinite(gw)) and np.all(np.isfinite(gb))):
            raise NumericError("non-finite gradient (divergence)")
    return grads_w, grads_b, mean_loss


def sample_pairs(
    data: IVectorSet,
    n_pairs: int,
    positive_fraction: float = 0.5,
    seed: int = 0,
    dev_emphasis: float = 0.0,
) -> list[IVectorPair]:
    """Draw labeled pairs: positives within a dialect, negatives across.

    Utterances from the DEV domain carry sampling weight (1 + dev_emphasis)
    relative to TRN/TST ones, so the in-domain split can be emphasized.
    Deterministic given the seed. Positive count is round(n * fraction).
    """
    if n_pairs < 0:
        raise ValidationError("n_pairs must be nonnegative")
    if not 0.0 <= positive_fraction <= 1.0:
        raise ValidationError("positive_fraction must lie in [0, 1]")
    if dev_emphasis < 0.0:
        raise ValidationError("dev_emphasis must be nonnegative")

    labeled = [i for i, u in enumerate(data.utterances) if u.label is not None]
    if not labeled:
        raise ValidationError("pair sampling needs labeled utterances")
    labels = sorted({data.utterances[i].label for i in labeled})
    by_label = {
        lab: np.array([i for i in labeled if data.utterances[i].label == lab]) for lab in labels
    }
    n_pos = int(round(n_pairs * positive_fraction))
    n_neg = n_pairs - n_pos
    if n_pos > 0:
        singles = [lab for lab, idx in by_label.items() if idx.size < 2]
        if singles:
            raise ValidationError(
                "positive pairs impossible: dialect(s) %r have fewer than 2 utterances"
                % (singles,)
            )
    if n_neg > 0 and len(labels) < 2:
        raise ValidationError("negative pairs impossible with a single dialect")

    idx_all = np.array(labeled)
    weights = np.array(
        [1.0 + dev_emphasis if data.utterances[i].domain is Domain.DEV else 1.0 for i in labeled]
    )
    prob_all = weights / weights.sum()
    lab_of = {i: data.utterances[i].label for i in labeled}
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n_pos):
        i = int(rng.choice(idx_all, p=prob_all))
        pool = by_label[lab_of[i]]
        pool = pool[pool != i]
        w = weights[np.searchsorted(idx_all, pool)]
        j = int(rng.choice(pool, p=w / w.sum()))
        pairs.append(IVectorPair(a=data.vectors[i], b=data.vectors[j], y=1))
    for _ in range(n_neg):
        i = int(rng.choice(idx_all, p=prob_all))
        pool = np.array([j for j in labeled if lab_of[j] != lab_of[i]])
        w = weights[np.searchsorted(idx_all, pool)]
        j = int(rng.choice(pool, p=w / w.sum()))
        pairs.append(IVectorPair(a=data.vectors[i], b=data.vectors[j], y=-1))
    return pairs


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 64
    learning_rate: float = 0.01
    momentum: float = 0.9
    n_pairs: int = 2000
    positive_fraction: float = 0.5
    dev_emphasis: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.n_pairs < 1:
            raise ValidationError("epochs, batch_size and n_pairs must be positive")
        if self.learning_rate < 0 or not 0.0 <= self.momentum < 1.0:
            raise ValidationError("bad learning_rate/momentum")


def train(params: SiameseParams, data: IVectorSet, config: TrainConfig):
    """Mini-batch SGD with momentum on sampled pairs.

    Deterministic given config.seed (pair sampling and epoch shuffles both
    derive from it). Returns (trained params, per-epoch mean loss history).
    A non-finite loss aborts with the partial history attached to the
    raised NumericError.
    """
    pairs = sample_pairs(
        data,
        n_pairs=config.n_pairs,
        positive_fraction=config.positive_fraction,
        seed=config.seed,
        dev_emphasis=config.dev_emphasis,
    )
    rng = np.random.default_rng(config.seed + 1)
    weights = [w.copy() for w in params.weights]
    biases = [b.copy() for b in params.biases]
    vel_w = [np.zeros_like(w) for w in weights]
    vel_b = [np.zeros_like(b) for b in biases]
    history: list[float] = []
    current = params.replace_arrays(weights, biases)
    for _ in range(config.epochs):
        order = rng.permutation(len(pairs))
        total = 0.0
        counted = 0
        for lo in range(0, len(pairs), config.batch_size):
            chunk = [pairs[k] for k in order[lo:lo + config.batch_size]]
            try:
                gw, gb, loss = grad(current, chunk)
            except NumericError as err:
                raise NumericError(str(err), history=history) from err
            total += loss * len(chunk)
            counted += len(chunk)
            for i in range(len(weights)):
                vel_w[i] = config.momentum * vel_w[i] - config.learning_rate * gw[i]
                vel_b[i] = config.momentum * vel_b[i] - config.learning_rate * gb[i]
                weights[i] = weights[i] + vel_w[i]
                biases[i] = biases[i] + vel_b[i]
            current = current.replace_arrays(weights, biases)
        epoch_loss = total / counted if counted else 0.0
        if not np.isfinite(epoch_loss):
            raise NumericError("training diverged (non-finite epoch loss)", history=history)
        history.append(epoch_loss)
    return current, history
