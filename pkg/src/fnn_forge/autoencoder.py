"""MLP autoencoder with hand-written backpropagation and FNN-regularized training.

Encoder: GN - FC - BN - ELU - FC - BN - ELU - FC - BN (latent, no activation)
Decoder: GN - FC - BN - ELU - FC - BN - ELU - FC - BN - ELU - FC (output)

Everything runs in float64 numpy. Training is deterministic given the seed:
initialization, batch shuffling and Gaussian-noise draws use independent
streams spawned from it.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidArgument, NumericalError, ShapeError
from .fnn import FnnConfig, false_neighbor_fractions, fnn_loss_grad
from .timeseries import HankelMatrix, PointCloud

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = "fnnae-1"
HIDDEN = 10


# -- layers -------------------------------------------------------------------

class Layer:
    kind = "layer"
    param_names: tuple = ()

    def params(self):
        return {n: getattr(self, n) for n in self.param_names}

    def to_dict(self):
        return {"kind": self.kind}


class GaussianNoise(Layer):
    kind = "gaussian_noise"

    def __init__(self, sigma):
        self.sigma = float(sigma)

    def forward(self, x, train, rng=None, **_):
        if not train or self.sigma == 0.0:
            return x, None
        return x + self.sigma * rng.standard_normal(x.shape), None

    def backward(self, grad, cache):
        return grad, {}

    def to_dict(self):
        return {"kind": self.kind, "sigma": self.sigma}


class Affine(Layer):
    kind = "affine"
    param_names = ("W", "b")

    def __init__(self, W, b):
        self.W = np.asarray(W, dtype=np.float64)   # out x in
        self.b = np.asarray(b, dtype=np.float64)

    @classmethod
    def glorot(cls, n_in, n_out, rng):
        limit = np.sqrt(6.0 / (n_in + n_out))
        return cls(rng.uniform(-limit, limit, size=(n_out, n_in)), np.zeros(n_out))

    def forward(self, x, train, **_):
        return x @ self.W.T + self.b, x

    def backward(self, grad, x):
        return grad @ self.W, {"W": grad.T @ x, "b": grad.sum(axis=0)}

    def to_dict(self):
        return {"kind": self.kind, "W": self.W.tolist(), "b": self.b.tolist()}


class BatchNorm(Layer):
    kind = "batch_norm"
    param_names = ("gamma", "beta")

    def __init__(self, n, momentum=0.99, eps=1e-3, gamma=None, beta=None,
                 running_mean=None, running_var=None):
        self.gamma = np.ones(n) if gamma is None else np.asarray(gamma, dtype=np.float64)
        self.beta = np.zeros(n) if beta is None else np.asarray(beta, dtype=np.float64)
        self.running_mean = np.zeros(n) if running_mean is None else np.asarray(running_mean, dtype=np.float64)
        self.running_var = np.ones(n) if running_var is None else np.asarray(running_var, dtype=np.float64)
        self.momentum = float(momentum)
        self.eps = float(eps)

    def forward(self, x, train, freeze_bn=False, **_):
        if train and not freeze_bn:
            mu = x.mean(axis=0)
            var = x.var(axis=0)
            m = self.momentum
            self.running_mean = m * self.running_mean + (1 - m) * mu
            self.running_var = m * self.running_var + (1 - m) * var
            inv = 1.0 / np.sqrt(var + self.eps)
            xhat = (x - mu) * inv
            return self.gamma * xhat + self.beta, (xhat, inv, True)
        inv = 1.0 / np.sqrt(self.running_var + self.eps)
        xhat = (x - self.running_mean) * inv
        return self.gamma * xhat + self.beta, (xhat, inv, False)

    def backward(self, grad, cache):
        xhat, inv, batch_stats = cache
        grads = {"gamma": (grad * xhat).sum(axis=0), "beta": grad.sum(axis=0)}
        g = grad * self.gamma
        if not batch_stats:
            return g * inv, grads
        n = grad.shape[0]
        dx = inv / n * (n * g - g.sum(axis=0) - xhat * (g * xhat).sum(axis=0))
        return dx, grads

    def to_dict(self):
        return {"kind": self.kind, "gamma": self.gamma.tolist(), "beta": self.beta.tolist(),
                "running_mean": self.running_mean.tolist(),
                "running_var": self.running_var.tolist(),
                "momentum": self.momentum, "eps": self.eps}


class ELU(Layer):
    kind = "elu"

    def __init__(self, alpha=1.0):
        self.alpha = float(alpha)

    def forward(self, x, train, **_):
        neg = self.alpha * np.expm1(np.minimum(x, 0.0))
        y = np.where(x > 0, x, neg)
        return y, (x, neg)

    def backward(self, grad, cache):
        x, neg = cache
        return grad * np.where(x > 0, 1.0, neg + self.alpha), {}

    def to_dict(self):
        return {"kind": self.kind, "alpha": self.alpha}


def layer_from_dict(d):
    kind = d["kind"]
    if kind == "gaussian_noise":
        return GaussianNoise(d["sigma"])
    if kind == "affine":
        return Affine(np.array(d["W"]), np.array(d["b"]))
    if kind == "batch_norm":
        return BatchNorm(len(d["gamma"]), d["momentum"], d["eps"], np.array(d["gamma"]),
                         np.array(d["beta"]), np.array(d["running_mean"]), np.array(d["running_var"]))
    if kind == "elu":
        return ELU(d["alpha"])
    raise InvalidArgument(f"unknown layer kind {kind!r}")


class LayerStack:
    def __init__(self, layers):
        self.layers = list(layers)

    def forward(self, x, train, rng=None, freeze_bn=False):
        caches = []
        for layer in self.layers:
            x, c = layer.forward(x, train, rng=rng, freeze_bn=freeze_bn)
            caches.append(c)
        return x, caches

    def backward(self, grad, caches):
        grads = [None] * len(self.layers)
        for i in range(len(self.layers) - 1, -1, -1):
            grad, g = self.layers[i].backward(grad, caches[i])
            grads[i] = g
        return grad, grads

    def named_params(self, prefix):
        for i, layer in enumerate(self.layers):
            for n, p in layer.params().items():
                yield f"{prefix}.{i}.{n}", layer, n, p

    @property
    def width_in(self):
        return next(l.W.shape[1] for l in self.layers if isinstance(l, Affine))

    @property
    def width_out(self):
        return [l for l in self.layers if isinstance(l, Affine)][-1].W.shape[0]

    def to_list(self):
        return [l.to_dict() for l in self.layers]

    @classmethod
    def from_list(cls, items):
        return cls([layer_from_dict(d) for d in items])


# -- configuration and model --------------------------------------------------

@dataclass
class TrainConfig:
    lam: float = 0.03
    lr: float = 1e-3
    epochs: int = 100
    batch_size: int = 512
    seed: int = 0
    gn_sigma: float = 0.5
    fnn: FnnConfig = field(default_factory=FnnConfig)
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    bn_momentum: float = 0.99
    bn_eps: float = 1e-3
    latent: int = 10

    def __post_init__(self):
        if isinstance(self.fnn, dict):
            self.fnn = FnnConfig(**self.fnn)
        if self.lam < 0:
            raise InvalidArgument(f"lambda must be >= 0, got {self.lam}")
        if self.batch_size < 2:
            raise InvalidArgument(f"batch size must be >= 2, got {self.batch_size}")
        if self.epochs < 1:
            raise InvalidArgument(f"epochs must be >= 1, got {self.epochs}")

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainedAutoencoder:
    encoder: LayerStack
    decoder: LayerStack
    T: int
    L: int
    config: dict = field(default_factory=dict)
    history: list = field(default_factory=list)
    seed: int = 0

    # parameters ---------------------------------------------------------
    def named_params(self):
        yield from self.encoder.named_params("encoder")
        yield from self.decoder.named_params("decoder")

    def param_count(self, part=None):
        stacks = {"encoder": [self.encoder], "decoder": [self.decoder]}.get(part, [self.encoder, self.decoder])
        return sum(p.size for s in stacks for l in s.layers for p in l.params().values())

    # passes ---------------------------------------------------------------
    def forward(self, batch, mode="infer", rng=None, freeze_bn=False):
        """Return (latent, reconstruction, cache)."""
        x = np.asarray(batch, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.T:
            raise ShapeError(f"expected batch of width {self.T}, got shape {x.shape}")
        train = mode == "train"
        if train and rng is None:
            rng = np.random.default_rng(0)
        h, enc_cache = self.encoder.forward(x, train, rng, freeze_bn)
        xr, dec_cache = self.decoder.forward(h, train, rng, freeze_bn)
        return h, xr, {"x": x, "h": h, "xr": xr, "enc": enc_cache, "dec": dec_cache}

    def loss_and_grad(self, cache, lam=0.0, fnn_cfg=None, f_bar=None):
        """Total loss and parameter gradients from a train-mode forward cache.

        Returns ``(total, grads, parts)`` where ``grads`` maps parameter names
        to arrays and ``parts`` holds the reconstruction and FNN terms.
        """
        x, h, xr = cache["x"], cache["h"], cache["xr"]
        diff = xr - x
        recon = float(np.mean(diff * diff))
        g_out = 2.0 * diff / diff.size
        g_h, dec_grads = self.decoder.backward(g_out, cache["dec"])
        fnn_value, diag = 0.0, None
        if lam > 0:
            g_fnn, diag = fnn_loss_grad(h, fnn_cfg or FnnConfig(), f_bar=f_bar)
            fnn_value = diag.loss
            g_h = g_h + lam * g_fnn
        _, enc_grads = self.encoder.backward(g_h, cache["enc"])
        total = recon + lam * fnn_value
        grads = {}
        for prefix, stack, lgrads in (("encoder", self.encoder, enc_grads),
                                      ("decoder", self.decoder, dec_grads)):
            for i, g in enumerate(lgrads):
                for n, v in (g or {}).items():
                    if n in stack.layers[i].param_names:
                        grads[f"{prefix}.{i}.{n}"] = v
        return total, grads, {"recon": recon, "fnn": fnn_value, "diag": diag}

    def embed(self, X) -> PointCloud:
        rows = X.rows if isinstance(X, HankelMatrix) else np.asarray(X, dtype=np.float64)
        h, _ = self.encoder.forward(self._check(rows), False)
        dt = X.source_dt if isinstance(X, HankelMatrix) else 1.0
        return PointCloud(h, dt)

    def reconstruct(self, X) -> np.ndarray:
        rows = X.rows if isinstance(X, HankelMatrix) else np.asarray(X, dtype=np.float64)
        _, xr, _ = self.forward(self._check(rows), "infer")
        return xr

    def _check(self, rows):
        if rows.ndim != 2 or rows.shape[1] != self.T:
            raise ShapeError(f"expected rows of width {self.T}, got shape {rows.shape}")
        return rows

    # persistence ------------------------------------------------------------
    def to_dict(self):
        return {"version": CHECKPOINT_VERSION, "T": self.T, "L": self.L, "seed": self.seed,
                "config": self.config, "encoder": self.encoder.to_list(),
                "decoder": self.decoder.to_list(), "history": self.history}

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def from_dict(cls, d):
        if d.get("version") != CHECKPOINT_VERSION:
            raise InvalidArgument(f"unsupported checkpoint version {d.get('version')!r}")
        return cls(LayerStack.from_list(d["encoder"]), LayerStack.from_list(d["decoder"]),
                   int(d["T"]), int(d["L"]), d.get("config", {}), d.get("history", []),
                   int(d.get("seed", 0)))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _streams(seed):
    init, shuffle, noise = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(init), np.random.default_rng(shuffle), np.random.default_rng(noise)


def init_model(T: int = 10, L: int = 10, seed: int = 0, gn_sigma: float = 0.5,
               bn_momentum: float = 0.99, bn_eps: float = 1e-3) -> TrainedAutoencoder:
    """Untrained autoencoder with Glorot-uniform weights."""
    if T < 2 or L < 2:
        raise InvalidArgument(f"T and L must be >= 2, got T={T}, L={L}")
    rng, _, _ = _streams(seed)

    def bn(n):
        return BatchNorm(n, bn_momentum, bn_eps)

    H = HIDDEN
    encoder = LayerStack([
        GaussianNoise(gn_sigma),
        Affine.glorot(T, H, rng), bn(H), ELU(),
        Affine.glorot(H, H, rng), bn(H), ELU(),
        Affine.glorot(H, L, rng), bn(L),
    ])
    decoder = LayerStack([
        GaussianNoise(gn_sigma),
        Affine.glorot(L, H, rng), bn(H), ELU(),
        Affine.glorot(H, H, rng), bn(H), ELU(),
        Affine.glorot(H, H, rng), bn(H), ELU(),
        Affine.glorot(H, T, rng),
    ])
    return TrainedAutoencoder(encoder, decoder, T, L, seed=seed)


class Adam:
    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m, self.v, self.t = {}, {}, 0

    def step(self, model: TrainedAutoencoder, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr = self.lr * np.sqrt(1 - b2 ** self.t) / (1 - b1 ** self.t)
        for name, layer, pname, p in model.named_params():
            g = grads[name]
            m = self.m.get(name)
            if m is None:
                m = self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            v = self.v[name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            setattr(layer, pname, p - corr * m / (np.sqrt(v) + self.eps))


def _rows(X):
    return X.rows if isinstance(X, HankelMatrix) else np.asarray(X, dtype=np.float64)


def train(X_train, X_val=None, cfg: TrainConfig | None = None, callback=None) -> TrainedAutoencoder:
    """Fit an autoencoder with Adam on shuffled mini-batches.

    The history records, per epoch, the mean training reconstruction loss,
    the mean FNN loss, the validation reconstruction loss (inference mode) and
    the mean false-neighbor fractions.
    """
    cfg = cfg or TrainConfig()
    rows = _rows(X_train)
    n, T = rows.shape
    if n < cfg.batch_size:
        raise InvalidArgument(f"{n} training rows is fewer than batch size {cfg.batch_size}")
    model = init_model(T, cfg.latent, cfg.seed, cfg.gn_sigma, cfg.bn_momentum, cfg.bn_eps)
    model.config = cfg.to_dict()
    _, shuffle_rng, noise_rng = _streams(cfg.seed)
    opt = Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
    val_rows = _rows(X_val) if X_val is not None else None
    for epoch in range(cfg.epochs):
        perm = shuffle_rng.permutation(n)
        recon_sum = fnn_sum = 0.0
        f_sum = np.zeros(cfg.latent)
        n_batches = 0
        for bi, start in enumerate(range(0, n, cfg.batch_size)):
            idx = perm[start:start + cfg.batch_size]
            if len(idx) < 2:
                continue
            _, _, cache = model.forward(rows[idx], "train", noise_rng)
            f_bar = None
            if cfg.lam > 0:
                f_bar = false_neighbor_fractions(cache["h"], cfg.fnn).f_bar
            total, grads, parts = model.loss_and_grad(cache, cfg.lam, cfg.fnn, f_bar)
            if not np.isfinite(total):
                err = NumericalError("non-finite training loss", epoch, bi)
                err.model = model
                raise err
            opt.step(model, grads)
            recon_sum += parts["recon"]
            fnn_sum += parts["fnn"]
            if f_bar is not None:
                f_sum += f_bar
            n_batches += 1
        record = {"epoch": epoch, "recon": recon_sum / n_batches, "fnn": fnn_sum / n_batches,
                  "f_bar": (f_sum / n_batches).tolist() if cfg.lam > 0 else None}
        if val_rows is not None:
            xr = model.reconstruct(val_rows)
            record["val"] = float(np.mean((xr - val_rows) ** 2))
        model.history.append(record)
        if callback is not None:
            callback(record)
        log.debug("epoch %d recon %.5f fnn %.5f", epoch, record["recon"], record["fnn"])
    return model


def embed(model: TrainedAutoencoder, X) -> PointCloud:
    return model.embed(X)


def latent_variance_fractions(cloud) -> np.ndarray:
    """Per-unit variance normalized to unit sum, sorted descending."""
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud)
    v = pts.var(axis=0)
    total = v.sum()
    return np.sort(v / total if total > 0 else v)[::-1]
