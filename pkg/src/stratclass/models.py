"""Differentiable score models h: R^d -> R with classifier f = sgn+(h).

Three families share one interface:

* ``LinearModel``  h(x) = w.x + b
* ``MlpModel``     tanh hidden layers, identity output
* ``IcnnModel``    softplus hidden layers; hidden-to-hidden weights kept
                   nonnegative so h is convex in x

Every method accepts a single vector ``(d,)`` or a batch ``(n, d)``;
a single vector gives scalar/vector results, a batch gives row-aligned
arrays. Gradients are hand-written reverse mode.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .errors import DataError
from .numerics import make_rng

Params = dict[str, np.ndarray]


def _softplus(a):
    return np.logaddexp(0.0, a)


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def _uniform(rng, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class ScoreModel:
    """Common plumbing. Subclasses implement ``_forward`` and ``_backward``."""

    family: str = ""

    def __init__(self, params: Params):
        self.params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
        self._check()

    # -- to implement -------------------------------------------------
    @property
    def input_dim(self) -> int:
        raise NotImplementedError

    @property
    def sizes(self) -> tuple[int, ...]:
        raise NotImplementedError

    def _check(self) -> None:
        for k, v in self.params.items():
            if not np.all(np.isfinite(v)):
                raise ValueError(f"parameter {k} has non-finite entries")

    def _forward(self, X: np.ndarray):
        """Return (scores (n,), cache)."""
        raise NotImplementedError

    def _backward(self, cache, g: np.ndarray, want_params: bool):
        """Backpropagate upstream ``g`` (n,). Returns (grad_X (n,d), grads or None)."""
        raise NotImplementedError

    # -- public API ----------------------------------------------------
    def _batch(self, x):
        X = np.asarray(x, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ValueError(
                f"dimension mismatch: model expects {self.input_dim} features, got shape {np.shape(x)}"
            )
        return X, single

    def score(self, x):
        X, single = self._batch(x)
        s, _ = self._forward(X)
        return float(s[0]) if single else s

    def classify(self, x):
        s = self.score(x)
        if np.ndim(s) == 0:
            return 1 if s >= 0 else -1
        return np.where(s >= 0, 1, -1)

    def input_grad(self, x):
        X, single = self._batch(x)
        _, cache = self._forward(X)
        gX, _ = self._backward(cache, np.ones(X.shape[0]), want_params=False)
        return gX[0] if single else gX

    def score_and_input_grad(self, x):
        X, single = self._batch(x)
        s, cache = self._forward(X)
        gX, _ = self._backward(cache, np.ones(X.shape[0]), want_params=False)
        return (float(s[0]), gX[0]) if single else (s, gX)

    def param_grad(self, x, upstream) -> Params:
        """Gradient of sum_i upstream_i * h(x_i) with respect to every parameter."""
        X, _ = self._batch(x)
        g = np.broadcast_to(np.asarray(upstream, dtype=np.float64), (X.shape[0],))
        _, cache = self._forward(X)
        _, grads = self._backward(cache, np.ascontiguousarray(g), want_params=True)
        return grads

    def copy(self):
        return type(self)(self.params)

    def apply_update(self, grads: Params, lr: float) -> None:
        for k, g in grads.items():
            self.params[k] -= lr * g

    def project(self) -> None:
        """Restore family constraints in place (no-op except for ICNN)."""

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and self.params.keys() == other.params.keys()
            and all(np.array_equal(self.params[k], other.params[k]) for k in self.params)
        )

    def __repr__(self):
        return f"{type(self).__name__}(sizes={self.sizes})"


class LinearModel(ScoreModel):
    family = "linear"

    def __init__(self, w, b: float = 0.0):
        super().__init__({"w": np.atleast_1d(w), "b": np.atleast_1d(float(b))})

    @classmethod
    def from_params(cls, params: Params):
        return cls(params["w"], float(np.ravel(params["b"])[0]))

    def copy(self):
        return LinearModel(self.w.copy(), self.b)

    @classmethod
    def init(cls, d: int, seed: int = 0):
        rng = make_rng(seed)
        return cls(_uniform(rng, d, (d,)), float(_uniform(rng, d, ())))

    @property
    def w(self) -> np.ndarray:
        return self.params["w"]

    @property
    def b(self) -> float:
        return float(self.params["b"][0])

    @property
    def input_dim(self):
        return self.w.shape[0]

    @property
    def sizes(self):
        return (self.input_dim, 1)

    def _check(self):
        super()._check()
        if self.params["w"].ndim != 1 or self.params["b"].shape != (1,):
            raise ValueError("linear model needs w of shape (d,) and scalar b")

    def _forward(self, X):
        return X @ self.w + self.params["b"][0], X

    def _backward(self, X, g, want_params):
        gX = np.outer(g, self.w)
        if not want_params:
            return gX, None
        return gX, {"w": g @ X, "b": np.array([g.sum()])}


class MlpModel(ScoreModel):
    """Fully connected net; weights ``W{k}`` have shape (out, in)."""

    family = "mlp"

    @classmethod
    def init(cls, sizes, seed: int = 0):
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) < 2 or sizes[-1] != 1 or min(sizes) < 1:
            raise ValueError(f"layer sizes must be positive and end in 1, got {sizes}")
        rng = make_rng(seed)
        params = {}
        for k, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            params[f"W{k}"] = _uniform(rng, n_in, (n_out, n_in))
            params[f"b{k}"] = _uniform(rng, n_in, (n_out,))
        return cls(params)

    @property
    def n_layers(self) -> int:
        return len(self.params) // 2

    @property
    def input_dim(self):
        return self.params["W0"].shape[1]

    @property
    def sizes(self):
        return (self.input_dim,) + tuple(self.params[f"W{k}"].shape[0] for k in range(self.n_layers))

    def _check(self):
        super()._check()
        n_in = self.params["W0"].shape[1]
        for k in range(len(self.params) // 2):
            W, b = self.params[f"W{k}"], self.params[f"b{k}"]
            if W.ndim != 2 or W.shape[1] != n_in or b.shape != (W.shape[0],):
                raise ValueError(f"layer {k} shapes do not chain")
            n_in = W.shape[0]
        if n_in != 1:
            raise ValueError("last layer must have one output")

    def _forward(self, X):
        acts = [X]
        a = X
        L = self.n_layers
        for k in range(L - 1):
            a = np.tanh(a @ self.params[f"W{k}"].T + self.params[f"b{k}"])
            acts.append(a)
        out = a @ self.params[f"W{L - 1}"].T + self.params[f"b{L - 1}"]
        return out[:, 0], acts

    def _backward(self, acts, g, want_params):
        L = self.n_layers
        grads = {} if want_params else None
        delta = g[:, None]
        for k in range(L - 1, -1, -1):
            if want_params:
                grads[f"W{k}"] = delta.T @ acts[k]
                grads[f"b{k}"] = delta.sum(axis=0)
            delta = delta @ self.params[f"W{k}"]
            if k > 0:
                delta = delta * (1.0 - acts[k] ** 2)
        if want_params:
            grads = {k: grads[k] for k in self.params}
        return delta, grads


class IcnnModel(ScoreModel):
    """Input-convex network.

    Layer 0:      u1 = softplus(Wx0 x + b0)
    Layer k>0:    u_{k+1} = softplus(Wz{k} u_k + Wx{k} x + b{k})
    Output (K):   h = Wz{K} u_K + Wx{K} x + b{K}

    ``Wz*`` (hidden-to-hidden) must stay entrywise nonnegative.
    """

    family = "icnn"

    @classmethod
    def init(cls, sizes, seed: int = 0):
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) < 3 or sizes[-1] != 1 or min(sizes) < 1:
            raise ValueError(f"ICNN sizes need at least one hidden layer and end in 1, got {sizes}")
        rng = make_rng(seed)
        d = sizes[0]
        params = {}
        for k, n_out in enumerate(sizes[1:]):
            if k > 0:
                n_prev = sizes[k]
                params[f"Wz{k}"] = np.abs(_uniform(rng, n_prev, (n_out, n_prev)))
            params[f"Wx{k}"] = _uniform(rng, d, (n_out, d))
            params[f"b{k}"] = _uniform(rng, d, (n_out,))
        return cls(params)

    @property
    def n_layers(self) -> int:
        return sum(1 for k in self.params if k.startswith("b"))

    @property
    def input_dim(self):
        return self.params["Wx0"].shape[1]

    @property
    def sizes(self):
        return (self.input_dim,) + tuple(self.params[f"b{k}"].shape[0] for k in range(self.n_layers))

    def hidden_weight_keys(self) -> list[str]:
        return [k for k in self.params if k.startswith("Wz")]

    def _check(self):
        super()._check()
        d = self.params["Wx0"].shape[1]
        n_prev = None
        for k in range(self.n_layers):
            Wx, b = self.params[f"Wx{k}"], self.params[f"b{k}"]
            if Wx.shape != (b.shape[0], d):
                raise ValueError(f"layer {k} input-passthrough shape mismatch")
            if k > 0 and self.params[f"Wz{k}"].shape != (b.shape[0], n_prev):
                raise ValueError(f"layer {k} hidden weight shape mismatch")
            n_prev = b.shape[0]
        if n_prev != 1:
            raise ValueError("last layer must have one output")

    def _forward(self, X):
        p = self.params
        K = self.n_layers - 1
        pres, us = [], []
        u = None
        for k in range(K + 1):
            pre = X @ p[f"Wx{k}"].T + p[f"b{k}"]
            if k > 0:
                pre = pre + u @ p[f"Wz{k}"].T
            if k == K:
                return pre[:, 0], (X, pres, us)
            pres.append(pre)
            u = _softplus(pre)
            us.append(u)
        raise AssertionError("unreachable")

    def _backward(self, cache, g, want_params):
        X, pres, us = cache
        p = self.params
        K = self.n_layers - 1
        grads = {} if want_params else None
        gX = np.zeros_like(X)
        delta = g[:, None]  # gradient w.r.t. pre-activation of layer k
        for k in range(K, -1, -1):
            gX += delta @ p[f"Wx{k}"]
            if want_params:
                grads[f"Wx{k}"] = delta.T @ X
                grads[f"b{k}"] = delta.sum(axis=0)
                if k > 0:
                    grads[f"Wz{k}"] = delta.T @ us[k - 1]
            if k > 0:
                delta = (delta @ p[f"Wz{k}"]) * _sigmoid(pres[k - 1])
        if want_params:
            grads = {k: grads[k] for k in self.params}
        return gX, grads

    def project(self) -> None:
        for k in self.hidden_weight_keys():
            np.maximum(self.params[k], 0.0, out=self.params[k])


# -- module-level operations ---------------------------------------------


def score(model: ScoreModel, x):
    return model.score(x)


def classify(model: ScoreModel, x):
    return model.classify(x)


def input_grad(model: ScoreModel, x):
    return model.input_grad(x)


def param_grad(model: ScoreModel, x, upstream) -> Params:
    return model.param_grad(x, upstream)


def icnn_project(model: IcnnModel) -> IcnnModel:
    """Return a copy with every hidden-to-hidden weight clamped at zero."""
    out = model.copy()
    out.project()
    return out


def build_model(family: str, d: int, hidden=None, seed: int = 0) -> ScoreModel:
    """Construct a freshly initialised model. ``hidden`` defaults to (8, 8)
    for 2-D inputs and (16, 16) otherwise."""
    if family == "linear":
        return LinearModel.init(d, seed)
    if hidden is None:
        hidden = (8, 8) if d <= 2 else (16, 16)
    sizes = (d, *hidden, 1)
    if family == "mlp":
        return MlpModel.init(sizes, seed)
    if family == "icnn":
        return IcnnModel.init(sizes, seed)
    raise ValueError(f"unknown model family {family!r}")


# -- serialization ----------------------------------------------------------
#
#   # stratclass-model <family> <size> <size> ...
#   <key> = <shape dims> : <row-major values>

_FAMILIES = {"linear": LinearModel, "mlp": MlpModel, "icnn": IcnnModel}


def model_to_text(model: ScoreModel) -> str:
    lines = [f"# stratclass-model {model.family} " + " ".join(str(s) for s in model.sizes)]
    for k, v in model.params.items():
        dims = " ".join(str(s) for s in v.shape)
        vals = " ".join(repr(float(t)) for t in v.ravel())
        lines.append(f"{k} = {dims} : {vals}")
    return "\n".join(lines) + "\n"


def model_from_text(text: str) -> ScoreModel:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty model file")
    m = re.match(r"#\s*stratclass-model\s+(\w+)\s+([\d\s]+)$", lines[0].strip())
    if not m or m.group(1) not in _FAMILIES:
        raise ValueError(f"bad model header: {lines[0]!r}")
    family = m.group(1)
    sizes = tuple(int(s) for s in m.group(2).split())
    params = {}
    for ln in lines[1:]:
        key, _, rest = ln.partition("=")
        dims, _, vals = rest.partition(":")
        shape = tuple(int(s) for s in dims.split())
        arr = np.array([float(t) for t in vals.split()], dtype=np.float64)
        params[key.strip()] = arr.reshape(shape)
    cls = _FAMILIES[family]
    model = cls.from_params(params) if cls is LinearModel else cls(params)
    if model.sizes != sizes:
        raise ValueError(f"header sizes {sizes} disagree with parameters {model.sizes}")
    return model


def save_model(model: ScoreModel, path) -> None:
    Path(path).write_text(model_to_text(model))


def load_model(path) -> ScoreModel:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"model file not found: {path}")
    try:
        return model_from_text(path.read_text())
    except (ValueError, KeyError) as e:
        raise DataError(f"{path}: not a valid model file ({e})") from None
