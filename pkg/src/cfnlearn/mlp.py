"""Residual MLP mapping pair features to cost matrices, trained by hand.

Forward/backward are written directly in numpy (no autograd).  Layers:
an input linear + ReLU, `hidden_layers` equal-width linear + ReLU blocks with
a skip connection added every `residual_period` layers, and a linear output.
"""

import io
import json
from dataclasses import dataclass, asdict

import numpy as np


@dataclass
class MlpConfig:
    input_dim: int
    output_dim: int
    hidden_width: int = 128
    hidden_layers: int = 10
    residual_period: int = 2  # 0 disables skip connections


class ParamStore:
    """Flat named parameter tensors plus Adam moment state."""

    def __init__(self, config: MlpConfig, rng=None):
        self.config = config
        self.params = {}
        self.m = {}
        self.v = {}
        self.step = 0
        if rng is not None:
            self._init(rng)

    def _he_uniform(self, rng, fan_in, shape):
        limit = np.sqrt(6.0 / fan_in)
        return rng.uniform(-limit, limit, size=shape)

    def _init(self, rng):
        c = self.config
        self.params["W_in"] = self._he_uniform(rng, c.input_dim,
                                               (c.input_dim, c.hidden_width))
        self.params["b_in"] = np.zeros(c.hidden_width)
        for l in range(c.hidden_layers):
            self.params[f"W{l}"] = self._he_uniform(
                rng, c.hidden_width, (c.hidden_width, c.hidden_width))
            self.params[f"b{l}"] = np.zeros(c.hidden_width)
        self.params["W_out"] = self._he_uniform(rng, c.hidden_width,
                                                (c.hidden_width, c.output_dim))
        self.params["b_out"] = np.zeros(c.output_dim)
        for k, p in self.params.items():
            self.m[k] = np.zeros_like(p)
            self.v[k] = np.zeros_like(p)

    def num_params(self):
        return sum(p.size for p in self.params.values())

    # -- checkpointing ----------------------------------------------------

    def save(self, path, extra=None):
        meta = {"version": 1, "config": asdict(self.config), "step": self.step,
                "extra": extra or {}}
        arrays = {}
        for k, p in self.params.items():
            arrays["p_" + k] = p
        for k, p in self.m.items():
            arrays["m_" + k] = p
        for k, p in self.v.items():
            arrays["v_" + k] = p
        arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
        with open(path, "wb") as f:
            np.savez(f, **arrays)

    @classmethod
    def load(cls, path):
        with np.load(path) as data:
            meta = json.loads(bytes(data["meta"]).decode())
            store = cls(MlpConfig(**meta["config"]))
            store.step = meta["step"]
            for k in data.files:
                if k == "meta":
                    continue
                kind, name = k.split("_", 1)
                {"p": store.params, "m": store.m, "v": store.v}[kind][name] = data[k]
        return store, meta["extra"]


def forward(store: ParamStore, x):
    """Batched forward pass: x (B, input_dim) -> (B, output_dim) and a cache."""
    c = store.config
    p = store.params
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != c.input_dim:
        raise ValueError(f"feature dim {x.shape[1]} != input_dim {c.input_dim}")
    z_in = x @ p["W_in"] + p["b_in"]
    a = np.maximum(z_in, 0.0)
    acts = [a]  # acts[l] = activation entering hidden layer l
    zs = []
    for l in range(c.hidden_layers):
        z = a @ p[f"W{l}"] + p[f"b{l}"]
        a = np.maximum(z, 0.0)
        if c.residual_period and (l + 1) % c.residual_period == 0:
            a = a + acts[l + 1 - c.residual_period]
        zs.append(z)
        acts.append(a)
    out = a @ p["W_out"] + p["b_out"]
    cache = {"x": x, "z_in": z_in, "zs": zs, "acts": acts, "step": store.step}
    return out, cache


def backward(store: ParamStore, cache, upstream):
    """Gradients of sum(upstream * output) w.r.t. every parameter."""
    c = store.config
    p = store.params
    if cache["step"] != store.step:
        raise ValueError("stale forward cache: parameters have been updated")
    upstream = np.atleast_2d(np.asarray(upstream, dtype=float))
    acts, zs = cache["acts"], cache["zs"]
    grads = {"W_out": acts[-1].T @ upstream, "b_out": upstream.sum(axis=0)}
    da = upstream @ p["W_out"].T
    # d_skip[l]: gradient flowing into acts[l] through later skip connections
    d_skip = [None] * (c.hidden_layers + 1)
    for l in range(c.hidden_layers - 1, -1, -1):
        if d_skip[l + 1] is not None:
            da = da + d_skip[l + 1]
        dz = da * (zs[l] > 0)
        if c.residual_period and (l + 1) % c.residual_period == 0:
            src = l + 1 - c.residual_period
            d_skip[src] = da if d_skip[src] is None else d_skip[src] + da
        grads[f"W{l}"] = acts[l].T @ dz
        grads[f"b{l}"] = dz.sum(axis=0)
        da = dz @ p[f"W{l}"].T
    if d_skip[0] is not None:
        da = da + d_skip[0]
    dz_in = da * (cache["z_in"] > 0)
    grads["W_in"] = cache["x"].T @ dz_in
    grads["b_in"] = dz_in.sum(axis=0)
    return grads


def adam_step(store: ParamStore, grads, lr=1e-3, betas=(0.9, 0.999), eps=1e-8,
              weight_decay=0.0, decoupled=True):
    """One Adam update with bias correction; weight decay decoupled by default."""
    b1, b2 = betas
    for k, g in grads.items():
        if not np.isfinite(g).all():
            raise ValueError(f"non-finite gradient in tensor {k!r}")
    store.step += 1
    t = store.step
    for k, p in store.params.items():
        g = grads[k]
        if weight_decay and not decoupled and not k.startswith("b"):
            g = g + weight_decay * p
        store.m[k] = b1 * store.m[k] + (1 - b1) * g
        store.v[k] = b2 * store.v[k] + (1 - b2) * g * g
        m_hat = store.m[k] / (1 - b1 ** t)
        v_hat = store.v[k] / (1 - b2 ** t)
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)
        if weight_decay and decoupled and not k.startswith("b"):
            p -= lr * weight_decay * p
    return store
