"""Small feedforward networks with hand-rolled reverse-mode gradients.

Everything operates on flat float64 parameter vectors so that optimizer
state, Polyak targets and checkpoints stay trivial. Architectures are
two ELU hidden layers by default with an output head chosen per role:
identity for critics, softplus for the nonnegative multiplier, and a
tanh squashed into the action box for the actor.

forward() optionally returns the cache backward() needs; backward()
produces exact gradients of sum(upstream * output) with respect to the
parameters and the input, which is all the actor-critic updates need
(input gradients provide the d/da terms of the policy gradient).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

CHECKPOINT_MAGIC = b"RLNKPT01"
CHECKPOINT_VERSION = 1

_OUTPUT_CODES = {"identity": 0, "softplus": 1, "tanh_box": 2}
_HIDDEN_CODES = {"elu": 0, "identity": 1}


@dataclass(frozen=True)
class MlpSpec:
    """Layer sizes plus activation tags; immutable and hashable."""

    sizes: tuple[int, ...]
    output: str = "identity"
    hidden: str = "elu"
    out_low: tuple[float, ...] | None = None
    out_high: tuple[float, ...] | None = None

    def __post_init__(self):
        if len(self.sizes) < 2 or any(s < 1 for s in self.sizes):
            raise ValueError(f"bad layer sizes {self.sizes}")
        if self.output not in _OUTPUT_CODES:
            raise ValueError(f"unknown output activation {self.output!r}")
        if self.hidden not in _HIDDEN_CODES:
            raise ValueError(f"unknown hidden activation {self.hidden!r}")
        if self.output == "tanh_box":
            if self.out_low is None or self.out_high is None:
                raise ValueError("tanh_box needs out_low/out_high")
            if len(self.out_low) != self.sizes[-1] or len(self.out_high) != self.sizes[-1]:
                raise ValueError("tanh_box bounds must match the output dim")

    @property
    def n_params(self) -> int:
        return sum(
            (fan_in + 1) * fan_out
            for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:])
        )

    def init(self, rng: np.random.Generator) -> np.ndarray:
        """He-style uniform fan-in initialisation, zero biases."""
        chunks = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            limit = np.sqrt(6.0 / fan_in)
            chunks.append(rng.uniform(-limit, limit, size=fan_in * fan_out))
            chunks.append(np.zeros(fan_out))
        return np.concatenate(chunks)

    def layer_views(self, params: np.ndarray):
        """Yield (W, b) views into the flat parameter vector."""
        if params.shape != (self.n_params,):
            raise ValueError(
                f"params length {params.shape} != expected ({self.n_params},)"
            )
        off = 0
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            w = params[off:off + fan_in * fan_out].reshape(fan_out, fan_in)
            off += fan_in * fan_out
            b = params[off:off + fan_out]
            off += fan_out
            yield w, b


def _box_mid_half(spec: MlpSpec):
    lo = np.asarray(spec.out_low)
    hi = np.asarray(spec.out_high)
    return (lo + hi) / 2.0, (hi - lo) / 2.0


def forward(spec: MlpSpec, params: np.ndarray, X: np.ndarray,
            want_cache: bool = False):
    """Batched forward pass; X has shape (n, sizes[0])."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != spec.sizes[0]:
        raise ValueError(f"input shape {X.shape} != (n, {spec.sizes[0]})")
    layers = list(spec.layer_views(np.asarray(params, dtype=np.float64)))
    h = X
    pre = []
    hidden = []
    for i, (w, b) in enumerate(layers):
        z = h @ w.T + b
        pre.append(z)
        if i < len(layers) - 1:
            h = np.where(z > 0, z, np.expm1(np.minimum(z, 0.0))) \
                if spec.hidden == "elu" else z
            hidden.append(h)
    z_out = pre[-1]
    if spec.output == "identity":
        y = z_out
    elif spec.output == "softplus":
        y = np.logaddexp(0.0, z_out)
    else:
        mid, half = _box_mid_half(spec)
        y = mid + half * np.tanh(z_out)
    if not want_cache:
        return y
    return y, (X, pre, hidden)


def backward(spec: MlpSpec, params: np.ndarray, cache, upstream: np.ndarray):
    """Exact gradients of sum(upstream * output).

    Returns (param_grad, input_grad): param_grad flat like params,
    input_grad shaped like the cached input batch. Scale `upstream` by
    1/n beforehand to differentiate a batch mean.
    """
    X, pre, hidden = cache
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != pre[-1].shape:
        raise ValueError(
            f"upstream shape {upstream.shape} != output shape {pre[-1].shape}"
        )
    layers = list(spec.layer_views(np.asarray(params, dtype=np.float64)))

    z_out = pre[-1]
    if spec.output == "identity":
        dz = upstream
    elif spec.output == "softplus":
        dz = upstream * expit(z_out)
    else:
        _, half = _box_mid_half(spec)
        t = np.tanh(z_out)
        dz = upstream * half * (1.0 - t * t)

    grads = [None] * len(layers)
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        h_prev = X if i == 0 else hidden[i - 1]
        dw = dz.T @ h_prev
        db = dz.sum(axis=0)
        grads[i] = (dw, db)
        dh = dz @ w
        if i > 0:
            z_prev = pre[i - 1]
            if spec.hidden == "elu":
                # d/dz elu = 1 for z > 0, exp(z) = elu(z) + 1 otherwise.
                dz = dh * np.where(z_prev > 0, 1.0, hidden[i - 1] + 1.0)
            else:
                dz = dh
    param_grad = np.concatenate(
        [np.concatenate([dw.ravel(), db]) for dw, db in grads]
    )
    return param_grad, dh


@dataclass
class ProjectionSpec:
    """Update projection: global L2 gradient clip plus an optional
    per-parameter box the updated vector is clipped into."""

    clip_norm: float = 10.0
    box_low: float | None = None
    box_high: float | None = None

    def __post_init__(self):
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive")


def clip_gradient(grad: np.ndarray, threshold: float) -> np.ndarray:
    """Scale grad to global L2 norm `threshold` if it exceeds it."""
    norm = float(np.linalg.norm(grad))
    if norm > threshold:
        return grad * (threshold / norm)
    return grad


@dataclass
class AdamState:
    """Adam moments with a linearly annealed learning rate."""

    lr_start: float
    lr_end: float
    anneal_steps: int
    n_params: int
    beta1: float = 0.99
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray = field(init=False)
    v: np.ndarray = field(init=False)

    def __post_init__(self):
        self.m = np.zeros(self.n_params)
        self.v = np.zeros(self.n_params)

    def lr(self, step: int | None = None) -> float:
        """Exact linear interpolation between the declared endpoints."""
        k = self.t if step is None else step
        if self.anneal_steps <= 0:
            return self.lr_end
        frac = min(max(k, 0) / self.anneal_steps, 1.0)
        return self.lr_start + (self.lr_end - self.lr_start) * frac


def adam_step(params: np.ndarray, grad: np.ndarray, state: AdamState,
              proj: ProjectionSpec) -> np.ndarray:
    """One Adam update with bias correction, gradient clipping first.

    Mutates and returns `params`. Non-finite gradients are rejected.
    """
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != params.shape:
        raise ValueError(f"grad shape {grad.shape} != params {params.shape}")
    if not np.all(np.isfinite(grad)):
        raise ValueError("non-finite gradient rejected")
    g = clip_gradient(grad, proj.clip_norm)
    lr = state.lr()
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    params -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    if proj.box_low is not None or proj.box_high is not None:
        np.clip(params, proj.box_low, proj.box_high, out=params)
    return params


def polyak_update(target: np.ndarray, online: np.ndarray, tau: float) -> np.ndarray:
    """target <- (1 - tau) * target + tau * online, in place."""
    if target.shape != online.shape:
        raise ValueError("target/online shape mismatch")
    target *= 1.0 - tau
    target += tau * online
    return target


def save_checkpoint(path, nets: dict[str, tuple[MlpSpec, np.ndarray]],
                    extra: dict | None = None) -> None:
    """Versioned binary blob (magic, shape table, flat float64 params)
    plus a JSON sidecar `<path>.json` carrying hyperparameters."""
    path = Path(path)
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<II", CHECKPOINT_VERSION, len(nets)))
        for name, (spec, params) in nets.items():
            params = np.asarray(params, dtype=np.float64)
            if params.shape != (spec.n_params,):
                raise ValueError(f"net {name!r}: params do not match spec")
            nb = name.encode()
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            f.write(struct.pack("<B", len(spec.sizes)))
            f.write(struct.pack(f"<{len(spec.sizes)}I", *spec.sizes))
            f.write(struct.pack("<BB", _OUTPUT_CODES[spec.output],
                                _HIDDEN_CODES[spec.hidden]))
            if spec.output == "tanh_box":
                out_dim = spec.sizes[-1]
                f.write(struct.pack(f"<{out_dim}d", *spec.out_low))
                f.write(struct.pack(f"<{out_dim}d", *spec.out_high))
            f.write(struct.pack("<Q", params.size))
            f.write(params.astype("<f8").tobytes())
    sidecar = Path(str(path) + ".json")
    sidecar.write_text(json.dumps(extra or {}, indent=2, sort_keys=True))


def load_checkpoint(path):
    """Inverse of save_checkpoint; returns (nets, extra)."""
    path = Path(path)
    blob = path.read_bytes()
    if blob[:8] != CHECKPOINT_MAGIC:
        raise ValueError("bad checkpoint magic")
    version, n_entries = struct.unpack_from("<II", blob, 8)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    off = 16
    out_names = {v: k for k, v in _OUTPUT_CODES.items()}
    hid_names = {v: k for k, v in _HIDDEN_CODES.items()}
    nets = {}
    for _ in range(n_entries):
        (name_len,) = struct.unpack_from("<H", blob, off)
        off += 2
        name = blob[off:off + name_len].decode()
        off += name_len
        (n_sizes,) = struct.unpack_from("<B", blob, off)
        off += 1
        sizes = struct.unpack_from(f"<{n_sizes}I", blob, off)
        off += 4 * n_sizes
        out_code, hid_code = struct.unpack_from("<BB", blob, off)
        off += 2
        out_low = out_high = None
        output = out_names[out_code]
        if output == "tanh_box":
            out_dim = sizes[-1]
            out_low = struct.unpack_from(f"<{out_dim}d", blob, off)
            off += 8 * out_dim
            out_high = struct.unpack_from(f"<{out_dim}d", blob, off)
            off += 8 * out_dim
        (n_params,) = struct.unpack_from("<Q", blob, off)
        off += 8
        params = np.frombuffer(blob, dtype="<f8", count=n_params, offset=off).copy()
        off += 8 * n_params
        spec = MlpSpec(sizes=tuple(int(s) for s in sizes), output=output,
                       hidden=hid_names[hid_code], out_low=out_low,
                       out_high=out_high)
        nets[name] = (spec, params)
    sidecar = Path(str(path) + ".json")
    extra = json.loads(sidecar.read_text()) if sidecar.exists() else {}
    return nets, extra
