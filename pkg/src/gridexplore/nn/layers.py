# Dense / conv / GRU / normalization layers on top of the Tensor engine.
from __future__ import annotations

import numpy as np

from .tensor import GraphError, Tensor, concat

EPS_NORM = 1e-8  # sigma floor shared by both normalization modes


def orthogonal(rng: np.random.Generator, shape, gain=1.0, dtype=np.float32):
    a = rng.standard_normal(shape)
    if a.ndim < 2:
        return (gain * a).astype(dtype)
    q, r = np.linalg.qr(a if shape[0] >= shape[1] else a.T)
    q = q * np.sign(np.diag(r))
    if shape[0] < shape[1]:
        q = q.T
    return np.ascontiguousarray(gain * q[: shape[0], : shape[1]], dtype=dtype)


class Module:
    """Minimal parameter container with torch-like attribute registration."""

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_modules", {})
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, Tensor):
            self._params[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix=""):
        for name, p in self._params.items():
            yield prefix + name, p
        for name, m in self._modules.items():
            yield from m.named_parameters(prefix + name + ".")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def train(self):
        object.__setattr__(self, "training", True)
        for m in self._modules.values():
            m.train()

    def eval(self):
        object.__setattr__(self, "training", False)
        for m in self._modules.values():
            m.eval()

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def named_buffers(self, prefix=""):
        for k, v in self._buffers().items():
            yield prefix + k, v
        for name, m in self._modules.items():
            yield from m.named_buffers(prefix + name + ".")

    def state_arrays(self):
        """Name -> array map of everything a checkpoint must capture."""
        out = {name: p.data for name, p in self.named_parameters()}
        out.update(dict(self.named_buffers()))
        return out

    def load_state(self, arrays: dict):
        for name, p in self.named_parameters():
            p.data = arrays[name].astype(p.data.dtype).reshape(p.data.shape)
        self._load_buffers(arrays, "")

    def _load_buffers(self, arrays, prefix):
        for k, v in self._buffers().items():
            loaded = arrays[prefix + k].astype(v.dtype).reshape(v.shape)
            object.__setattr__(self, k, loaded)
        for name, m in self._modules.items():
            m._load_buffers(arrays, prefix + name + ".")

    def _buffers(self):
        return {}


class Dense(Module):
    def __init__(self, in_features, out_features, rng, gain=np.sqrt(2)):
        super().__init__()
        self.w = Tensor(orthogonal(rng, (in_features, out_features), gain))
        self.b = Tensor(np.zeros(out_features, dtype=np.float32))

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.w + self.b


class Conv2d(Module):
    """NHWC convolution via explicit window slices and one matmul."""

    def __init__(self, in_ch, out_ch, kernel, rng, stride=1, pad=0, gain=np.sqrt(2)):
        super().__init__()
        self.kernel = kernel
        self.stride = stride
        self.pad = pad
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.w = Tensor(orthogonal(rng, (kernel * kernel * in_ch, out_ch), gain))
        self.b = Tensor(np.zeros(out_ch, dtype=np.float32))

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_ch:
            raise GraphError(f"conv expects {self.in_ch} channels, got {x.shape}")
        if self.pad:
            x = x.pad2d(self.pad)
        n, h, w, _ = x.shape
        k, s = self.kernel, self.stride
        oh = (h - k) // s + 1
        ow = (w - k) // s + 1
        cols = concat(
            [
                x[:, i : i + (oh - 1) * s + 1 : s, j : j + (ow - 1) * s + 1 : s, :]
                for i in range(k)
                for j in range(k)
            ],
            axis=-1,
        )
        out = cols.reshape(n * oh * ow, k * k * self.in_ch) @ self.w + self.b
        return out.reshape(n, oh, ow, self.out_ch)


class BatchNorm(Module):
    """Per-feature standardization over all leading axes, with running stats."""

    def __init__(self, num_features, momentum=0.9, eps=EPS_NORM):
        super().__init__()
        self.gamma = Tensor(np.ones(num_features, dtype=np.float32))
        self.beta = Tensor(np.zeros(num_features, dtype=np.float32))
        self.momentum = momentum
        self.eps = eps
        self.running_mean = np.zeros(num_features, dtype=np.float64)
        self.running_var = np.ones(num_features, dtype=np.float64)

    def _buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def __call__(self, x: Tensor) -> Tensor:
        axes = tuple(range(x.data.ndim - 1))
        if self.training:
            count = int(np.prod([x.shape[a] for a in axes]))
            if count < 2:
                raise GraphError("batch norm needs at least 2 samples in training")
            mu = x.mean(axis=axes, keepdims=True)
            centered = x - mu
            var = (centered * centered).mean(axis=axes, keepdims=True)
            m = self.momentum
            self.running_mean = m * self.running_mean + (1 - m) * mu.data.reshape(-1)
            self.running_var = m * self.running_var + (1 - m) * var.data.reshape(-1)
            y = centered / (var + self.eps).sqrt()
        else:
            y = (x - self.running_mean.astype(x.dtype)) / np.sqrt(
                self.running_var + self.eps
            ).astype(x.dtype)
        return y * self.gamma + self.beta


class LayerNorm(Module):
    def __init__(self, num_features, eps=EPS_NORM):
        super().__init__()
        self.gamma = Tensor(np.ones(num_features, dtype=np.float32))
        self.beta = Tensor(np.zeros(num_features, dtype=np.float32))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=-1, keepdims=True)
        return (centered / (var + self.eps).sqrt()) * self.gamma + self.beta


def make_norm(mode: str, num_features):
    if mode == "batch":
        return BatchNorm(num_features)
    if mode == "layer":
        return LayerNorm(num_features)
    if mode == "none":
        return None
    raise ValueError(f"unknown normalization mode {mode!r}")


class GruCell(Module):
    """Gated recurrent unit.

    z = sigmoid(Wz x + Uz h + bz)
    r = sigmoid(Wr x + Ur h + br)
    n = tanh(Wn x + Un (r*h) + bn)
    h' = (1 - z) * n + z * h
    """

    def __init__(self, input_size, hidden_size, rng):
        super().__init__()
        self.hidden_size = hidden_size
        bound = 1.0 / np.sqrt(hidden_size)

        def u(shape):
            return Tensor(rng.uniform(-bound, bound, shape).astype(np.float32))

        self.wz, self.uz, self.bz = u((input_size, hidden_size)), u((hidden_size, hidden_size)), u(hidden_size)
        self.wr, self.ur, self.br = u((input_size, hidden_size)), u((hidden_size, hidden_size)), u(hidden_size)
        self.wn, self.un, self.bn = u((input_size, hidden_size)), u((hidden_size, hidden_size)), u(hidden_size)

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        if x.shape[-1] != self.wz.shape[0] or h.shape[-1] != self.hidden_size:
            raise GraphError(
                f"gru shape mismatch: x {x.shape}, h {h.shape}, "
                f"expected in={self.wz.shape[0]} hidden={self.hidden_size}"
            )
        z = (x @ self.wz + h @ self.uz + self.bz).sigmoid()
        r = (x @ self.wr + h @ self.ur + self.br).sigmoid()
        n = (x @ self.wn + (r * h) @ self.un + self.bn).tanh()
        return (1.0 - z) * n + z * h


class Mlp(Module):
    """Stack of dense layers; norm + relu after each hidden layer."""

    def __init__(self, sizes, rng, norm="none", out_gain=1.0):
        super().__init__()
        self.n_layers = len(sizes) - 1
        for i in range(self.n_layers):
            last = i == self.n_layers - 1
            setattr(self, f"fc{i}", Dense(sizes[i], sizes[i + 1], rng,
                                          gain=out_gain if last else np.sqrt(2)))
            if not last:
                layer_norm = make_norm(norm, sizes[i + 1])
                if layer_norm is not None:
                    setattr(self, f"norm{i}", layer_norm)

    def __call__(self, x: Tensor) -> Tensor:
        for i in range(self.n_layers):
            x = getattr(self, f"fc{i}")(x)
            if i < self.n_layers - 1:
                norm = getattr(self, f"norm{i}", None)
                if norm is not None:
                    x = norm(x)
                x = x.relu()
        return x


class CnnEncoder(Module):
    """Three 2x2 stride-1 convs plus a dense projection to the embedding.

    View-3 inputs get 1 cell of zero padding on the first conv so the
    spatial extent survives three kernel shrinks.
    """

    def __init__(self, view_size, embed_dim, rng, norm="batch",
                 channels=(32, 64, 64), in_ch=3, normalize_input=True):
        super().__init__()
        pad = 1 if view_size == 3 else 0
        self.view_size = view_size
        if normalize_input:
            in_norm = make_norm(norm, in_ch)
            if in_norm is not None:
                self.in_norm = in_norm
        c1, c2, c3 = channels
        self.conv0 = Conv2d(in_ch, c1, 2, rng, pad=pad)
        self.conv1 = Conv2d(c1, c2, 2, rng)
        self.conv2 = Conv2d(c2, c3, 2, rng)
        side = (view_size + 2 * pad) - 3
        self.flat_dim = side * side * c3
        self.fc = Dense(self.flat_dim, embed_dim, rng)
        for i, ch in enumerate((c1, c2, c3)):
            conv_norm = make_norm(norm, ch)
            if conv_norm is not None:
                setattr(self, f"norm{i}", conv_norm)
        fc_norm = make_norm(norm, embed_dim)
        if fc_norm is not None:
            self.fc_norm = fc_norm

    def __call__(self, x: Tensor) -> Tensor:
        norm = getattr(self, "in_norm", None)
        if norm is not None:
            x = norm(x)
        for i in range(3):
            x = getattr(self, f"conv{i}")(x)
            layer_norm = getattr(self, f"norm{i}", None)
            if layer_norm is not None:
                x = layer_norm(x)
            x = x.relu()
        x = x.reshape(x.shape[0], self.flat_dim)
        x = self.fc(x)
        fc_norm = getattr(self, "fc_norm", None)
        if fc_norm is not None:
            x = fc_norm(x)
        return x.relu()
