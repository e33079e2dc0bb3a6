"""Network layers with explicit forward/backward passes in float64.

Convolutions run as im2col plus one BLAS matmul; the input gradient is
computed as another convolution with the spatially flipped kernel, so the
backward pass is matmul-only (no scatter-adds). Activations use NCHW.
"""

import numpy as np


def _im2col(x, k, pad):
    """(N, C, H, W) -> patch matrix (N*Ho*Wo, C*k*k), stride 1."""
    n, c, h, w = x.shape
    ho, wo = h + 2 * pad - k + 1, w + 2 * pad - k + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    s = xp.strides
    patches = np.lib.stride_tricks.as_strided(
        xp, (n, c, k, k, ho, wo), (s[0], s[1], s[2], s[3], s[2], s[3])
    )
    return patches.transpose(0, 4, 5, 1, 2, 3).reshape(n * ho * wo, c * k * k), ho, wo


class Conv2d:
    """3x3 convolution, stride 1, same padding."""

    def __init__(self, in_ch, out_ch, k=3, rng=None, std=0.1):
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.k = k
        self.pad = (k - 1) // 2
        rng = rng or np.random.default_rng(0)
        self.w = rng.normal(0.0, std, size=(out_ch, in_ch, k, k))
        self.b = np.zeros(out_ch)
        self.vw = np.zeros_like(self.w)
        self.vb = np.zeros_like(self.b)
        self._cols = None
        self._shape = None

    def forward(self, x, train=True):
        if x.shape[1] != self.in_ch:
            raise ValueError(
                f"conv layer expects {self.in_ch} input channels, got {x.shape[1]}"
            )
        cols, ho, wo = _im2col(x, self.k, self.pad)
        out = cols @ self.w.reshape(self.out_ch, -1).T + self.b
        if train:
            self._cols = cols
            self._shape = x.shape
        return out.reshape(x.shape[0], ho, wo, self.out_ch).transpose(0, 3, 1, 2)

    def backward(self, grad, need_input_grad=True):
        n, f, ho, wo = grad.shape
        g = grad.transpose(0, 2, 3, 1).reshape(n * ho * wo, f)
        self.gw = (g.T @ self._cols).reshape(self.w.shape)
        self.gb = g.sum(axis=0)
        if not need_input_grad:
            return None
        # input gradient is a convolution with the flipped kernel
        wflip = self.w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
        cols, gh, gw_ = _im2col(grad, self.k, self.k - 1 - self.pad)
        dx = cols @ wflip.reshape(self.in_ch, -1).T
        return dx.reshape(n, gh, gw_, self.in_ch).transpose(0, 3, 1, 2)

    def params(self):
        return [(self.w, self.vw, "gw"), (self.b, self.vb, "gb")]


class ReLU:
    def forward(self, x, train=True):
        if train:
            self._mask = x > 0
        return np.maximum(x, 0.0)

    def backward(self, grad):
        return grad * self._mask

    def params(self):
        return []


class MaxPool2:
    """2x2 max pooling, stride 2; gradient routes to the first max per block."""

    def forward(self, x, train=True):
        n, c, h, w = x.shape
        if h % 2 or w % 2:
            raise ValueError(f"pool layer needs even spatial dims, got {h}x{w}")
        blocks = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
        flat = blocks.reshape(n, c, h // 2, w // 2, 4)
        if train:
            self._idx = flat.argmax(axis=-1)
            self._shape = x.shape
        return flat.max(axis=-1)

    def backward(self, grad):
        n, c, h, w = self._shape
        onehot = self._idx[..., None] == np.arange(4)
        flat = onehot * grad[..., None]
        blocks = flat.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        return blocks.reshape(n, c, h, w)

    def params(self):
        return []


class Flatten:
    def forward(self, x, train=True):
        if train:
            self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)

    def params(self):
        return []


class Linear:
    def __init__(self, in_features, out_features, rng=None, std=0.1, name="linear"):
        self.in_features = in_features
        self.out_features = out_features
        self.name = name
        rng = rng or np.random.default_rng(0)
        self.w = rng.normal(0.0, std, size=(out_features, in_features))
        self.b = np.zeros(out_features)
        self.vw = np.zeros_like(self.w)
        self.vb = np.zeros_like(self.b)

    def forward(self, x, train=True):
        if x.shape[1] != self.in_features:
            raise ValueError(
                f"{self.name} expects {self.in_features} inputs, got {x.shape[1]}"
            )
        if train:
            self._x = x
        return x @ self.w.T + self.b

    def backward(self, grad):
        self.gw = grad.T @ self._x
        self.gb = grad.sum(axis=0)
        return grad @ self.w

    def params(self):
        return [(self.w, self.vw, "gw"), (self.b, self.vb, "gb")]


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(probs, labels):
    """Mean negative log likelihood; for two classes this equals the
    binary cross-entropy on the positive-class probability."""
    p = np.clip(probs[np.arange(len(labels)), labels], 1e-12, None)
    return float(-np.log(p).mean())


def softmax_backward(probs, labels):
    """Gradient of mean cross-entropy w.r.t. the logits: (p - onehot) / N."""
    g = probs.copy()
    g[np.arange(len(labels)), labels] -= 1.0
    return g / len(labels)
