"""Refinement network: three conv/pool stages feeding a small classifier head.

Architecture (fixed): 64x64x3 input ->
  conv3x3x16 + relu + pool2 -> conv3x3x32 + relu + pool2 ->
  conv3x3x64 + relu + pool2 -> fc 4096->256 + relu -> fc 256->64 + relu ->
  fc 64->C -> softmax.

Parameters fall in three groups: the convolutional stage, the two hidden
fully-connected layers, and the final class layer. Transfer from a
pretrained net copies the convolutional stage verbatim and redraws the
rest, so the head can change class count.

Binary model format (little endian):
  magic     4s     b"PDCN"
  version   u32    1
  n_classes u32
  then 12 arrays in fixed order (conv1 w/b, conv2 w/b, conv3 w/b,
  fc1 w/b, fc2 w/b, head w/b), each as:
  ndim u32, dims u32 * ndim, data f64 (C order).
"""

import struct
from pathlib import Path

import numpy as np

from .layers import Conv2d, Flatten, Linear, MaxPool2, ReLU, softmax

MAGIC = b"PDCN"
VERSION = 1
INPUT_SIDE = 64
FC_INPUT = 4096
INIT_STD = 0.1  # variance 0.01


class CnnModel:
    def __init__(self, n_classes=2, seed=0):
        if n_classes < 2:
            raise ValueError("need at least two classes")
        self.n_classes = n_classes
        rng = np.random.default_rng(seed)
        self.conv1 = Conv2d(3, 16, rng=rng, std=INIT_STD)
        self.conv2 = Conv2d(16, 32, rng=rng, std=INIT_STD)
        self.conv3 = Conv2d(32, 64, rng=rng, std=INIT_STD)
        self.fc1 = Linear(FC_INPUT, 256, rng=rng, std=INIT_STD, name="fc layer 1")
        self.fc2 = Linear(256, 64, rng=rng, std=INIT_STD, name="fc layer 2")
        self.head = Linear(64, n_classes, rng=rng, std=INIT_STD, name="class layer")
        self.layers = [
            self.conv1,
            ReLU(),
            MaxPool2(),
            self.conv2,
            ReLU(),
            MaxPool2(),
            self.conv3,
            ReLU(),
            MaxPool2(),
            Flatten(),
            self.fc1,
            ReLU(),
            self.fc2,
            ReLU(),
            self.head,
        ]

    # parameter groups
    @property
    def conv_stage(self):
        return [self.conv1, self.conv2, self.conv3]

    @property
    def fc_stage(self):
        return [self.fc1, self.fc2]

    def param_layers(self):
        return self.conv_stage + self.fc_stage + [self.head]

    def forward(self, images, train=False):
        """Class probabilities for (N, 64, 64, 3) images in [0, 1]."""
        x = np.asarray(images, dtype=np.float64)
        if x.ndim != 4 or x.shape[1:] != (INPUT_SIDE, INPUT_SIDE, 3):
            raise ValueError(
                f"input must be (N, {INPUT_SIDE}, {INPUT_SIDE}, 3), got {x.shape}"
            )
        x = x.transpose(0, 3, 1, 2)
        for layer in self.layers:
            x = layer.forward(x, train=train)
        return softmax(x)

    def backward(self, grad_logits):
        g = grad_logits
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            if isinstance(layer, Conv2d):
                g = layer.backward(g, need_input_grad=i > 0)
            else:
                g = layer.backward(g)

    def sgd_step(self, lr, momentum):
        for layer in self.param_layers():
            for param, vel, gname in layer.params():
                g = getattr(layer, gname)
                vel *= momentum
                vel -= lr * g
                param += vel

    def _arrays(self):
        out = []
        for layer in self.param_layers():
            out.extend([layer.w, layer.b])
        return out

    def save(self, path):
        path = Path(path)
        with path.open("wb") as fh:
            fh.write(struct.pack("<4sII", MAGIC, VERSION, self.n_classes))
            for arr in self._arrays():
                fh.write(struct.pack("<I", arr.ndim))
                fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
                fh.write(arr.astype("<f8").tobytes(order="C"))

    @classmethod
    def load(cls, path):
        path = Path(path)
        raw = path.read_bytes()
        if len(raw) < 12 or raw[:4] != MAGIC:
            raise ValueError(f"{path} is not a network model file")
        _, version, n_classes = struct.unpack_from("<4sII", raw, 0)
        if version != VERSION:
            raise ValueError(f"unsupported model version {version}")
        model = cls(n_classes=n_classes, seed=0)
        off = 12
        for arr in model._arrays():
            (ndim,) = struct.unpack_from("<I", raw, off)
            off += 4
            dims = struct.unpack_from(f"<{ndim}I", raw, off)
            off += 4 * ndim
            if dims != arr.shape:
                raise ValueError(f"model file array shape {dims} does not match {arr.shape}")
            n = int(np.prod(dims))
            arr[...] = np.frombuffer(raw, dtype="<f8", count=n, offset=off).reshape(dims)
            off += 8 * n
        if off != len(raw):
            raise ValueError(f"{path} has {len(raw) - off} trailing bytes")
        return model


def transfer_init(pretrained, n_classes, seed=0):
    """New model whose conv stage is copied from a pretrained net.

    The fully-connected and class layers are drawn fresh (the head size
    may differ from the source net), everything else is byte-identical.
    """
    model = CnnModel(n_classes=n_classes, seed=seed)
    for dst, src in zip(model.conv_stage, pretrained.conv_stage):
        dst.w = src.w.copy()
        dst.b = src.b.copy()
        dst.vw = np.zeros_like(dst.w)
        dst.vb = np.zeros_like(dst.b)
    return model
