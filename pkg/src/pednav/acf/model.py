"""Boosted depth-2 tree ensemble over channel cells, with binary model I/O.

File format (all little-endian, fixed layout so independent implementations
can exchange models):

    offset  size  field
    0       4     magic b"PDAC"
    4       4     u32 version (currently 1)
    8       4     u32 window width, pixels
    12      4     u32 window height, pixels
    16      4     u32 shrink
    20      4     u32 channel count
    24      8     f64 cascade reject threshold
    32      8     f64 acceptance threshold
    40      4     u32 tree count T
    44      ...   T tree records, 68 bytes each:
                    3 x u32 feature index (root, left, right)
                    3 x f64 node threshold
                    4 x f64 leaf score (ll, lr, rl, rr)

Feature indices address cells of the window footprint flattened as
(channel, cell_y, cell_x), i.e. index = (channel * hc + cell_y) * wc + cell_x
with (wc, hc) = window size in cells. Node semantics: go left when
feature < threshold; leaves are reached through (root, then left or right).
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"PDAC"
VERSION = 1


@dataclass
class TreeEnsemble:
    features: np.ndarray  # (T, 3) int64
    thresholds: np.ndarray  # (T, 3) float64
    leaves: np.ndarray  # (T, 4) float64
    window: tuple  # (w, h) pixels
    shrink: int
    n_channels: int
    reject_threshold: float = float("-inf")
    accept_threshold: float = 0.0

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.int64).reshape(-1, 3)
        self.thresholds = np.asarray(self.thresholds, dtype=np.float64).reshape(-1, 3)
        self.leaves = np.asarray(self.leaves, dtype=np.float64).reshape(-1, 4)
        if not (len(self.features) == len(self.thresholds) == len(self.leaves)):
            raise ValueError("tree arrays disagree on tree count")
        wc, hc = self.window_cells
        n_feat = self.n_channels * wc * hc
        if self.n_trees and (self.features.min() < 0 or self.features.max() >= n_feat):
            raise ValueError("feature index outside the window footprint")
        if not np.all(np.isfinite(self.leaves)):
            raise ValueError("non-finite leaf score")

    @property
    def n_trees(self):
        return len(self.features)

    @property
    def window_cells(self):
        return self.window[0] // self.shrink, self.window[1] // self.shrink

    def save(self, path):
        header = struct.pack(
            "<4sIIIIIddI",
            MAGIC,
            VERSION,
            int(self.window[0]),
            int(self.window[1]),
            int(self.shrink),
            int(self.n_channels),
            float(self.reject_threshold),
            float(self.accept_threshold),
            self.n_trees,
        )
        recs = []
        for t in range(self.n_trees):
            recs.append(
                struct.pack(
                    "<3I3d4d",
                    *(int(v) for v in self.features[t]),
                    *(float(v) for v in self.thresholds[t]),
                    *(float(v) for v in self.leaves[t]),
                )
            )
        Path(path).write_bytes(header + b"".join(recs))

    @classmethod
    def load(cls, path):
        data = Path(path).read_bytes()
        magic, version, ww, wh, shrink, n_chan, reject, accept, n_trees = struct.unpack_from(
            "<4sIIIIIddI", data, 0
        )
        if magic != MAGIC:
            raise ValueError(f"{path}: not a detector model file")
        if version != VERSION:
            raise ValueError(f"{path}: unsupported model version {version}")
        rec = struct.Struct("<3I3d4d")
        off = struct.calcsize("<4sIIIIIddI")
        feats = np.empty((n_trees, 3), dtype=np.int64)
        ths = np.empty((n_trees, 3))
        lvs = np.empty((n_trees, 4))
        for t in range(n_trees):
            vals = rec.unpack_from(data, off)
            off += rec.size
            feats[t] = vals[0:3]
            ths[t] = vals[3:6]
            lvs[t] = vals[6:10]
        return cls(
            features=feats,
            thresholds=ths,
            leaves=lvs,
            window=(ww, wh),
            shrink=shrink,
            n_channels=n_chan,
            reject_threshold=reject,
            accept_threshold=accept,
        )
