"""Constant-velocity Kalman tracking with NN or NNJPDA association.

Tracking runs in world coordinates (meters on the ground plane). Each
pedestrian is a 4-state filter (px, py, vx, vy); the process noise is the
discrete white-acceleration model with configurable intensity.

Track lifecycle: an unmatched detection opens a candidate buffer; a second
consecutive gated detection promotes it to a tentative track (velocity from
the two points); the track is confirmed once it has `confirm_frames` total
consecutive hits. A tentative track dies on its first miss (the streak is
broken for good); a confirmed track survives up to `max_misses` missed
frames. Ids increase strictly and are never reused.

Track log format: one line per track per frame,
`frameId trackId px py vx vy status`.
"""

import logging
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

_F_TEMPLATE = np.eye(4)
_H = np.array([[1.0, 0, 0, 0], [0.0, 1, 0, 0]])


@dataclass
class TrackerConfig:
    process_noise: float = 0.5  # acceleration std, m/s^2
    meas_noise: float = 0.1  # isotropic measurement std, meters
    gate: float = 3.0  # Mahalanobis gate radius
    confirm_frames: int = 3
    max_misses: int = 15
    method: str = "nn"  # "nn" or "nnjpda"
    candidate_gate: float = 1.0  # meters, plain Euclidean for buffered candidates
    jpda_detect_prob: float = 0.9
    jpda_clutter: float = 0.1  # clutter density per m^2
    jpda_floor: float = 0.1  # min marginal probability to commit an assignment
    jpda_event_cap: int = 1_000_000

    def meas_cov(self):
        return np.eye(2) * self.meas_noise**2


@dataclass
class KalmanState:
    mean: np.ndarray
    cov: np.ndarray


def predict(state, dt, process_noise):
    """Constant-velocity prediction over dt seconds."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    f = _F_TEMPLATE.copy()
    f[0, 2] = dt
    f[1, 3] = dt
    q2 = process_noise**2
    qa = np.array([[dt**4 / 4, dt**3 / 2], [dt**3 / 2, dt**2]]) * q2
    q = np.zeros((4, 4))
    q[np.ix_([0, 2], [0, 2])] = qa
    q[np.ix_([1, 3], [1, 3])] = qa
    return KalmanState(f @ state.mean, f @ state.cov @ f.T + q)


def update(state, meas, meas_cov):
    """Position measurement update; covariance in Joseph form."""
    innov = np.asarray(meas, dtype=np.float64) - _H @ state.mean
    s = _H @ state.cov @ _H.T + meas_cov
    k = state.cov @ _H.T @ np.linalg.inv(s)
    mean = state.mean + k @ innov
    a = np.eye(4) - k @ _H
    cov = a @ state.cov @ a.T + k @ meas_cov @ k.T
    return KalmanState(mean, cov)


def innovation_stats(state, meas_cov):
    """Predicted measurement, innovation covariance and its inverse."""
    z_hat = _H @ state.mean
    s = _H @ state.cov @ _H.T + meas_cov
    return z_hat, s, np.linalg.inv(s)


@dataclass
class Track:
    id: int
    state: KalmanState
    frames_since_update: int = 0
    hit_count: int = 1
    status: str = "tentative"


@dataclass
class Assignment:
    pairs: dict = field(default_factory=dict)  # track index -> detection index
    unassigned_detections: list = field(default_factory=list)


def _mahalanobis_table(tracks, detections, meas_cov):
    """d2[i, j] = squared Mahalanobis distance from track i to detection j."""
    d2 = np.full((len(tracks), len(detections)), np.inf)
    for i, tr in enumerate(tracks):
        z_hat, _, s_inv = innovation_stats(tr.state, meas_cov)
        diff = detections - z_hat
        d2[i] = np.einsum("nj,jk,nk->n", diff, s_inv, diff)
    return d2


def associate_nn(tracks, detections, gate, meas_cov):
    """Greedy global nearest neighbor under the Mahalanobis gate."""
    detections = np.asarray(detections, dtype=np.float64).reshape(-1, 2)
    out = Assignment(unassigned_detections=list(range(len(detections))))
    if not tracks or len(detections) == 0:
        return out
    d2 = _mahalanobis_table(tracks, detections, meas_cov)
    d2[d2 > gate**2] = np.inf
    while np.isfinite(d2).any():
        i, j = np.unravel_index(np.argmin(d2), d2.shape)
        out.pairs[int(i)] = int(j)
        d2[i, :] = np.inf
        d2[:, j] = np.inf
    out.unassigned_detections = [j for j in range(len(detections)) if j not in out.pairs.values()]
    return out


def jpda_marginals(tracks, detections, cfg):
    """Joint-event association probabilities.

    Enumerates every feasible joint event (injective partial map of tracks
    to gated detections). An event's probability is proportional to
      prod_assigned  PD * N(z_j; z_hat_i, S_i)
      * prod_missed  (1 - PD)
      * clutter^(#detections left unassigned).
    Returns (beta (n_tracks, n_dets) assignment marginals,
    miss (n_tracks,) miss marginals). None when the event count would
    exceed the configured cap.
    """
    detections = np.asarray(detections, dtype=np.float64).reshape(-1, 2)
    n, m = len(tracks), len(detections)
    meas_cov = cfg.meas_cov()
    gates = []
    likes = np.zeros((n, m))
    for i, tr in enumerate(tracks):
        z_hat, s, s_inv = innovation_stats(tr.state, meas_cov)
        diff = detections - z_hat
        d2 = np.einsum("nj,jk,nk->n", diff, s_inv, diff)
        gated = np.flatnonzero(d2 <= cfg.gate**2)
        gates.append(gated)
        norm = 1.0 / (2 * np.pi * np.sqrt(np.linalg.det(s)))
        likes[i, gated] = norm * np.exp(-0.5 * d2[gated])

    bound = 1
    for g in gates:
        bound *= len(g) + 1
        if bound > cfg.jpda_event_cap:
            return None
    pd, lam = cfg.jpda_detect_prob, cfg.jpda_clutter

    beta = np.zeros((n, m))
    miss = np.zeros(n)
    total = 0.0
    for event in product(*[np.append(g, -1) for g in gates]):
        used = [j for j in event if j >= 0]
        if len(set(used)) != len(used):
            continue
        p = lam ** (m - len(used))
        for i, j in enumerate(event):
            p *= (1.0 - pd) if j < 0 else pd * likes[i, j]
        total += p
        for i, j in enumerate(event):
            if j < 0:
                miss[i] += p
            else:
                beta[i, j] += p
    if total <= 0:
        return np.zeros((n, m)), np.ones(n)
    return beta / total, miss / total


def associate_nnjpda(tracks, detections, gate, cfg):
    """Most-probable-detection selection from JPDA marginals.

    Pairs are committed greedily by descending marginal probability, which
    enforces mutual exclusivity; marginals below `jpda_floor` stay
    unassigned. Falls back to plain NN when the feasible joint events
    exceed the configured cap.
    """
    detections = np.asarray(detections, dtype=np.float64).reshape(-1, 2)
    out = Assignment(unassigned_detections=list(range(len(detections))))
    if not tracks or len(detections) == 0:
        return out
    res = jpda_marginals(tracks, detections, cfg)
    if res is None:
        log.warning(
            "JPDA joint events exceed cap %d; falling back to NN", cfg.jpda_event_cap
        )
        return associate_nn(tracks, detections, gate, cfg.meas_cov())
    beta, _ = res
    flat = [
        (float(beta[i, j]), i, j)
        for i in range(beta.shape[0])
        for j in range(beta.shape[1])
        if beta[i, j] > cfg.jpda_floor
    ]
    flat.sort(key=lambda t: (-t[0], t[1], t[2]))
    used_tracks, used_dets = set(), set()
    for p, i, j in flat:
        if i in used_tracks or j in used_dets:
            continue
        out.pairs[i] = j
        used_tracks.add(i)
        used_dets.add(j)
    out.unassigned_detections = [j for j in range(len(detections)) if j not in used_dets]
    return out


@dataclass
class _Candidate:
    position: np.ndarray
    first_seen: int


class TrackerWorld:
    """Sequential multi-object tracker state."""

    def __init__(self, config=None):
        self.config = config or TrackerConfig()
        self.tracks = []
        self._candidates = []
        self._next_id = 1
        self._frame = 0

    def _new_track(self, prev_pos, pos, dt):
        r = self.config.meas_noise**2
        vel = (pos - prev_pos) / dt
        mean = np.array([pos[0], pos[1], vel[0], vel[1]])
        cov = np.zeros((4, 4))
        # exact two-point initialization covariance per axis
        for axis in (0, 1):
            cov[axis, axis] = r
            cov[axis + 2, axis + 2] = 2 * r / dt**2
            cov[axis, axis + 2] = cov[axis + 2, axis] = r / dt
        track = Track(self._next_id, KalmanState(mean, cov), hit_count=2)
        self._next_id += 1
        if track.hit_count >= self.config.confirm_frames:
            track.status = "confirmed"
        return track

    def step(self, detections, dt):
        """Advance one frame; returns the confirmed tracks."""
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        cfg = self.config
        detections = np.asarray(detections, dtype=np.float64).reshape(-1, 2)
        self._frame += 1

        live = [t for t in self.tracks if t.status != "deleted"]
        for tr in live:
            tr.state = predict(tr.state, dt, cfg.process_noise)

        if cfg.method == "nnjpda":
            assign = associate_nnjpda(live, detections, cfg.gate, cfg)
        elif cfg.method == "nn":
            assign = associate_nn(live, detections, cfg.gate, cfg.meas_cov())
        else:
            raise ValueError(f"unknown association method {cfg.method!r}")

        for i, tr in enumerate(live):
            j = assign.pairs.get(i)
            if j is not None:
                tr.state = update(tr.state, detections[j], cfg.meas_cov())
                tr.frames_since_update = 0
                tr.hit_count += 1
                if tr.status == "tentative" and tr.hit_count >= cfg.confirm_frames:
                    tr.status = "confirmed"
            else:
                tr.frames_since_update += 1
                if tr.status == "tentative":
                    tr.status = "deleted"
                elif tr.frames_since_update > cfg.max_misses:
                    tr.status = "deleted"

        # candidate buffer: unmatched detections must reappear within the
        # candidate gate on the very next frame to become a track
        free = [detections[j] for j in assign.unassigned_detections]
        new_candidates = []
        for cand in self._candidates:
            if not free:
                continue
            dists = [float(np.linalg.norm(p - cand.position)) for p in free]
            best = int(np.argmin(dists))
            if dists[best] <= cfg.candidate_gate:
                pos = free.pop(best)
                self.tracks.append(self._new_track(cand.position, pos, dt))
        for pos in free:
            new_candidates.append(_Candidate(pos.copy(), self._frame))
        self._candidates = new_candidates

        self.tracks = [t for t in self.tracks if t.status != "deleted"]
        return [t for t in self.tracks if t.status == "confirmed"]


def write_track_log(path, rows):
    """rows: iterable of (frame_id, track) or (frame_id, id, px, py, vx, vy, status)."""
    lines = ["# frameId trackId px py vx vy status"]
    for row in rows:
        if len(row) == 2:
            frame, tr = row
            m = tr.state.mean
            lines.append(
                f"{frame} {tr.id} {m[0]:.6f} {m[1]:.6f} {m[2]:.6f} {m[3]:.6f} {tr.status}"
            )
        else:
            frame, tid, px, py, vx, vy, status = row
            lines.append(f"{frame} {tid} {px:.6f} {py:.6f} {vx:.6f} {vy:.6f} {status}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_track_log(path):
    """Returns list of (frame_id, track_id, px, py, vx, vy, status)."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if len(parts) != 7:
            raise ValueError(f"{path}:{lineno}: expected 7 fields, got {len(parts)}")
        rows.append(
            (
                int(parts[0]),
                int(parts[1]),
                float(parts[2]),
                float(parts[3]),
                float(parts[4]),
                float(parts[5]),
                parts[6],
            )
        )
    return rows
