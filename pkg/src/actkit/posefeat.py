"""Pose trajectory features, codebooks, and bag-of-words encoding.

Tracks of ten upper-body joints are summarized over fixed-length
windows by two feature families:

- body-model statistics ("bm"): direction histograms of joint velocity
  and acceleration, statistics and signed rate-of-change histograms of
  inter-joint distance trajectories, and statistics of inner-joint angle
  and angle-speed trajectories;
- spectral descriptors ("fft"): per coordinate trajectory of the eight
  arm joints, four exponential frequency-band energies, ten cepstral
  coefficients, the spectral entropy and the spectral energy.

Each sub-feature gets its own k-means codebook with k = 2 x dimension;
windows of several lengths are quantized separately and the
per-(length, sub-feature) histograms are concatenated, L1-normalized
per block.

Dimension accounting, frozen here and bound by the tests:

    bm:  velocity-hist 80 + acceleration-hist 80 + distance-stats 80
         + distance-rate-hist 128 + angle-stats 30 + angle-speed-stats 30
         = 428
    fft: 16 trajectories x (4 bands + 10 cepstra + entropy + energy)
         = 256

With codebooks of size 2 x dim and three window lengths the encoded
histograms have 2 x 428 x 3 = 2568 (bm) and 2 x 256 x 3 = 1536 (fft)
dimensions.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

PARTS = ("head", "torso", "r_shoulder", "l_shoulder", "r_elbow", "l_elbow",
         "r_wrist", "l_wrist", "r_hand", "l_hand")

ARM_JOINTS = ("r_shoulder", "l_shoulder", "r_elbow", "l_elbow",
              "r_wrist", "l_wrist", "r_hand", "l_hand")

WINDOW_LENGTHS = (20, 50, 100)

_SIDE_JOINTS = ("shoulder", "elbow", "wrist", "hand")

# left-right pairs first, then all pairs within each body side
DISTANCE_PAIRS = tuple(
    (f"r_{j}", f"l_{j}") for j in _SIDE_JOINTS
) + tuple(
    (f"{side}_{a}", f"{side}_{b}")
    for side in ("r", "l")
    for ai, a in enumerate(_SIDE_JOINTS)
    for b in _SIDE_JOINTS[ai + 1:]
)

# inner joint -> the two incident segments' far ends
ANGLE_TRIPLES = (
    ("r_shoulder", "torso", "r_elbow"),
    ("l_shoulder", "torso", "l_elbow"),
    ("r_elbow", "r_shoulder", "r_wrist"),
    ("l_elbow", "l_shoulder", "l_wrist"),
    ("r_wrist", "r_elbow", "r_hand"),
    ("l_wrist", "l_elbow", "l_hand"),
)

BM_SUBFEATURES = (
    ("velocity-hist", 8 * len(PARTS)),
    ("acceleration-hist", 8 * len(PARTS)),
    ("distance-stats", 5 * len(DISTANCE_PAIRS)),
    ("distance-rate-hist", 8 * len(DISTANCE_PAIRS)),
    ("angle-stats", 5 * len(ANGLE_TRIPLES)),
    ("angle-speed-stats", 5 * len(ANGLE_TRIPLES)),
)

FFT_SUBFEATURES = (
    ("fft-bands", 4 * 2 * len(ARM_JOINTS)),
    ("fft-cepstrum", 10 * 2 * len(ARM_JOINTS)),
    ("fft-entropy", 2 * len(ARM_JOINTS)),
    ("fft-energy", 2 * len(ARM_JOINTS)),
)

BM_DIM = sum(d for _, d in BM_SUBFEATURES)
FFT_DIM = sum(d for _, d in FFT_SUBFEATURES)

FFT_BANDS = ((1, 2), (2, 4), (4, 8), (8, 16))
FFT_NUM_CEPSTRA = 10
FFT_LOG_EPS = 1e-8

# signed px/frame rate-of-change bin edges for distance trajectories
RATE_EDGES = (-np.inf, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, np.inf)


def bow_dim(feature_dim: int, num_lengths: int = len(WINDOW_LENGTHS)) -> int:
    """Encoded histogram size: one 2x-sized codebook per dimension group,
    stacked over window lengths."""
    return 2 * feature_dim * num_lengths


@dataclass
class JointTrackSet:
    """Joint positions over a contiguous frame range.

    positions has shape (len(PARTS), num_frames, 2) in PARTS order;
    first_frame is the frame index of positions[:, 0].
    """

    positions: np.ndarray
    first_frame: int = 0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim != 3 or self.positions.shape[0] != len(PARTS) \
                or self.positions.shape[2] != 2:
            raise ValueError("positions must have shape (10, frames, 2)")
        if self.positions.shape[1] < 1:
            raise ValueError("track needs at least one frame")
        if not np.isfinite(self.positions).all():
            raise ValueError("positions contain non-finite values")

    @property
    def num_frames(self) -> int:
        return self.positions.shape[1]

    @property
    def frame_range(self) -> tuple:
        return (self.first_frame, self.first_frame + self.num_frames - 1)

    def part(self, name: str) -> np.ndarray:
        return self.positions[PARTS.index(name)]


def _window(tracks: JointTrackSet, center_frame: int, length: int) -> np.ndarray:
    start = center_frame - length // 2
    stop = start + length
    first, last = tracks.frame_range
    if start < first or stop - 1 > last:
        raise ValueError(
            f"window [{start}, {stop}) exceeds frame range [{first}, {last}]")
    off = start - first
    return tracks.positions[:, off:off + length]


def _direction_hist(vectors: np.ndarray) -> np.ndarray:
    """8-bin direction histogram weighted by vector magnitude.

    Bin 0 is centered on the +x axis, bins advance counter-clockwise in
    45 degree sectors.  Zero vectors carry zero weight.
    """
    mags = np.linalg.norm(vectors, axis=-1)
    hist = np.zeros(8)
    nz = mags > 0
    if nz.any():
        theta = np.arctan2(vectors[nz, 1], vectors[nz, 0])
        bins = np.floor((theta + np.pi / 8) / (np.pi / 4)).astype(int) % 8
        np.add.at(hist, bins, mags[nz])
    return hist


def _stats(x: np.ndarray) -> np.ndarray:
    return np.array([x.mean(), np.median(x), x.std(), x.min(), x.max()])


def _angle(inner, end_a, end_b) -> np.ndarray:
    """Angle at the inner joint between its two segments, in [0, pi].
    Frames where a segment degenerates to zero length get angle 0."""
    va = end_a - inner
    vb = end_b - inner
    na = np.linalg.norm(va, axis=-1)
    nb = np.linalg.norm(vb, axis=-1)
    ok = (na > 0) & (nb > 0)
    ang = np.zeros(inner.shape[0])
    if ok.any():
        cosv = (va[ok] * vb[ok]).sum(axis=-1) / (na[ok] * nb[ok])
        ang[ok] = np.arccos(np.clip(cosv, -1.0, 1.0))
    return ang


@dataclass
class SubFeature:
    """A named, fixed-dimension slice of a window descriptor."""

    name: str
    values: np.ndarray


def bm_feature(tracks: JointTrackSet, center_frame: int,
               length: int) -> list:
    """Body-model statistics of the window [center - L/2, center + L/2).

    Returns the sub-features listed in BM_SUBFEATURES, in that order.
    Raises when the window leaves the track's frame range or has fewer
    than three frames (second differences need them).
    """
    if length < 3:
        raise ValueError("bm windows need at least three frames")
    pos = _window(tracks, center_frame, length)  # (10, L, 2)

    vel = np.diff(pos, axis=1)                    # (10, L-1, 2)
    acc = np.diff(vel, axis=1)                    # (10, L-2, 2)
    vel_hist = np.concatenate([_direction_hist(vel[j]) for j in range(len(PARTS))])
    acc_hist = np.concatenate([_direction_hist(acc[j]) for j in range(len(PARTS))])

    dist_stats, dist_rate = [], []
    for a, b in DISTANCE_PAIRS:
        d = np.linalg.norm(tracks_part(pos, a) - tracks_part(pos, b), axis=-1)
        dist_stats.append(_stats(d))
        deltas = np.diff(d)
        hist = np.zeros(8)
        if deltas.size:
            bins = np.searchsorted(RATE_EDGES[1:-1], deltas, side="right")
            np.add.at(hist, bins, np.abs(deltas))
        dist_rate.append(hist)

    ang_stats, ang_speed_stats = [], []
    for inner, ea, eb in ANGLE_TRIPLES:
        ang = _angle(tracks_part(pos, inner), tracks_part(pos, ea),
                     tracks_part(pos, eb))
        ang_stats.append(_stats(ang))
        ang_speed_stats.append(_stats(np.abs(np.diff(ang))))

    return [
        SubFeature("velocity-hist", vel_hist),
        SubFeature("acceleration-hist", acc_hist),
        SubFeature("distance-stats", np.concatenate(dist_stats)),
        SubFeature("distance-rate-hist", np.concatenate(dist_rate)),
        SubFeature("angle-stats", np.concatenate(ang_stats)),
        SubFeature("angle-speed-stats", np.concatenate(ang_speed_stats)),
    ]


def tracks_part(pos: np.ndarray, name: str) -> np.ndarray:
    """Rows of a (10, L, 2) window for one named part."""
    return pos[PARTS.index(name)]


def fft_feature(tracks: JointTrackSet, center_frame: int,
                length: int) -> list:
    """Spectral descriptors of the window [center - L/2, center + L/2).

    Every x and y trajectory of the eight arm joints is mean-removed and
    described by four exponential band energies ([1,2), [2,4), [4,8),
    [8,16) in DFT bins), ten cepstral coefficients (inverse transform of
    the log magnitude spectrum), the spectral entropy of the
    L1-normalized power spectrum, and the spectral energy.  Constant
    trajectories yield zero bands, zero energy and zero entropy.
    """
    if length < 2:
        raise ValueError("fft windows need at least two frames")
    pos = _window(tracks, center_frame, length)
    bands, cepstra, entropies, energies = [], [], [], []
    for joint in ARM_JOINTS:
        traj2 = tracks_part(pos, joint)
        for axis in (0, 1):
            x = traj2[:, axis]
            x = x - x.mean()
            mag = np.abs(np.fft.rfft(x))
            power = mag ** 2
            for lo, hi in FFT_BANDS:
                bands.append(power[lo:hi].sum())
            cep = np.fft.irfft(np.log(mag + FFT_LOG_EPS), n=length)
            cepstra.extend(cep[:FFT_NUM_CEPSTRA])
            total = power.sum()
            if total > 0:
                p = power / total
                nz = p > 0
                entropies.append(float(-(p[nz] * np.log(p[nz])).sum()))
            else:
                entropies.append(0.0)
            energies.append(power[1:].sum())
    return [
        SubFeature("fft-bands", np.array(bands)),
        SubFeature("fft-cepstrum", np.array(cepstra)),
        SubFeature("fft-entropy", np.array(entropies)),
        SubFeature("fft-energy", np.array(energies)),
    ]


_FEATURE_FNS = {"bm": bm_feature, "fft": fft_feature}


def pose_frame_features(tracks: JointTrackSet, center_frame: int,
                        lengths=WINDOW_LENGTHS, kind="bm") -> dict:
    """Window descriptors at one pose frame for every length that fits.

    Returns {length: [SubFeature, ...]}; lengths whose window would
    leave the frame range are silently omitted, so frames near the
    stream borders contribute only their shorter windows.
    """
    fn = _FEATURE_FNS.get(kind)
    if fn is None:
        raise ValueError(f"unknown feature kind {kind!r}")
    out = {}
    for L in lengths:
        try:
            out[L] = fn(tracks, center_frame, L)
        except ValueError:
            continue
    return out


# ---------------------------------------------------------------------------
# codebooks

@dataclass
class Codebook:
    """k-means codebook of one sub-feature; k = 2 x dimension."""

    sub_feature: str
    centers: np.ndarray
    seed: int

    def __post_init__(self):
        self.centers = np.asarray(self.centers, dtype=float)
        if self.centers.ndim != 2:
            raise ValueError("centers must be (k, dim)")

    @property
    def size(self) -> int:
        return self.centers.shape[0]


def _pairwise_sq(X, C) -> np.ndarray:
    """Squared Euclidean distances via the expanded dot product."""
    d2 = (X * X).sum(axis=1)[:, None] - 2.0 * (X @ C.T) + (C * C).sum(axis=1)[None, :]
    return np.maximum(d2, 0.0)


def _kmeans_pp_init(samples, k, rng):
    n = samples.shape[0]
    centers = np.empty((k, samples.shape[1]))
    centers[0] = samples[rng.integers(n)]
    d2 = ((samples - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j] = samples[rng.integers(n)]
            continue
        centers[j] = samples[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((samples - centers[j]) ** 2).sum(axis=1))
    return centers


def _kmeans(samples, k, seed, max_iter=100, tol=1e-6):
    """Seeded Lloyd iterations; empty clusters are re-seeded from the
    sample farthest from its assigned center.  Returns (centers,
    inertia history after each assignment)."""
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(samples, k, rng)
    history = []
    prev = None
    for _ in range(max_iter):
        d2 = _pairwise_sq(samples, centers)
        assign = d2.argmin(axis=1)
        mind2 = d2[np.arange(len(samples)), assign]
        inertia = float(mind2.sum())
        history.append(inertia)
        counts = np.bincount(assign, minlength=k)
        taken = mind2.copy()
        for j in np.flatnonzero(counts == 0):
            far = int(taken.argmax())
            centers[j] = samples[far]
            taken[far] = -1.0
        for j in np.flatnonzero(counts > 0):
            centers[j] = samples[assign == j].mean(axis=0)
        if prev is not None and prev > 0 and (prev - inertia) / prev < tol:
            break
        prev = inertia
    return centers, history


def build_codebook(sub_feature: str, samples, seed: int = 0,
                   size: int | None = None) -> Codebook:
    """Cluster sample vectors of one sub-feature into a codebook.

    The codebook size defaults to twice the feature dimension and the
    sample count must reach it.  Identical samples cannot be clustered
    and raise.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim != 2:
        raise ValueError("samples must be (num, dim)")
    if not np.isfinite(X).all():
        raise ValueError("samples contain non-finite values")
    k = size if size is not None else 2 * X.shape[1]
    if X.shape[0] < k:
        raise ValueError(f"need at least {k} samples, got {X.shape[0]}")
    if np.all(X == X[0]):
        raise ValueError("all samples identical; codebook would be degenerate")
    centers, _ = _kmeans(X, k, seed)
    return Codebook(sub_feature, centers, seed)


def quantize(codebook: Codebook, samples) -> np.ndarray:
    """Nearest-center index per sample; ties pick the lowest index."""
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    if X.shape[1] != codebook.centers.shape[1]:
        raise ValueError("sample dimension does not match the codebook")
    return _pairwise_sq(X, codebook.centers).argmin(axis=1)


@dataclass
class CodebookSet:
    """Codebooks keyed by (window length, sub-feature name), plus the
    block order used by the encoded histograms."""

    codebooks: dict
    order: tuple

    def __post_init__(self):
        for key in self.order:
            if key not in self.codebooks:
                raise ValueError(f"block order names missing codebook {key!r}")

    def block_layout(self) -> tuple:
        """Tuple of (length, name, start, stop) in block order."""
        layout = []
        offset = 0
        for (length, name) in self.order:
            k = self.codebooks[(length, name)].size
            layout.append((length, name, offset, offset + k))
            offset += k
        return tuple(layout)

    @property
    def dim(self) -> int:
        return sum(self.codebooks[key].size for key in self.order)


def build_codebook_set(samples_by_key, seed: int = 0) -> CodebookSet:
    """Build one codebook per (length, sub-feature) key.

    samples_by_key maps (length, name) -> (num, dim) arrays; insertion
    order fixes the histogram block order.  Per-key seeds are derived
    from the base seed and the key position so results do not depend on
    build concurrency.
    """
    codebooks = {}
    order = tuple(samples_by_key.keys())
    for pos, (length, name) in enumerate(order):
        codebooks[(length, name)] = build_codebook(
            name, samples_by_key[(length, name)], seed=seed + pos)
    return CodebookSet(codebooks, order)


@dataclass
class BowHistogram:
    """Concatenated per-(length, sub-feature) histogram, each block
    L1-normalized; empty blocks stay all-zero."""

    values: np.ndarray
    layout: tuple

    def block(self, length: int, name: str) -> np.ndarray:
        for (L, n, start, stop) in self.layout:
            if L == length and n == name:
                return self.values[start:stop]
        raise KeyError((length, name))


def encode_bow(per_frame_features, codebook_set: CodebookSet) -> BowHistogram:
    """Quantize per-frame window descriptors and histogram them.

    per_frame_features: iterable over pose frames of {length:
    [SubFeature, ...]} as produced by pose_frame_features.  Every
    (length, sub-feature) pair must have a codebook.  An empty input
    yields the all-zero histogram.
    """
    layout = codebook_set.block_layout()
    values = np.zeros(codebook_set.dim)
    samples = {key: [] for key in codebook_set.order}
    for frame_record in per_frame_features:
        for length, feats in frame_record.items():
            for sf in feats:
                key = (length, sf.name)
                if key not in samples:
                    raise ValueError(f"no codebook for block {key!r}")
                samples[key].append(sf.values)
    for (length, name, start, stop) in layout:
        vecs = samples[(length, name)]
        if not vecs:
            continue
        idx = quantize(codebook_set.codebooks[(length, name)], np.array(vecs))
        counts = np.bincount(idx, minlength=stop - start).astype(float)
        values[start:stop] = counts / counts.sum()
    return BowHistogram(values, layout)


def stream_word_counts(frame_features, frames, codebook_set: CodebookSet,
                       num_frames: int) -> np.ndarray:
    """Per-frame codebook word counts for a whole stream.

    frame_features / frames: aligned lists of per-frame descriptor
    records and their frame indices.  Returns a (num_frames, dim) count
    matrix suitable for integral histograms; frames without descriptors
    stay zero.
    """
    counts = np.zeros((num_frames, codebook_set.dim))
    layout = {(L, n): (start, stop) for (L, n, start, stop)
              in codebook_set.block_layout()}
    for record, frame in zip(frame_features, frames):
        if not 0 <= frame < num_frames:
            raise ValueError(f"frame {frame} outside the stream")
        for length, feats in record.items():
            for sf in feats:
                start, _ = layout[(length, sf.name)]
                idx = int(quantize(codebook_set.codebooks[(length, sf.name)],
                                   sf.values[None, :])[0])
                counts[frame, start + idx] += 1
    return counts


# ---------------------------------------------------------------------------
# file formats

def save_tracks_csv(tracks: JointTrackSet, path) -> None:
    """Write tracks as CSV rows frame,part,x,y (header included)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "part", "x", "y"])
        first, _ = tracks.frame_range
        for f in range(tracks.num_frames):
            for p, part in enumerate(PARTS):
                x, y = tracks.positions[p, f]
                writer.writerow([first + f, part, f"{x:.9g}", f"{y:.9g}"])


def load_tracks_csv(path) -> JointTrackSet:
    """Read a frame,part,x,y CSV; every part must cover the same
    contiguous frame range."""
    rows = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["frame", "part", "x", "y"]:
            raise ValueError(f"{path}: expected header frame,part,x,y")
        for rec in reader:
            if not rec:
                continue
            frame, part, x, y = int(rec[0]), rec[1], float(rec[2]), float(rec[3])
            if part not in PARTS:
                raise ValueError(f"{path}: unknown part {part!r}")
            rows.setdefault(part, {})[frame] = (x, y)
    if set(rows) != set(PARTS):
        missing = sorted(set(PARTS) - set(rows))
        raise ValueError(f"{path}: missing parts {missing}")
    frames = sorted(rows[PARTS[0]])
    if frames != list(range(frames[0], frames[-1] + 1)):
        raise ValueError(f"{path}: frames are not contiguous")
    for part in PARTS:
        if sorted(rows[part]) != frames:
            raise ValueError(f"{path}: part {part!r} has a different frame set")
    positions = np.array([[rows[part][f] for f in frames] for part in PARTS])
    return JointTrackSet(positions, first_frame=frames[0])


def save_codebook_set(cbs: CodebookSet, path) -> None:
    """Serialize a codebook bundle as npz with a JSON block-order header
    carrying names, dimensions and seeds."""
    header = [
        {"length": int(L), "sub_feature": n,
         "dim": int(cbs.codebooks[(L, n)].centers.shape[1]),
         "size": int(cbs.codebooks[(L, n)].size),
         "seed": int(cbs.codebooks[(L, n)].seed)}
        for (L, n) in cbs.order
    ]
    arrays = {"header": np.array(json.dumps(header))}
    for i, key in enumerate(cbs.order):
        arrays[f"centers_{i}"] = cbs.codebooks[key].centers
    np.savez(path, **arrays)


def load_codebook_set(path) -> CodebookSet:
    with np.load(path, allow_pickle=True) as data:
        header = json.loads(str(data["header"]))
        codebooks, order = {}, []
        for i, entry in enumerate(header):
            key = (entry["length"], entry["sub_feature"])
            codebooks[key] = Codebook(entry["sub_feature"],
                                      data[f"centers_{i}"], entry["seed"])
            order.append(key)
    return CodebookSet(codebooks, tuple(order))
