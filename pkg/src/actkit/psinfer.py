"""Pictorial-structures inference for upper-body part layouts.

Parts live on a shared (H, W) grid of non-negative unary likelihoods
and are connected by a spanning tree with Gaussian displacement priors.
The edge potential between a parent at (xp, yp) and a child at (xc, yc)
is, in log space,

    -0.5 * ((xc - xp - dx)^2 / vx + (yc - yp - dy)^2 / vy)

with (dx, dy) the expected child-minus-parent offset.  MAP layouts are
found by max-product belief propagation; messages are computed either
by a full broadcast over all location pairs ("naive") or by two 1-D
quadratic envelope passes ("distance_transform").  The two paths are
deliberately independent implementations of the same quantity.  Exact
per-part posterior marginals use the naive sum-product path.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .posefeat import PARTS

LOG_FLOOR = -1e30

DEFAULT_STICKS = (
    ("r_upper_arm", "r_shoulder", "r_elbow"),
    ("l_upper_arm", "l_shoulder", "l_elbow"),
    ("r_lower_arm", "r_elbow", "r_wrist"),
    ("l_lower_arm", "l_elbow", "l_wrist"),
)


@dataclass(frozen=True)
class EdgeParams:
    """Tree edge with a Gaussian displacement prior.

    mean = (dx, dy) is the expected child position relative to the
    parent, var = (vx, vy) the per-axis variances.
    """

    parent: str
    child: str
    mean: tuple
    var: tuple

    def __post_init__(self):
        object.__setattr__(self, "mean", tuple(float(v) for v in self.mean))
        object.__setattr__(self, "var", tuple(float(v) for v in self.var))
        if len(self.mean) != 2 or len(self.var) != 2:
            raise ValueError("mean and var must be (x, y) pairs")
        if self.var[0] <= 0 or self.var[1] <= 0:
            raise ValueError("edge variances must be positive")
        if self.parent == self.child:
            raise ValueError("an edge cannot connect a part to itself")


class PartGraph:
    """A spanning tree over named parts."""

    def __init__(self, parts, edges):
        self.parts = tuple(parts)
        self.edges = tuple(edges)
        if not self.parts:
            raise ValueError("part graph needs at least one part")
        if len(set(self.parts)) != len(self.parts):
            raise ValueError("part names must be unique")
        known = set(self.parts)
        self._children = {p: [] for p in self.parts}
        self._parent_edge = {}
        for e in self.edges:
            if e.parent not in known or e.child not in known:
                raise ValueError(f"edge {e.parent}->{e.child} names unknown parts")
            if e.child in self._parent_edge:
                raise ValueError(f"part {e.child!r} has two parents")
            self._parent_edge[e.child] = e
            self._children[e.parent].append(e.child)
        roots = [p for p in self.parts if p not in self._parent_edge]
        if len(roots) != 1:
            raise ValueError(f"tree must have exactly one root, found {roots}")
        self.root = roots[0]
        # BFS from the root must reach every part (catches cycles among
        # non-root components as well, since each part has one parent)
        seen = {self.root}
        queue = [self.root]
        while queue:
            for c in self._children[queue.pop()]:
                seen.add(c)
                queue.append(c)
        if seen != known:
            raise ValueError("part graph is not connected")

    def children_of(self, part):
        return tuple(self._children[part])

    def parent_edge(self, part) -> EdgeParams:
        return self._parent_edge[part]

    def topo_order(self):
        """Parts ordered root first, every parent before its children."""
        order = []
        stack = [self.root]
        while stack:
            p = stack.pop()
            order.append(p)
            stack.extend(reversed(self._children[p]))
        return order


def default_part_graph(scale: float = 1.0) -> PartGraph:
    """Torso-rooted upper-body tree over the ten tracked parts.

    Offsets are in pixels for a figure roughly 200 * scale tall, with
    image y growing downward.
    """
    s = scale
    v = scale * scale

    def e(parent, child, dx, dy, vx, vy):
        return EdgeParams(parent, child, (dx * s, dy * s), (vx * v, vy * v))

    edges = (
        e("torso", "head", 0, -60, 100, 100),
        e("torso", "r_shoulder", -40, -40, 64, 64),
        e("torso", "l_shoulder", 40, -40, 64, 64),
        e("r_shoulder", "r_elbow", -10, 50, 100, 100),
        e("l_shoulder", "l_elbow", 10, 50, 100, 100),
        e("r_elbow", "r_wrist", 0, 45, 144, 144),
        e("l_elbow", "l_wrist", 0, 45, 144, 144),
        e("r_wrist", "r_hand", 0, 15, 25, 25),
        e("l_wrist", "l_hand", 0, 15, 25, 25),
    )
    return PartGraph(PARTS, edges)


# ---------------------------------------------------------------------------
# message computation

def _log_unary(grid) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    out = np.full(g.shape, LOG_FLOOR)
    pos = g > 0
    out[pos] = np.log(g[pos])
    return out


def _log_pairwise(edge: EdgeParams, shape) -> np.ndarray:
    """Full (HW_child, HW_parent) table of log edge potentials."""
    H, W = shape
    ys, xs = np.divmod(np.arange(H * W), W)
    dxm = xs[:, None] - xs[None, :] - edge.mean[0]
    dym = ys[:, None] - ys[None, :] - edge.mean[1]
    return -0.5 * (dxm ** 2 / edge.var[0] + dym ** 2 / edge.var[1])


def _naive_max_message(beta, edge, shape):
    """Max-product message by brute force over all location pairs.

    Returns (message (H, W) on the parent grid, argmax table of flat
    child indices).  Ties go to the lowest flat (row-major) index.
    """
    M = beta.ravel()[:, None] + _log_pairwise(edge, shape)
    return (M.max(axis=0).reshape(shape),
            M.argmax(axis=0).reshape(shape))


def _max_envelope_1d(f, a, offset):
    """out[p] = max_q f[q] - a * (p + offset - q)^2, with the argmax q.

    Upper envelope of downward parabolas rooted at the sample points,
    evaluated at the (possibly fractional) positions p + offset.
    """
    n = f.size
    neg = -np.asarray(f, dtype=float)       # lower envelope of -f
    v = np.zeros(n, dtype=int)
    z = np.empty(n + 1)
    z[0], z[1] = -np.inf, np.inf
    k = 0
    for q in range(1, n):
        while True:
            r = v[k]
            s = ((neg[q] + a * q * q) - (neg[r] + a * r * r)) \
                / (2.0 * a * (q - r))
            if s <= z[k]:
                k -= 1
            else:
                break
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    vals = np.empty(n)
    args = np.empty(n, dtype=int)
    k = 0
    for p in range(n):
        t = p + offset
        while z[k + 1] < t:
            k += 1
        r = v[k]
        vals[p] = f[r] - a * (t - r) ** 2
        args[p] = r
    return vals, args


def _dt_max_message(beta, edge, shape):
    """Max-product message via two separable 1-D envelope passes.

    Returns (message, bestx, besty); bestx[yc, xp] is the best child
    column for a row, besty[yp, xp] the best child row per parent
    location, so decoding reads y* = besty[yp, xp], x* = bestx[y*, xp].
    """
    H, W = shape
    dx, dy = edge.mean
    ax = 1.0 / (2.0 * edge.var[0])
    ay = 1.0 / (2.0 * edge.var[1])
    g = np.empty((H, W))
    bestx = np.empty((H, W), dtype=int)
    for y in range(H):
        g[y], bestx[y] = _max_envelope_1d(beta[y], ax, dx)
    msg = np.empty((H, W))
    besty = np.empty((H, W), dtype=int)
    for x in range(W):
        msg[:, x], besty[:, x] = _max_envelope_1d(g[:, x], ay, dy)
    return msg, bestx, besty


# ---------------------------------------------------------------------------
# inference

@dataclass
class InferenceResult:
    mode: str
    algorithm: str
    placements: dict | None = None      # part -> (x, y)
    log_score: float | None = None
    posteriors: dict | None = None      # part -> (H, W), sums to one


def infer(grids, graph: PartGraph, mode: str = "map",
          algorithm: str = "naive") -> InferenceResult:
    """Run tree inference over per-part likelihood grids.

    grids: (P, H, W) non-negative unaries ordered like graph.parts.
    mode "map" returns the highest scoring layout and its joint log
    score; mode "marginal" returns per-part posterior location maps.
    Marginals require the naive algorithm: the envelope trick only
    applies to maximization.
    """
    G = np.asarray(grids, dtype=float)
    if G.ndim != 3 or G.shape[0] != len(graph.parts):
        raise ValueError("grids must be (num_parts, H, W)")
    if np.any(G < 0) or not np.isfinite(G).all():
        raise ValueError("unary grids must be finite and non-negative")
    if mode not in ("map", "marginal"):
        raise ValueError(f"unknown inference mode {mode!r}")
    if algorithm not in ("naive", "distance_transform"):
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if mode == "marginal" and algorithm == "distance_transform":
        raise ValueError("marginal mode requires the naive algorithm")
    shape = G.shape[1:]
    logphi = {part: _log_unary(G[i]) for i, part in enumerate(graph.parts)}
    order = graph.topo_order()
    if mode == "map":
        return _infer_map(logphi, graph, order, shape, algorithm)
    return _infer_marginal(logphi, graph, order, shape)


def _infer_map(logphi, graph, order, shape, algorithm):
    H, W = shape
    up = {}
    decode = {}
    for part in reversed(order):
        beta = logphi[part].copy()
        for ch in graph.children_of(part):
            beta += up[ch]
        if part == graph.root:
            root_beta = beta
            continue
        edge = graph.parent_edge(part)
        if algorithm == "naive":
            msg, arg = _naive_max_message(beta, edge, shape)
            decode[part] = (arg,)
        else:
            msg, bestx, besty = _dt_max_message(beta, edge, shape)
            decode[part] = (bestx, besty)
        up[part] = msg
    flat = int(np.argmax(root_beta))
    locs = {graph.root: divmod(flat, W)}
    for part in order:
        if part == graph.root:
            continue
        py, px = locs[graph.parent_edge(part).parent]
        tables = decode[part]
        if len(tables) == 1:
            locs[part] = divmod(int(tables[0][py, px]), W)
        else:
            bestx, besty = tables
            ystar = int(besty[py, px])
            locs[part] = (ystar, int(bestx[ystar, px]))
    placements = {part: (x, y) for part, (y, x) in locs.items()}
    return InferenceResult("map", algorithm, placements=placements,
                           log_score=float(root_beta.flat[flat]))


def _infer_marginal(logphi, graph, order, shape):
    H, W = shape
    up = {}
    for part in reversed(order):
        b = logphi[part].copy()
        for ch in graph.children_of(part):
            b += up[ch]
        if part == graph.root:
            continue
        logpsi = _log_pairwise(graph.parent_edge(part), shape)
        up[part] = logsumexp(b.ravel()[:, None] + logpsi,
                             axis=0).reshape(shape)
    down = {graph.root: np.zeros(shape)}
    posteriors = {}
    for part in order:
        children = graph.children_of(part)
        belief = logphi[part] + down[part]
        for ch in children:
            belief += up[ch]
        p = np.exp(belief - logsumexp(belief))
        posteriors[part] = p / p.sum()
        for ch in children:
            minus = logphi[part] + down[part]
            for other in children:
                if other != ch:
                    minus += up[other]
            logpsi = _log_pairwise(graph.parent_edge(ch), shape)
            down[ch] = logsumexp(logpsi + minus.ravel()[None, :],
                                 axis=1).reshape(shape)
    return InferenceResult("marginal", "naive", posteriors=posteriors)


# ---------------------------------------------------------------------------
# hand likelihoods

@dataclass
class HandHypothesisSet:
    """Scored hand location hypotheses, points as (x, y) rows."""

    points: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.scores = np.asarray(self.scores, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ValueError("hypothesis points must be (N, 2)")
        if self.scores.shape != (self.points.shape[0],):
            raise ValueError("need one score per hypothesis")
        if not (np.isfinite(self.points).all() and np.isfinite(self.scores).all()):
            raise ValueError("hypotheses must be finite")


def hand_likelihood_map(hypotheses: HandHypothesisSet, shape,
                        precision: float = 0.005,
                        min_score: float = -1.0) -> np.ndarray:
    """Kernel density style likelihood grid from detector hypotheses.

    Each hypothesis k contributes (s_k - min_score) *
    exp(-precision * squared distance); hypotheses scoring below
    min_score are dropped.  The default precision corresponds to a
    Gaussian kernel with a 10 pixel standard deviation.
    """
    if precision <= 0:
        raise ValueError("precision must be positive")
    H, W = shape
    keep = hypotheses.scores >= min_score
    pts = hypotheses.points[keep]
    w = hypotheses.scores[keep] - min_score
    out = np.zeros((H, W))
    if pts.shape[0] == 0:
        return out
    ys, xs = np.mgrid[0:H, 0:W]
    for (hx, hy), wk in zip(pts, w):
        out += wk * np.exp(-precision * ((xs - hx) ** 2 + (ys - hy) ** 2))
    return out


# ---------------------------------------------------------------------------
# evaluation

def pcp_eval(predicted, truth, sticks=DEFAULT_STICKS, factor: float = 0.5):
    """Fraction of correctly placed sticks.

    A stick (name, part_a, part_b) is correct when both predicted
    endpoints lie within factor times the true stick length of their
    true positions.  Zero-length truth sticks cannot be scored; they
    are excluded and reported.  Returns (fraction, per-stick dict,
    excluded names).
    """
    results = {}
    excluded = []
    for name, pa, pb in sticks:
        ga = np.asarray(truth[pa], dtype=float)
        gb = np.asarray(truth[pb], dtype=float)
        length = float(np.linalg.norm(ga - gb))
        if length == 0.0:
            excluded.append(name)
            continue
        da = float(np.linalg.norm(np.asarray(predicted[pa], dtype=float) - ga))
        db = float(np.linalg.norm(np.asarray(predicted[pb], dtype=float) - gb))
        results[name] = da <= factor * length and db <= factor * length
    if not results:
        raise ValueError("no stick with positive length to evaluate")
    fraction = sum(results.values()) / len(results)
    return fraction, results, tuple(excluded)


# ---------------------------------------------------------------------------
# file formats

def save_grids(grids, path) -> None:
    G = np.asarray(grids, dtype=float)
    if G.ndim != 3 or np.any(G < 0):
        raise ValueError("grids must be non-negative (P, H, W)")
    np.save(path, G)


def load_grids(path) -> np.ndarray:
    G = np.load(path)
    if G.ndim != 3 or np.any(G < 0):
        raise ValueError(f"{path}: expected non-negative (P, H, W) grids")
    return G


def save_hand_hypotheses_csv(hypotheses: HandHypothesisSet, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "score"])
        for (x, y), s in zip(hypotheses.points, hypotheses.scores):
            writer.writerow([f"{x:.9g}", f"{y:.9g}", f"{s:.9g}"])


def load_hand_hypotheses_csv(path) -> HandHypothesisSet:
    points, scores = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["x", "y", "score"]:
            raise ValueError(f"{path}: expected header x,y,score")
        for rec in reader:
            if not rec:
                continue
            points.append((float(rec[0]), float(rec[1])))
            scores.append(float(rec[2]))
    return HandHypothesisSet(np.asarray(points).reshape(-1, 2),
                             np.asarray(scores))


def save_placements_csv(placements, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["part", "x", "y"])
        for part, (x, y) in placements.items():
            writer.writerow([part, x, y])


def load_placements_csv(path) -> dict:
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["part", "x", "y"]:
            raise ValueError(f"{path}: expected header part,x,y")
        for rec in reader:
            if not rec:
                continue
            out[rec[0]] = (int(rec[1]), int(rec[2]))
    return out
