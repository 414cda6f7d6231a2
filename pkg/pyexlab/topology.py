"""Excursion-set topology of gridded samples.

Everything here works on the values of the analysis window alone: a 2-D
array, or a :class:`~pyexlab.synthesis.FieldSample` whose window (optionally
grown into its margin) is used. The outermost ring of the window array is the
window boundary.
"""
import logging
from collections import deque
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import ndimage

from .synthesis import FieldSample

logger = logging.getLogger(__name__)

ORACLE_MAX_SIDE = 64

CRITICAL_TYPES = ("m+", "m-", "s+", "s-", "four-arm", "tangency")
INTERIOR_TYPES = ("m+", "m-", "s+", "s-", "four-arm")

_OFFSETS_4 = ((-1, 0), (1, 0), (0, -1), (0, 1))
_OFFSETS_8 = _OFFSETS_4 + ((-1, -1), (-1, 1), (1, -1), (1, 1))


@dataclass(frozen=True)
class ConnectivityPolicy:
    """Digital connectivity of the foreground (superlevel) set; the background gets the dual one."""
    foreground: int = 8

    def __post_init__(self):
        if self.foreground not in (4, 8):
            raise ValueError(f"Invalid foreground connectivity. Expected 4 or 8, got {self.foreground}.")

    @property
    def background(self):
        return 12 - self.foreground

    def dual(self):
        return ConnectivityPolicy(self.background)

    @staticmethod
    def structure(connectivity):
        return ndimage.generate_binary_structure(2, 2 if connectivity == 8 else 1)

    @staticmethod
    def offsets(connectivity):
        return _OFFSETS_8 if connectivity == 8 else _OFFSETS_4


DEFAULT_POLICY = ConnectivityPolicy()


def _window(sample, expand=0):
    if isinstance(sample, FieldSample):
        return sample.window_values(expand)
    values = np.asarray(sample, dtype=float)
    if values.ndim != 2 or min(values.shape) < 1:
        raise ValueError(f"Expected a 2-D array of values, got shape {values.shape}.")
    return values


def _ring_mask(shape):
    ring = np.zeros(shape, dtype=bool)
    ring[0, :] = ring[-1, :] = ring[:, 0] = ring[:, -1] = True
    return ring


@dataclass(frozen=True)
class ComponentCensus:
    level: float
    n_contained: int
    n_boundary: int
    n_level_contained: int
    n_level_boundary: int

    @property
    def n_total(self):
        return self.n_contained + self.n_boundary

    @property
    def n_level_total(self):
        return self.n_level_contained + self.n_level_boundary


def _interface_pairs(fg, ring):
    """4-adjacent vertex pairs straddling the level: (fg vertex, bg vertex, both on ring).

    An interface edge lies on the boundary only when both endpoints are ring
    vertices; an edge from the ring to an interior vertex points into the window.
    """
    pairs = []
    for a, b in (((slice(None), slice(None, -1)), (slice(None), slice(1, None))),
                 ((slice(None, -1), slice(None)), (slice(1, None), slice(None)))):
        straddle = fg[a] != fg[b]
        a_is_fg = fg[a][straddle]
        ia = np.argwhere(straddle)
        ib = ia + (np.array([0, 1]) if a[0] == slice(None) else np.array([1, 0]))
        fg_idx = np.where(a_is_fg[:, None], ia, ib)
        bg_idx = np.where(a_is_fg[:, None], ib, ia)
        both_ring = ring[a][straddle] & ring[b][straddle]
        pairs.append((fg_idx, bg_idx, both_ring))
    fg_idx = np.concatenate([p[0] for p in pairs])
    bg_idx = np.concatenate([p[1] for p in pairs])
    return fg_idx, bg_idx, np.concatenate([p[2] for p in pairs])


def _level_set_counts(fg_labels, bg_labels, fg, ring):
    fg_idx, bg_idx, on_ring = _interface_pairs(fg, ring)
    if len(fg_idx) == 0:
        return 0, 0
    keys = fg_labels[fg_idx[:, 0], fg_idx[:, 1]].astype(np.int64) * (int(bg_labels.max()) + 1) \
        + bg_labels[bg_idx[:, 0], bg_idx[:, 1]]
    n_total = len(np.unique(keys))
    n_boundary = len(np.unique(keys[on_ring]))
    return n_total - n_boundary, n_boundary


def count_components(sample, level, policy=DEFAULT_POLICY, expand=0):
    """Counts components of ``{f >= level}`` and of the level set in the window.

    A component is contained when none of its vertices lies on the window
    ring. Level-set components are the adjacent (foreground component,
    background component) pairs; one touches the boundary when some
    interface pair between the two runs along the ring.

    :param sample: Sample or window array.
    :type sample: FieldSample or numpy.ndarray
    :param level: Threshold.
    :type level: float
    :param policy: Connectivity (defaults to foreground 8, background 4).
    :type policy: ConnectivityPolicy, optional
    :param expand: Cells of margin added to the window (samples only).
    :type expand: int, optional
    :rtype: ComponentCensus
    """
    if not np.isfinite(level):
        raise ValueError(f"Invalid level. Expected a finite value, got {level}.")
    values = _window(sample, expand)
    ring = _ring_mask(values.shape)
    fg = values >= level
    fg_labels, n_fg = ndimage.label(fg, structure=policy.structure(policy.foreground))
    bg_labels, _ = ndimage.label(~fg, structure=policy.structure(policy.background))
    touching = np.unique(fg_labels[ring & fg])
    n_boundary = len(touching)
    n_level_contained, n_level_boundary = _level_set_counts(fg_labels, bg_labels, fg, ring)
    return ComponentCensus(float(level), int(n_fg - n_boundary), int(n_boundary),
                           int(n_level_contained), int(n_level_boundary))


def _bfs_labels(mask, connectivity):
    labels = np.zeros(mask.shape, dtype=np.int64)
    offsets = ConnectivityPolicy.offsets(connectivity)
    count = 0
    ny, nx = mask.shape
    for start in zip(*np.nonzero(mask)):
        if labels[start]:
            continue
        count += 1
        labels[start] = count
        queue = deque([start])
        while queue:
            r, c = queue.popleft()
            for dr, dc in offsets:
                q = (r + dr, c + dc)
                if 0 <= q[0] < ny and 0 <= q[1] < nx and mask[q] and not labels[q]:
                    labels[q] = count
                    queue.append(q)
    return labels, count


def flood_fill_oracle(values, level, policy=DEFAULT_POLICY):
    """Reference census by exhaustive breadth-first search, for grids up to 64x64."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or max(values.shape) > ORACLE_MAX_SIDE:
        raise ValueError(f"Oracle grids must be 2-D and at most {ORACLE_MAX_SIDE} per side, got {values.shape}.")
    ring = _ring_mask(values.shape)
    fg = values >= level
    fg_labels, n_fg = _bfs_labels(fg, policy.foreground)
    bg_labels, _ = _bfs_labels(~fg, policy.background)
    touching = {int(fg_labels[r, c]) for r, c in zip(*np.nonzero(ring & fg))}
    pairs, ring_pairs = set(), set()
    ny, nx = values.shape
    for r in range(ny):
        for c in range(nx):
            for q in ((r, c + 1), (r + 1, c)):
                if q[0] >= ny or q[1] >= nx or fg[r, c] == fg[q]:
                    continue
                f, b = ((r, c), q) if fg[r, c] else (q, (r, c))
                key = (int(fg_labels[f]), int(bg_labels[b]))
                pairs.add(key)
                if ring[r, c] and ring[q]:
                    ring_pairs.add(key)
    return ComponentCensus(float(level), n_fg - len(touching), len(touching),
                           len(pairs) - len(ring_pairs), len(ring_pairs))


LEAF, MERGE = "leaf", "merge"


@dataclass(frozen=True)
class MergeTree:
    """Births and merges of super- or sublevel components over a full sweep.

    Node arrays are aligned: ``flat`` is the row-major window index of the
    node's vertex, ``multiplicity`` is 1 for leaves and ``k - 1`` for a merge
    of ``k`` components, and ``parent`` is the index of the next node towards
    the root (``-1`` at the root).
    """
    orientation: str
    shape: tuple
    flat: np.ndarray
    level: np.ndarray
    kind: np.ndarray
    multiplicity: np.ndarray
    parent: np.ndarray

    @property
    def rows(self):
        return self.flat // self.shape[1]

    @property
    def cols(self):
        return self.flat % self.shape[1]

    @property
    def is_leaf(self):
        return self.kind == LEAF

    @property
    def is_merge(self):
        return self.kind == MERGE

    def _alive(self, mask):
        return int(np.count_nonzero(self.is_leaf & mask) - self.multiplicity[self.is_merge & mask].sum())

    def components_above(self, level):
        """Number of components of ``{f >= level}`` (superlevel trees)."""
        if self.orientation != "superlevel":
            raise ValueError("components_above needs a superlevel tree.")
        return self._alive(self.level >= level)

    def components_below(self, level):
        """Number of components of ``{f < level}`` (sublevel trees)."""
        if self.orientation != "sublevel":
            raise ValueError("components_below needs a sublevel tree.")
        return self._alive(self.level < level)

    def to_frame(self):
        """Edge list of the tree."""
        return pd.DataFrame({"node": np.arange(len(self.flat)), "row": self.rows, "col": self.cols,
                             "level": self.level, "kind": self.kind,
                             "multiplicity": self.multiplicity, "parent": self.parent})


def _total_order(values):
    rows, cols = np.indices(values.shape)
    return np.lexsort((cols.ravel(), rows.ravel(), values.ravel()))


def _order_ranks(values):
    """Rank of each vertex in the (value, row, col) order, as an array shaped like ``values``."""
    order = _total_order(values)
    ranks = np.empty(order.size, dtype=np.int64)
    ranks[order] = np.arange(order.size)
    return ranks.reshape(values.shape)


def _sweep(values, connectivity, descending):
    ny, nx = values.shape
    width = nx + 2
    order = _total_order(values)
    if descending:
        order = order[::-1]
    padded = ((order // nx) + 1) * width + (order % nx) + 1
    offsets = [dr * width + dc for dr, dc in ConnectivityPolicy.offsets(connectivity)]
    size = (ny + 2) * width
    uf = list(range(size))
    processed = bytearray(size)
    current = {}
    flat_out, kind_out, mult_out, parent_out = [], [], [], []
    flat_values = values.ravel()

    def find(i):
        while uf[i] != i:
            uf[i] = uf[uf[i]]
            i = uf[i]
        return i

    for flat, p in zip(order.tolist(), padded.tolist()):
        roots = {find(p + off) for off in offsets if processed[p + off]}
        processed[p] = 1
        if not roots:
            current[p] = len(flat_out)
            flat_out.append(flat); kind_out.append(LEAF); mult_out.append(1); parent_out.append(-1)
        elif len(roots) == 1:
            uf[p] = roots.pop()
        else:
            node = len(flat_out)
            flat_out.append(flat); kind_out.append(MERGE); mult_out.append(len(roots) - 1); parent_out.append(-1)
            for r in roots:
                parent_out[current.pop(r)] = node
                uf[r] = p
            current[p] = node
    flat_arr = np.array(flat_out, dtype=np.int64)
    return MergeTree("superlevel" if descending else "sublevel", values.shape, flat_arr,
                     flat_values[flat_arr], np.array(kind_out), np.array(mult_out, dtype=np.int64),
                     np.array(parent_out, dtype=np.int64))


def build_merge_trees(sample, policy=DEFAULT_POLICY, expand=0):
    """Superlevel and sublevel merge trees of the window.

    Vertices are totally ordered by ``(value, row, col)``. The superlevel sweep
    runs that order downwards with foreground adjacency; the sublevel sweep runs
    it upwards with background adjacency.

    :rtype: tuple(MergeTree, MergeTree)
    """
    values = _window(sample, expand)
    return _sweep(values, policy.foreground, True), _sweep(values, policy.background, False)


@dataclass(frozen=True)
class CriticalPoint:
    row: int
    col: int
    level: float
    type: str
    multiplicity: int = 1
    detail: str = None


def _sign_changes(values, r, c):
    ring = [values[r + dr, c + dc] - values[r, c]
            for dr, dc in ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))]
    signs = [s for s in np.sign(ring) if s != 0]
    return sum(1 for i in range(len(signs)) if signs[i] != signs[i - 1])


def is_grid_saddle(values, row, col):
    """Whether an interior vertex has at least 4 sign changes of neighbour differences around it."""
    values = _window(values)
    ny, nx = values.shape
    if not (0 < row < ny - 1 and 0 < col < nx - 1):
        raise ValueError(f"Vertex ({row}, {col}) is not interior.")
    return _sign_changes(values, row, col) >= 4


def _ring_cycle(shape):
    ny, nx = shape
    top = [(0, c) for c in range(nx)]
    right = [(r, nx - 1) for r in range(1, ny)]
    bottom = [(ny - 1, c) for c in range(nx - 2, -1, -1)] if ny > 1 else []
    left = [(r, 0) for r in range(ny - 2, 0, -1)] if nx > 1 else []
    return top + right + bottom + left


def _ring_extrema(values):
    """1-D extrema of the cyclic ring sequence; plateau runs count once, at their first vertex."""
    cycle = _ring_cycle(values.shape)
    seq = [values[v] for v in cycle]
    n = len(seq)
    start = next((i for i in range(n) if seq[i] != seq[i - 1]), None)
    if start is None:
        return []
    runs = []
    for k in range(n):
        i = (start + k) % n
        if runs and seq[i] == runs[-1][1]:
            continue
        runs.append((cycle[i], seq[i]))
    extrema = []
    for j, (vertex, value) in enumerate(runs):
        prev_value, next_value = runs[j - 1][1], runs[(j + 1) % len(runs)][1]
        if value > prev_value and value > next_value:
            extrema.append((vertex, value, "max"))
        elif value < prev_value and value < next_value:
            extrema.append((vertex, value, "min"))
    return extrema


@dataclass(frozen=True)
class CriticalCensus:
    shape: tuple
    points: tuple

    def select(self, type_, a=-np.inf, b=np.inf):
        """Points of one type with level in ``[a, b)``."""
        return [p for p in self.points if p.type == type_ and a <= p.level < b]

    def window_counts(self, a=-np.inf, b=np.inf):
        """``(N_crit, N_tang, per-type counts)`` over critical levels in ``[a, b)``.

        A critical value equal to ``b`` is still present in ``{f >= b}``, so it
        does not change the count between ``a`` and ``b``.
        """
        if a > b:
            raise ValueError(f"Invalid level window: a={a} > b={b}.")
        per_type = {t: sum(p.multiplicity for p in self.select(t, a, b)) for t in CRITICAL_TYPES}
        n_crit = sum(per_type[t] for t in INTERIOR_TYPES)
        return n_crit, per_type["tangency"], per_type

    def to_frame(self):
        return pd.DataFrame([p.__dict__ for p in self.points],
                            columns=["row", "col", "level", "type", "multiplicity", "detail"])


def classify_critical_points(sample, policy=DEFAULT_POLICY, expand=0):
    """Classifies the critical points of the window from its two merge trees.

    Interior leaves are ``m+`` (superlevel) and ``m-`` (sublevel); interior
    merges are ``s-`` (superlevel) and ``s+`` (sublevel), except vertices where
    both trees merge and which pass :func:`is_grid_saddle` on the sweep ranks,
    which are ``four-arm``. Tangencies are the 1-D extrema of
    the ring values and the ring vertices where either tree merges.

    :rtype: CriticalCensus
    """
    values = _window(sample, expand)
    ring = _ring_mask(values.shape).ravel()
    sup, sub = build_merge_trees(values, policy)
    nx = values.shape[1]
    points = []

    def interior(tree, kind):
        mask = (tree.kind == kind) & ~ring[tree.flat]
        return dict(zip(tree.flat[mask].tolist(), tree.multiplicity[mask].tolist()))

    sup_merges, sub_merges = interior(sup, MERGE), interior(sub, MERGE)
    # local candidate test on ranks, so ties break as in the sweeps
    ranks = _order_ranks(values)
    four_arm = {flat for flat in sup_merges.keys() & sub_merges.keys()
                if is_grid_saddle(ranks, flat // nx, flat % nx)}
    flat_values = values.ravel()
    for flat in interior(sup, LEAF):
        points.append(CriticalPoint(flat // nx, flat % nx, float(flat_values[flat]), "m+"))
    for flat in interior(sub, LEAF):
        points.append(CriticalPoint(flat // nx, flat % nx, float(flat_values[flat]), "m-"))
    for merges, type_ in ((sup_merges, "s-"), (sub_merges, "s+")):
        for flat, mult in merges.items():
            if flat not in four_arm:
                points.append(CriticalPoint(flat // nx, flat % nx, float(flat_values[flat]), type_, mult))
    for flat in sorted(four_arm):
        points.append(CriticalPoint(flat // nx, flat % nx, float(flat_values[flat]), "four-arm",
                                    max(sup_merges[flat], sub_merges[flat])))

    ring_merges = {}
    for tree in (sup, sub):
        mask = (tree.kind == MERGE) & ring[tree.flat]
        for flat, mult in zip(tree.flat[mask].tolist(), tree.multiplicity[mask].tolist()):
            ring_merges[flat] = max(ring_merges.get(flat, 0), mult + 1)
    for (r, c), value, _ in _ring_extrema(values):
        flat = r * nx + c
        if flat not in ring_merges:
            points.append(CriticalPoint(r, c, float(value), "tangency", 1, "extremum"))
    for flat, mult in sorted(ring_merges.items()):
        points.append(CriticalPoint(flat // nx, flat % nx, float(flat_values[flat]), "tangency", mult, "merge"))
    census = CriticalCensus(values.shape, tuple(points))
    logger.debug("critical census %s", census.window_counts()[2])
    return census


def _as_census(sample, policy, expand):
    if isinstance(sample, CriticalCensus):
        return sample
    return classify_critical_points(sample, policy, expand)


def count_window_crit(sample, a, b, policy=DEFAULT_POLICY, expand=0):
    """Critical and tangency counts with level in ``[a, b)``; ``a == b`` is empty.

    :return: ``(N_crit, N_tang, per-type counts)``.
    :rtype: tuple
    """
    if a > b:
        raise ValueError(f"Invalid level window: a={a} > b={b}.")
    return _as_census(sample, policy, expand).window_counts(a, b)


def count_four_arm(sample, a, b, policy=DEFAULT_POLICY, expand=0):
    if a > b:
        raise ValueError(f"Invalid level window: a={a} > b={b}.")
    return count_window_crit(sample, a, b, policy, expand)[2]["four-arm"]


@dataclass(frozen=True)
class MorseBalance:
    kind: str
    a: float
    b: float
    delta: int
    predicted: int
    n_tangency: int
    n_four_arm: int

    @property
    def slack_free(self):
        return self.n_tangency == 0 and self.n_four_arm == 0

    @property
    def exact(self):
        return self.delta == self.predicted

    def to_dict(self):
        return {"kind": self.kind, "a": self.a, "b": self.b, "delta": self.delta,
                "predicted": self.predicted, "n_tangency": self.n_tangency,
                "n_four_arm": self.n_four_arm, "slack_free": self.slack_free, "exact": self.exact}


def morse_balance_check(sample, a, b, policy=DEFAULT_POLICY, kind="excursion", expand=0):
    """Compares the change of the contained count between ``a`` and ``b`` with its critical-point predictor.

    For ``kind='excursion'`` the change is ``N_ES(a) - N_ES(b)`` and the
    predictor ``m+ - s-``; for ``kind='level'`` it is ``N_LS(a) - N_LS(b)``
    against ``m+ - s- + s+ - m-``. Critical levels are taken in ``[a, b)``.

    :rtype: MorseBalance
    """
    ALLOWED_KINDS = {"excursion", "level"}
    if kind not in ALLOWED_KINDS:
        raise ValueError(f"Invalid kind. Expected one of {ALLOWED_KINDS}, got {kind}.")
    if a > b:
        raise ValueError(f"Invalid level window: a={a} > b={b}.")
    values = _window(sample, expand)
    lower, upper = count_components(values, a, policy), count_components(values, b, policy)
    _, n_tang, per_type = count_window_crit(values, a, b, policy)
    if kind == "excursion":
        delta = lower.n_contained - upper.n_contained
        predicted = per_type["m+"] - per_type["s-"]
    else:
        delta = lower.n_level_contained - upper.n_level_contained
        predicted = per_type["m+"] - per_type["s-"] + per_type["s+"] - per_type["m-"]
    return MorseBalance(kind, float(a), float(b), delta, predicted, n_tang, per_type["four-arm"])


CENSUS_COLUMNS = ["level", "n_es_contained", "n_es_boundary", "n_ls_contained", "n_ls_boundary",
                  "m_plus", "m_minus", "s_plus", "s_minus", "four_arm", "tangency"]


def census_table(sample, levels, policy=DEFAULT_POLICY, expand=0):
    """Component counts at each level plus critical counts with level at or above it."""
    values = _window(sample, expand)
    census = classify_critical_points(values, policy)
    rows = []
    for level in sorted(float(v) for v in levels):
        c = count_components(values, level, policy)
        per_type = census.window_counts(level, np.inf)[2]
        rows.append([level, c.n_contained, c.n_boundary, c.n_level_contained, c.n_level_boundary,
                     per_type["m+"], per_type["m-"], per_type["s+"], per_type["s-"],
                     per_type["four-arm"], per_type["tangency"]])
    return pd.DataFrame(rows, columns=CENSUS_COLUMNS)
