"""Convergent cross mapping.

Delay embedding, library-restricted nearest neighbours, simplex-weighted
cross-map estimates and library-size convergence curves.  Following the
usual convention, to test whether X drives Y the manifold built from Y (the
*reader*) is used to estimate X (the *source*).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import stats

from . import seeding


class CCMError(ValueError):
    """Raised when a series is too short or a library too small."""


@dataclass(frozen=True)
class EmbeddingSpec:
    E: int = 3
    tau: int = 2
    theiler: int = 10

    def __post_init__(self):
        if self.E < 1 or self.tau < 1 or self.theiler < 0:
            raise CCMError(f"invalid embedding {self}: need E >= 1, tau >= 1, theiler >= 0")

    @property
    def span(self):
        return (self.E - 1) * self.tau

    @property
    def k(self):
        return self.E + 1


@dataclass(frozen=True)
class ConvergenceThresholds:
    min_delta_rho: float = 0.05
    min_monotonicity: float = 0.5
    min_final_rho: float = 0.1


@dataclass
class ShadowManifold:
    points: np.ndarray  # (n_points, E)
    origin: np.ndarray  # time index of each point's most recent coordinate

    def __len__(self):
        return self.points.shape[0]


@dataclass
class CcmCurve:
    library_sizes: np.ndarray
    rho_mean: np.ndarray
    rho_sd: np.ndarray
    n_subsamples: int
    degenerate: bool = False
    channels: dict = field(default_factory=dict)

    @property
    def final_rho(self):
        return float(self.rho_mean[-1])


@dataclass(frozen=True)
class ConvergenceVerdict:
    delta_rho: float
    monotonicity: float
    final_rho: float
    convergent: bool
    flagged: bool = False


def delay_embed(series, spec):
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise CCMError("series must be one-dimensional")
    need = spec.span + 1
    if len(x) < need:
        raise CCMError(
            f"series of length {len(x)} too short for E={spec.E}, tau={spec.tau}: "
            f"minimum length is {need}")
    n = len(x) - spec.span
    origin = np.arange(spec.span, len(x))
    points = np.empty((n, spec.E))
    for j in range(spec.E):
        points[:, j] = x[origin - j * spec.tau]
    return ShadowManifold(points, origin)


@numba.njit(cache=True)
def _knn_kernel(points, origin, library, queries, k, theiler, out_idx, out_dist):
    # library must be ascending: a strict '<' on insertion then keeps the lower
    # index first among equal distances
    E = points.shape[1]
    for qi in range(queries.shape[0]):
        q = queries[qi]
        count = 0
        for li in range(library.shape[0]):
            p = library[li]
            if p == q or abs(origin[p] - origin[q]) <= theiler:
                continue
            s = 0.0
            for e in range(E):
                diff = points[p, e] - points[q, e]
                s += diff * diff
            d = math.sqrt(s)
            if count == k and not d < out_dist[qi, k - 1]:
                continue
            pos = count if count < k else k - 1
            while pos > 0 and d < out_dist[qi, pos - 1]:
                out_dist[qi, pos] = out_dist[qi, pos - 1]
                out_idx[qi, pos] = out_idx[qi, pos - 1]
                pos -= 1
            out_dist[qi, pos] = d
            out_idx[qi, pos] = p
            if count < k:
                count += 1
        if count < k:
            return qi
    return -1


@numba.njit(cache=True)
def _distance_order(points):
    n, E = points.shape
    dist = np.empty((n, n))
    order = np.empty((n, n), dtype=np.int32)
    for q in range(n):
        for p in range(n):
            s = 0.0
            for e in range(E):
                diff = points[p, e] - points[q, e]
                s += diff * diff
            dist[q, p] = math.sqrt(s)
        # stable sort: equal distances stay in index order
        order[q] = np.argsort(dist[q], kind="mergesort")
    return dist, order


@numba.njit(cache=True)
def _knn_sorted_kernel(dist, order, origin, in_library, queries, k, theiler, out_idx, out_dist):
    n = order.shape[1]
    for qi in range(queries.shape[0]):
        q = queries[qi]
        count = 0
        for r in range(n):
            p = order[q, r]
            if not in_library[p] or p == q or abs(origin[p] - origin[q]) <= theiler:
                continue
            out_idx[qi, count] = p
            out_dist[qi, count] = dist[q, p]
            count += 1
            if count == k:
                break
        if count < k:
            return qi
    return -1


class NeighborIndex:
    """All-pairs distances with each row pre-sorted.

    Library queries then only walk a row until k eligible members are found,
    which makes repeated subsampling of one manifold cheap.
    """

    def __init__(self, manifold):
        self.manifold = manifold
        self.dist, self.order = _distance_order(np.ascontiguousarray(manifold.points, dtype=float))

    def query(self, library, queries, k, theiler, out_idx, out_dist):
        mask = np.zeros(len(self.manifold), dtype=np.bool_)
        mask[library] = True
        return _knn_sorted_kernel(self.dist, self.order,
                                  np.asarray(self.manifold.origin, dtype=np.int64), mask,
                                  queries, k, int(theiler), out_idx, out_dist)


# manifolds above this many points fall back to the brute-force kernel
DENSE_INDEX_LIMIT = 4000


def library_neighbors(manifold, library, queries, k, theiler, index=None):
    """k nearest library points for each query; returns (indices, distances)."""
    library = np.unique(np.asarray(library, dtype=np.int64))
    queries = np.asarray(queries, dtype=np.int64)
    if k < 1:
        raise CCMError("k must be >= 1")
    out_idx = np.full((len(queries), k), -1, dtype=np.int64)
    out_dist = np.full((len(queries), k), np.inf)
    if index is not None:
        bad = index.query(library, queries, k, theiler, out_idx, out_dist)
    else:
        bad = _knn_kernel(np.ascontiguousarray(manifold.points, dtype=float),
                          np.asarray(manifold.origin, dtype=np.int64),
                          library, queries, k, int(theiler), out_idx, out_dist)
    if bad >= 0:
        raise CCMError(
            f"fewer than k={k} eligible neighbours for query {int(queries[bad])} "
            f"(library size {len(library)}, theiler {theiler})")
    return out_idx, out_dist


def find_neighbors(manifold, query, k, theiler=0):
    """k nearest neighbours of point ``query`` among all other points.

    Points within ``theiler`` time steps of the query are excluded; ties go to
    the lower point index.  Returns a list of ``(index, distance)``.
    """
    idx, dist = library_neighbors(manifold, np.arange(len(manifold)), [query], k, theiler)
    return [(int(i), float(d)) for i, d in zip(idx[0], dist[0])]


def simplex_weights(dist):
    """Exponential weights exp(-d/d_min) per row, normalised to sum to one.

    Rows whose nearest distance is zero put uniform weight on the exact matches.
    """
    dist = np.atleast_2d(np.asarray(dist, dtype=float))
    d1 = dist[:, :1]
    zero = d1[:, 0] == 0.0
    u = np.empty_like(dist)
    with np.errstate(divide="ignore", invalid="ignore"):
        u[~zero] = np.exp(-dist[~zero] / d1[~zero])
    u[zero] = (dist[zero] == 0.0).astype(float)
    return u / u.sum(axis=1, keepdims=True)


def cross_map_estimate(reader, source, library, query, E, theiler=0):
    """Estimate ``source`` at the query's time from its E+1 library neighbours."""
    library = [p for p in library if p != query]
    idx, dist = library_neighbors(reader, library, [query], E + 1, theiler)
    w = simplex_weights(dist)[0]
    src = np.asarray(source, dtype=float)
    return float(np.dot(w, src[reader.origin[idx[0]]]))


def _pearson(a, b):
    if np.ptp(a) == 0.0 or np.ptp(b) == 0.0:
        return math.nan
    r = np.corrcoef(a, b)[0, 1]
    return float(min(1.0, max(-1.0, r)))


def _subsample_seed(seed, L, s):
    return seeding.derive_seed(seed, L, s)


def _skill_samples(manifold, target, L, n_subsamples, seed, theiler, k, mode="random",
                   index=None):
    """Pearson skill for each library subsample of size L."""
    n = len(manifold)
    if L > n:
        raise CCMError(f"library size {L} exceeds available points {n}")
    if L < k:
        raise CCMError(f"library size {L} smaller than k={k}")
    queries = np.arange(n)
    if index is None and n <= DENSE_INDEX_LIMIT:
        index = NeighborIndex(manifold)
    if mode == "prefix" or L == n:
        n_subsamples = 1
    out = np.empty(n_subsamples)
    for s in range(n_subsamples):
        if mode == "prefix" or L == n:
            lib = np.arange(L)
        else:
            rng = np.random.default_rng(_subsample_seed(seed, L, s))
            lib = np.sort(rng.choice(n, size=L, replace=False))
        idx, dist = library_neighbors(manifold, lib, queries, k, theiler, index)
        est = (simplex_weights(dist) * target[idx]).sum(axis=1)
        out[s] = _pearson(est, target[queries])
    return out


def _prepare(reader_series, source_series, spec):
    reader = np.asarray(reader_series, dtype=float)
    source = np.asarray(source_series, dtype=float)
    if reader.shape != source.shape:
        raise CCMError("reader and source series must have equal length")
    if not (np.all(np.isfinite(reader)) and np.all(np.isfinite(source))):
        raise CCMError("series contain non-finite values")
    need = spec.span + spec.k + 1
    if len(reader) < need:
        raise CCMError(
            f"series of length {len(reader)} too short for CCM with E={spec.E}, "
            f"tau={spec.tau}: minimum length is {need}")
    manifold = delay_embed(reader, spec)
    return manifold, source[manifold.origin]


def _summary(samples):
    if np.any(np.isnan(samples)):
        return math.nan, math.nan
    sd = float(np.std(samples, ddof=1)) if len(samples) > 1 else 0.0
    return float(np.mean(samples)), sd


def ccm_skill(reader_series, source_series, spec, L, n_subsamples=20, seed=0, mode="random"):
    """Mean and SD of cross-map skill over random libraries of size L.

    A constant source (or constant estimates) yields ``(nan, nan)``.
    """
    manifold, target = _prepare(reader_series, source_series, spec)
    samples = _skill_samples(manifold, target, L, n_subsamples, seed, spec.theiler, spec.k, mode)
    return _summary(samples)


def default_library_sizes(n_points, count=10, smallest=50):
    top = n_points - 1
    lo = min(smallest, top)
    sizes = np.unique(np.round(np.geomspace(lo, top, count)).astype(int))
    return sizes


def ccm_curve(reader_series, source_series, spec, library_sizes=None, n_subsamples=20, seed=0,
              mode="random"):
    manifold, target = _prepare(reader_series, source_series, spec)
    if library_sizes is None:
        library_sizes = default_library_sizes(len(manifold))
    sizes = np.asarray(library_sizes, dtype=int)
    if np.any(np.diff(sizes) <= 0):
        raise CCMError("library sizes must be strictly ascending")
    index = NeighborIndex(manifold) if len(manifold) <= DENSE_INDEX_LIMIT else None
    means, sds = [], []
    for L in sizes:
        m, s = _summary(_skill_samples(manifold, target, int(L), n_subsamples, seed,
                                       spec.theiler, spec.k, mode, index))
        means.append(m)
        sds.append(s)
    means = np.array(means)
    return CcmCurve(sizes, means, np.array(sds), n_subsamples,
                    degenerate=bool(np.any(np.isnan(means))))


def mean_curve(curves, pointwise_sd=False):
    """Pointwise average of curves sharing library sizes.

    With ``pointwise_sd`` the SD is taken across the curves instead of
    averaging their own SDs.
    """
    sizes = curves[0].library_sizes
    for c in curves[1:]:
        if not np.array_equal(c.library_sizes, sizes):
            raise CCMError("curves have different library sizes")
    rho = np.array([c.rho_mean for c in curves])
    mean = rho.mean(axis=0)
    if pointwise_sd:
        sd = rho.std(axis=0, ddof=1) if len(curves) > 1 else np.zeros(len(sizes))
    else:
        sd = np.array([c.rho_sd for c in curves]).mean(axis=0)
    return CcmCurve(sizes, mean, sd, curves[0].n_subsamples,
                    degenerate=any(c.degenerate for c in curves) or bool(np.any(np.isnan(mean))))


def convergence_score(curve, thresholds=ConvergenceThresholds()):
    rho = np.asarray(curve.rho_mean, dtype=float)
    if len(rho) < 3:
        raise CCMError("convergence needs at least 3 library sizes")
    if np.any(np.isnan(rho)):
        return ConvergenceVerdict(math.nan, math.nan, math.nan, False, flagged=True)
    delta = float(rho[-1] - rho[0])
    if np.ptp(rho) == 0.0:
        mono = 0.0
    else:
        mono = float(stats.kendalltau(curve.library_sizes, rho).statistic)
    convergent = (delta > thresholds.min_delta_rho and mono > thresholds.min_monotonicity
                  and rho[-1] > thresholds.min_final_rho)
    return ConvergenceVerdict(delta, mono, float(rho[-1]), bool(convergent))


def agent_ccm(positions, reader_agent, source_agent, spec, library_sizes=None, n_subsamples=20,
              seed=0, mode="random"):
    """CCM between two agents' positions, averaged over the x and y channels.

    ``positions`` is a ``(steps, n_agents, 2)`` array or anything with a
    ``positions`` attribute of that shape.  The per-channel curves are kept in
    ``curve.channels``.
    """
    pos = getattr(positions, "positions", positions)
    pos = np.asarray(pos, dtype=float)
    channels = {}
    for c, name in enumerate("xy"):
        channels[name] = ccm_curve(pos[:, reader_agent, c], pos[:, source_agent, c], spec,
                                   library_sizes, n_subsamples, seeding.derive_seed(seed, c), mode)
    curve = mean_curve(list(channels.values()))
    curve.channels = channels
    return curve
