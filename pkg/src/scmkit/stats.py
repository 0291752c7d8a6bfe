"""Statistical kernels shared by the ensemble analyzers.

Everything here is a pure function of its inputs.  The only external
machinery used are the special functions from scipy (inverse chi-squared
CDF, regularized incomplete beta, normal quantile); the statistics
themselves are computed directly.
"""

from dataclasses import dataclass
from functools import lru_cache
import warnings

import numpy as np
from scipy import special


class StatsError(ValueError):
    """Raised on invalid input to a statistical kernel."""


@dataclass(frozen=True)
class GofResult:
    """Pearson goodness-of-fit outcome at a fixed significance level."""

    statistic: float
    dof: int
    critical_value: float
    passed: bool


@dataclass(frozen=True)
class MoransResult:
    """Moran's I with its randomization-null expectation and z-score."""

    i: float
    expected: float
    z: float
    passed: bool


def chi2_critical(dof, alpha):
    """Upper-tail chi-squared critical value (inverse regularized gamma)."""
    if dof < 1:
        raise StatsError("dof must be >= 1")
    if not 0.0 < alpha < 1.0:
        raise StatsError("alpha must be in (0, 1)")
    return float(special.chdtri(dof, alpha))


def chi2_gof(observed, expected, alpha=0.05):
    """Pearson chi-squared goodness of fit of observed vs expected counts.

    Categories are positional; dof = k - 1.  Passes when the statistic is
    at or below the (1 - alpha) critical value.
    """
    obs = np.asarray(observed, dtype=float)
    exp = np.asarray(expected, dtype=float)
    if obs.shape != exp.shape or obs.ndim != 1:
        raise StatsError("observed and expected must be 1-D with matching categories")
    if obs.size < 2:
        raise StatsError("need at least 2 categories")
    if np.any(exp <= 0):
        raise StatsError("expected counts must be positive")
    stat = float(np.sum((obs - exp) ** 2 / exp))
    dof = obs.size - 1
    crit = chi2_critical(dof, alpha)
    return GofResult(stat, dof, crit, stat <= crit)


def _average_ranks(values):
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=float)
    sorted_v = v[order]
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and sorted_v[j + 1] == sorted_v[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman_rho(x, y):
    """Spearman rank correlation with average ranks for ties.

    Returns nan when either input is constant (rank correlation is
    undefined there and callers must treat such cases as suspect rather
    than as agreement).
    """
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise StatsError("inputs must be 1-D of equal length")
    if xa.size < 2:
        raise StatsError("need at least 2 observations")
    if np.all(xa == xa[0]) or np.all(ya == ya[0]):
        return float("nan")
    rx = _average_ranks(xa)
    ry = _average_ranks(ya)
    rx -= rx.mean()
    ry -= ry.mean()
    return float(np.dot(rx, ry) / np.sqrt(np.dot(rx, rx) * np.dot(ry, ry)))


def ks_two_sample(a, b):
    """Two-sample Kolmogorov-Smirnov statistic: sup |ECDF_a - ECDF_b|."""
    aa = np.sort(np.asarray(a, dtype=float))
    bb = np.sort(np.asarray(b, dtype=float))
    if aa.size == 0 or bb.size == 0:
        raise StatsError("samples must be nonempty")
    grid = np.concatenate([aa, bb])
    cdf_a = np.searchsorted(aa, grid, side="right") / aa.size
    cdf_b = np.searchsorted(bb, grid, side="right") / bb.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


@lru_cache(maxsize=32)
def _grid_pairs(height, width, scheme):
    idx = np.arange(height * width).reshape(height, width)
    pairs_a = [idx[:, :-1].ravel(), idx[:-1, :].ravel()]
    pairs_b = [idx[:, 1:].ravel(), idx[1:, :].ravel()]
    if scheme == "queen":
        pairs_a += [idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()]
        pairs_b += [idx[1:, 1:].ravel(), idx[1:, :-1].ravel()]
    elif scheme != "rook":
        raise StatsError(f"unknown adjacency scheme: {scheme!r}")
    a = np.concatenate(pairs_a)
    b = np.concatenate(pairs_b)
    n = height * width
    deg = np.zeros(n)
    np.add.at(deg, a, 1.0)
    np.add.at(deg, b, 1.0)
    w_total = 2.0 * a.size          # symmetric binary weights, both orders
    s1 = 2.0 * w_total
    s2 = float(np.sum((2.0 * deg) ** 2))
    a.setflags(write=False)
    b.setflags(write=False)
    return a, b, w_total, s1, s2


def morans_i(field, scheme="rook", alpha=0.05):
    """Global Moran's I on a 2-D grid with binary contiguity weights.

    The z-score uses the randomization-null expectation -1/(n-1) and
    variance, and the test is two-sided at level alpha.
    """
    f = np.asarray(field, dtype=float)
    if f.ndim != 2 or f.size < 2:
        raise StatsError("field must be 2-D with at least 2 sites")
    n = f.size
    z = f.ravel() - f.mean()
    m2 = float(np.dot(z, z))
    if m2 == 0.0:
        raise StatsError("constant field: Moran's I undefined")
    a, b, w, s1, s2 = _grid_pairs(f.shape[0], f.shape[1], scheme)
    cross = 2.0 * float(np.dot(z[a], z[b]))
    i_stat = (n / w) * cross / m2
    expected = -1.0 / (n - 1)
    b2 = n * float(np.sum(z**4)) / m2**2
    num = n * ((n * n - 3 * n + 3) * s1 - n * s2 + 3 * w * w) - b2 * (
        (n * n - n) * s1 - 2 * n * s2 + 6 * w * w
    )
    den = (n - 1) * (n - 2) * (n - 3) * w * w
    variance = num / den - expected**2
    zscore = (i_stat - expected) / np.sqrt(variance)
    bound = float(special.ndtri(1.0 - alpha / 2.0))
    return MoransResult(float(i_stat), expected, float(zscore), bool(abs(zscore) <= bound))


def _gamma_mt(gen, shape, size):
    """Marsaglia-Tsang gamma variates driven by `gen`."""
    a = float(shape)
    boost = None
    if a < 1.0:
        boost = gen.random(size) ** (1.0 / a)
        a = a + 1.0
    d = a - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty(size, dtype=float)
    todo = np.arange(size)
    while todo.size:
        x = gen.standard_normal(todo.size)
        u = gen.random(todo.size)
        v = (1.0 + c * x) ** 3
        with np.errstate(divide="ignore", invalid="ignore"):
            ok = (v > 0) & (np.log(u) < 0.5 * x * x + d * (1.0 - v + np.log(np.where(v > 0, v, 1.0))))
        out[todo[ok]] = d * v[ok]
        todo = todo[~ok]
    if boost is not None:
        out *= boost
    return out


def beta_variate(rng, alpha, beta, size=None):
    """Beta(alpha, beta) draws via the two-gamma construction.

    `rng` is an RngStream (or anything exposing a numpy Generator as
    `.gen`); the same stream state always yields the same draws.
    """
    if alpha <= 0 or beta <= 0:
        raise StatsError("beta shape parameters must be positive")
    gen = getattr(rng, "gen", rng)
    n = 1 if size is None else int(size)
    g1 = _gamma_mt(gen, alpha, n)
    g2 = _gamma_mt(gen, beta, n)
    out = g1 / (g1 + g2)
    return float(out[0]) if size is None else out


@dataclass(frozen=True)
class PcaModel:
    """Standardizing PCA: z-score then project onto top components."""

    mean: np.ndarray          # (d,)
    scale: np.ndarray         # (d,) std of kept columns, 1.0 for dropped
    kept: np.ndarray          # indices of non-degenerate columns
    components: np.ndarray    # (k, d_kept), orthonormal rows
    explained_variance: np.ndarray  # (k,), non-increasing

    @property
    def n_features(self):
        return self.mean.size

    @property
    def n_components(self):
        return self.components.shape[0]


def pca_fit(data, k):
    """Fit a PCA on z-scored columns; zero-variance columns are dropped."""
    x = np.asarray(data, dtype=float)
    if x.ndim != 2:
        raise StatsError("data must be 2-D (n samples x d features)")
    n, d = x.shape
    if k < 1 or k > d:
        raise StatsError("k must be in 1..d")
    if n <= k:
        raise StatsError("need more samples than components")
    mean = x.mean(axis=0)
    std = x.std(axis=0, ddof=1)
    kept = np.flatnonzero(std > 0)
    if kept.size < d:
        warnings.warn(f"dropping {d - kept.size} zero-variance feature column(s)", stacklevel=2)
    if k > kept.size:
        raise StatsError("k exceeds the number of non-degenerate features")
    scale = np.ones(d)
    scale[kept] = std[kept]
    zs = (x[:, kept] - mean[kept]) / scale[kept]
    cov = zs.T @ zs / (n - 1)
    eigval, eigvec = np.linalg.eigh(cov)
    order = np.argsort(eigval)[::-1][:k]
    comps = eigvec[:, order].T
    # canonical sign: largest-magnitude loading is positive
    flip = np.sign(comps[np.arange(k), np.argmax(np.abs(comps), axis=1)])
    comps = comps * flip[:, None]
    ev = np.clip(eigval[order], 0.0, None)
    return PcaModel(mean, scale, kept, comps, ev)


def pca_project(model, x):
    """Project vectors (1-D or 2-D, original feature length) onto the PCs."""
    v = np.asarray(x, dtype=float)
    single = v.ndim == 1
    if single:
        v = v[None, :]
    if v.ndim != 2 or v.shape[1] != model.n_features:
        raise StatsError("vector length does not match the fitted feature count")
    zs = (v[:, model.kept] - model.mean[model.kept]) / model.scale[model.kept]
    proj = zs @ model.components.T
    return proj[0] if single else proj


def cosine_similarity(a, b):
    """Cosine of the angle between two nonzero vectors."""
    va = np.asarray(a, dtype=float)
    vb = np.asarray(b, dtype=float)
    if va.shape != vb.shape or va.ndim != 1:
        raise StatsError("vectors must be 1-D of equal length")
    na = np.linalg.norm(va)
    nb = np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        raise StatsError("cosine similarity undefined for zero vectors")
    return float(np.dot(va, vb) / (na * nb))


def _sq_dists(a, b):
    return np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2)


def _coverage_density_core(real, fake, k):
    d_rr = _sq_dists(real, real)
    np.fill_diagonal(d_rr, np.inf)
    radii = np.partition(d_rr, k - 1, axis=1)[:, k - 1]
    d_rf = _sq_dists(real, fake)
    inside = d_rf < radii[:, None]
    coverage = float(np.mean(inside.any(axis=1)))
    density = float(inside.sum() / (k * fake.shape[0]))
    return coverage, density


def coverage_density(real, fake, k_neighbors=5):
    """k-NN manifold coverage and density of `fake` with respect to `real`.

    A real point's ball reaches to its k-th nearest real neighbor; coverage
    is the fraction of balls holding at least one fake point, density the
    mean ball membership per fake point normalized by k.
    """
    r = np.asarray(real, dtype=float)
    f = np.asarray(fake, dtype=float)
    if r.ndim == 1:
        r = r[:, None]
    if f.ndim == 1:
        f = f[:, None]
    if r.ndim != 2 or f.ndim != 2 or r.shape[1] != f.shape[1]:
        raise StatsError("point sets must be 2-D with matching dimension")
    k = int(k_neighbors)
    if k < 1:
        raise StatsError("k_neighbors must be >= 1")
    if r.shape[0] <= k or f.shape[0] <= k:
        raise StatsError("need more than k_neighbors points in each set")
    return _coverage_density_core(r, f, k)
