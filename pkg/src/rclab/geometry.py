"""Norms on R^d and the convex geometry attached to them.

A norm rho is described by a NormSpec.  The Wulff shape of rho is the convex
set W = {t : t.x <= rho(x) for all x}; a vector t on its boundary is dual to
a direction s when t.s = rho(s).  The surcharge of a dual vector t is
s_t(x) = rho(x) - t.x >= 0; it vanishes along the dual direction and its
directional limit g(y) = lim_n s_t(n*s - y) controls the anisotropic
prefactor sums downstream.

Supported families (d in {1,2,3}): L1, L2, Linf, weighted-Lp ("wlp") and
polyhedral norms given as the support function of a finite symmetric set of
extreme points ("poly").
"""

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.optimize import linprog

TOL_DUAL = 1e-9
G_LIMIT_NMAX = 2 ** 20

_FAMILIES = ("L1", "L2", "Linf", "wlp", "poly")


class GeometryError(ValueError):
    """Invalid norm specification or broken duality data."""


@dataclass(frozen=True)
class NormSpec:
    """Description of a norm on R^d.

    family: one of "L1", "L2", "Linf", "wlp" (weighted Lp, needs weights
    and p >= 1) or "poly" (support function of conv(generators); the
    generator set must be symmetric and span R^d, and is assumed to list
    the extreme points of the Wulff shape).
    """

    family: str
    d: int
    weights: tuple = None
    p: float = None
    generators: tuple = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise GeometryError(f"unsupported norm family {self.family!r}")
        if not (1 <= self.d <= 3):
            raise GeometryError("supported dimensions are 1, 2, 3")
        if self.family == "wlp":
            if self.weights is None or self.p is None:
                raise GeometryError("wlp needs weights and p")
            if len(self.weights) != self.d:
                raise GeometryError("need one weight per axis")
            if min(self.weights) <= 0 or self.p < 1:
                raise GeometryError("weights must be positive and p >= 1")
        if self.family == "poly":
            if not self.generators:
                raise GeometryError("poly needs generators")
            G = np.asarray(self.generators, dtype=float)
            if G.ndim != 2 or G.shape[1] != self.d:
                raise GeometryError("generators must be points in R^d")
            # symmetry: every generator's reflection must be present
            for g in G:
                if not np.any(np.all(np.abs(G + g) < 1e-12, axis=1)):
                    raise GeometryError("generator set must be symmetric")
            if _poly_linf_lower_bound(G) <= 0:
                raise GeometryError("generators do not span a norm (0 not interior)")


def l1(d):
    return NormSpec("L1", d)


def l2(d):
    return NormSpec("L2", d)


def linf(d):
    return NormSpec("Linf", d)


def weighted_lp(weights, p):
    return NormSpec("wlp", len(weights), weights=tuple(float(w) for w in weights), p=float(p))


def polyhedral(generators):
    gens = tuple(tuple(float(c) for c in g) for g in generators)
    return NormSpec("poly", len(gens[0]), generators=gens)


def _gen_array(spec):
    return np.asarray(spec.generators, dtype=float)


def norm_eval_many(spec, X):
    """Evaluate rho on the rows of X (shape (n, d) or (d,))."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != spec.d:
        raise GeometryError(f"dimension mismatch: expected {spec.d}, got {X.shape[1]}")
    if spec.family == "L1":
        return np.abs(X).sum(axis=1)
    if spec.family == "L2":
        return np.sqrt((X * X).sum(axis=1))
    if spec.family == "Linf":
        return np.abs(X).max(axis=1)
    if spec.family == "wlp":
        w = np.asarray(spec.weights)
        return ((w * np.abs(X) ** spec.p).sum(axis=1)) ** (1.0 / spec.p)
    return (X @ _gen_array(spec).T).max(axis=1)


def norm_eval(spec, x):
    """rho(x); exact closed forms, support maximization for "poly"."""
    return float(norm_eval_many(spec, x)[0])


def _poly_linf_lower_bound(G):
    # min over the Linf unit sphere of max_g g.u, as an LP per cube face
    d = G.shape[1]
    if d == 1:
        return float(np.abs(G).max())
    best = np.inf
    for j in range(d):
        for sgn in (1.0, -1.0):
            free = [i for i in range(d) if i != j]
            # variables: u_free (in [-1,1]) and t; minimize t with t >= g.u
            c = np.zeros(len(free) + 1)
            c[-1] = 1.0
            A = np.column_stack([G[:, free], -np.ones(len(G))])
            b = -sgn * G[:, j]
            bounds = [(-1.0, 1.0)] * len(free) + [(None, None)]
            res = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
            if not res.success:
                raise GeometryError("LP for polyhedral norm bounds failed")
            best = min(best, res.fun)
    return float(best)


def linf_equivalence_bounds(spec):
    """(c_low, c_high) with c_low*|x|_inf <= rho(x) <= c_high*|x|_inf."""
    d = spec.d
    if spec.family == "L1":
        return 1.0, float(d)
    if spec.family == "L2":
        return 1.0, float(np.sqrt(d))
    if spec.family == "Linf":
        return 1.0, 1.0
    if spec.family == "wlp":
        w = np.asarray(spec.weights)
        return float(w.min() ** (1.0 / spec.p)), float(w.sum() ** (1.0 / spec.p))
    G = _gen_array(spec)
    corners = np.array(list(product((-1.0, 1.0), repeat=d)))
    c_high = float((corners @ G.T).max(axis=1).max())
    c_low = _poly_linf_lower_bound(G)
    return c_low, c_high


@dataclass(frozen=True)
class DualVector:
    """A vector t on the Wulff boundary with t.s = rho(s).

    unique is False when s sits against a flat face of the Wulff shape, in
    which case the whole face is dual; facial_extent then describes the face
    whose extreme points dual_vectors() returns.
    """

    t: tuple
    s: tuple
    unique: bool
    facial_extent: str = None

    def t_arr(self):
        return np.asarray(self.t, dtype=float)


def _mk_duals(spec, s, extremes, extent_desc):
    s = tuple(float(c) for c in np.asarray(s, dtype=float))
    unique = len(extremes) == 1
    extent = None if unique else extent_desc
    out = []
    for t in extremes:
        t = tuple(float(c) for c in t)
        dv = DualVector(t=t, s=s, unique=unique, facial_extent=extent)
        _check_dual(spec, dv)
        out.append(dv)
    return out


def _check_dual(spec, dv):
    rho_s = norm_eval(spec, dv.s)
    gap = abs(float(np.dot(dv.t, dv.s)) - rho_s)
    if gap > TOL_DUAL * max(1.0, rho_s):
        raise GeometryError(f"t.s = rho(s) violated by {gap:.3e}")


def dual_vectors(spec, s):
    """Extreme points of the dual face of rho at direction s.

    Returns a single DualVector when the unit ball has a unique supporting
    hyperplane at s/rho(s); otherwise one DualVector per extreme point of
    the face, all flagged unique=False.
    """
    s = np.asarray(s, dtype=float)
    if s.shape != (spec.d,):
        raise GeometryError("s has wrong dimension")
    if not np.any(s != 0):
        raise GeometryError("s must be nonzero")
    rho_s = norm_eval(spec, s)

    if spec.family == "L2":
        t = s / np.sqrt(s @ s)
        return _mk_duals(spec, s, [t], None)

    if spec.family in ("L1", "wlp"):
        if spec.family == "L1":
            w = np.ones(spec.d)
            p = 1.0
        else:
            w = np.asarray(spec.weights)
            p = spec.p
        if p > 1.0:
            t = rho_s ** (1.0 - p) * w * np.abs(s) ** (p - 1.0) * np.sign(s)
            return _mk_duals(spec, s, [t], None)
        # p = 1: coordinates at zero are free in [-w_i, w_i]
        zero = np.abs(s) <= TOL_DUAL * np.abs(s).max()
        base = w * np.sign(s)
        if not zero.any():
            return _mk_duals(spec, s, [base], None)
        extremes = []
        idx = np.flatnonzero(zero)
        for signs in product((-1.0, 1.0), repeat=len(idx)):
            t = base.copy()
            t[idx] = np.asarray(signs) * w[idx]
            extremes.append(t)
        desc = "box face: t_i in [-w_i, w_i] for i in " + str(list(map(int, idx)))
        return _mk_duals(spec, s, extremes, desc)

    if spec.family == "Linf":
        m = np.abs(s).max()
        active = np.flatnonzero(np.abs(s) >= m * (1 - TOL_DUAL))
        extremes = []
        for i in active:
            t = np.zeros(spec.d)
            t[i] = np.sign(s[i])
            extremes.append(t)
        desc = "simplex face on coordinates " + str(list(map(int, active)))
        return _mk_duals(spec, s, extremes, desc)

    # polyhedral: active generators support the face
    G = _gen_array(spec)
    vals = G @ s
    active = np.flatnonzero(vals >= rho_s - TOL_DUAL * max(1.0, rho_s))
    desc = f"face spanned by {len(active)} generators"
    return _mk_duals(spec, s, [G[i] for i in active], desc)


def sample_dual_face(spec, s, n_samples):
    """Deterministic finite sample of the dual face at s (always includes
    the extreme points).  Stands in for the existential quantifier over the
    face in the saturation criterion."""
    duals = dual_vectors(spec, s)
    if len(duals) == 1 or n_samples <= len(duals):
        return duals
    ex = np.array([d.t for d in duals])
    pts = [t for t in ex]
    if len(ex) == 2:
        lams = np.linspace(0.0, 1.0, n_samples)[1:-1]
        pts.extend(ex[0] * (1 - lam) + ex[1] * lam for lam in lams)
    else:
        centroid = ex.mean(axis=0)
        pts.append(centroid)
        k = 0
        while len(pts) < n_samples:
            a, b = ex[k % len(ex)], centroid
            pts.append(0.5 * (a + b))
            k += 1
    out = []
    for t in pts[:n_samples]:
        dv = DualVector(
            t=tuple(float(c) for c in t),
            s=duals[0].s,
            unique=False,
            facial_extent=duals[0].facial_extent,
        )
        _check_dual(spec, dv)
        out.append(dv)
    return out


def surcharge(spec, t, x):
    """s_t(x) = rho(x) - t.x, always >= 0 for t in the Wulff shape."""
    t_arr = t.t_arr() if isinstance(t, DualVector) else np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    val = norm_eval(spec, x) - float(t_arr @ x)
    if val < -TOL_DUAL * max(1.0, norm_eval(spec, x)):
        raise GeometryError(f"negative surcharge {val:.3e}: t outside the Wulff shape")
    return max(val, 0.0)


def surcharge_many(spec, t, X):
    t_arr = t.t_arr() if isinstance(t, DualVector) else np.asarray(t, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    val = norm_eval_many(spec, X) - X @ t_arr
    bad = val < -TOL_DUAL * np.maximum(1.0, norm_eval_many(spec, X))
    if bad.any():
        raise GeometryError("negative surcharge: t outside the Wulff shape")
    return np.maximum(val, 0.0)


def g_limit(spec, t, s, y, n_max=G_LIMIT_NMAX, tol=1e-4):
    """Directional surcharge limit g(y) = lim_n s_t(n*s - y).

    Evaluates on the doubling schedule n = 1, 2, 4, ..., n_max and returns
    (last value, converged flag).  The sequence must be non-increasing;
    a violation means t is not dual to s or the norm is broken.
    """
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    prev = None
    n = 1
    converged = False
    val = surcharge(spec, t, 1 * s - y)
    while n <= n_max:
        val = surcharge(spec, t, n * s - y)
        if prev is not None:
            if val > prev + 1e-12 * max(1.0, prev):
                raise GeometryError(
                    f"surcharge sequence increased at n={n}: {prev!r} -> {val!r}"
                )
            if abs(prev - val) < tol:
                converged = True
                break
        prev = val
        n *= 2
    return val, converged
