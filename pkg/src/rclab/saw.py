"""Self-avoiding walks under the coupling weights.

A walk gamma carries weight prod_i lambda * J(gamma_i - gamma_{i-1}); the
two-point function sums the weights of all self-avoiding walks between two
points, and is lower-bounded here by exhaustive enumeration up to a length
and step-radius budget.

The cone construction drives the divergence certificate: given a dual
vector t, the step set Y_R = {x : rho(x) - t.x <= delta*|x|, |x| <= R} lies
strictly inside a half space, so concatenations of cone steps never
self-intersect and the cone-restricted generating function at tilt
(1-eps)*t is bounded below by the geometric series in lambda * J_R((1-eps)t).
Once lambda * J_R((1-eps)t) >= 1 the series diverges, which certifies that
the walk saturation point vanishes when J(t) is infinite on the dual face.
"""

import math
from dataclasses import dataclass

import numpy as np

from .geometry import norm_eval_many, surcharge_many
from .rc_exact import BudgetExceeded

STEP_RADIUS_DEFAULT = {1: 64, 2: 16, 3: 6}
ENUM_BUDGET = 10 ** 7


class SelfIntersection(ValueError):
    pass


@dataclass(frozen=True)
class Walk:
    vertices: tuple

    def __post_init__(self):
        if len(set(self.vertices)) != len(self.vertices):
            raise SelfIntersection("walk revisits a vertex")

    @property
    def length(self):
        return len(self.vertices) - 1


def walk_weight(coupling, lam, gamma):
    """prod lambda * J(step) over the steps of gamma (1.0 for |gamma| = 0)."""
    if isinstance(gamma, Walk):
        verts = gamma.vertices
    else:
        verts = tuple(tuple(v) for v in gamma)
        Walk(vertices=verts)  # validates self-avoidance
    if len(verts) <= 1:
        return 1.0
    steps = np.diff(np.asarray(verts, dtype=float), axis=0)
    j = coupling.coupling_eval_many(steps)
    return float(np.prod(lam * j))


def _step_set(coupling, r_step):
    d = coupling.norm.d
    box = int(r_step)
    from itertools import product

    pts = [p for p in product(range(-box, box + 1), repeat=d) if any(p)]
    arr = np.asarray(pts, dtype=float)
    rho = norm_eval_many(coupling.norm, arr)
    keep = rho <= r_step
    return [tuple(map(int, p)) for p, k in zip(pts, keep) if k]


def saw_two_point(coupling, lam, x, max_length, r_step=None, budget=ENUM_BUDGET):
    """Lower-bound partial sum of the walk two-point function 0 -> x.

    Enumerates every self-avoiding walk of length <= max_length with steps
    of rho-length <= r_step; monotone non-decreasing in max_length, r_step
    and lambda.  Raises BudgetExceeded past `budget` enumerated prefixes.
    """
    if lam == 0.0:
        return 1.0 if not any(x) else 0.0
    d = coupling.norm.d
    r_step = r_step if r_step is not None else STEP_RADIUS_DEFAULT[d]
    steps = _step_set(coupling, r_step)
    jval = {s: float(coupling.coupling_eval_many([s])[0]) for s in steps}
    target = tuple(int(c) for c in x)
    origin = (0,) * d
    total = 0.0
    visited = {origin}
    nodes = 0

    def dfs(v, weight, depth):
        nonlocal total, nodes
        if v == target:
            total += weight
        if depth == max_length:
            return
        for s in steps:
            w = tuple(v[i] + s[i] for i in range(d))
            if w in visited:
                continue
            nodes += 1
            if nodes > budget:
                raise BudgetExceeded(f"SAW enumeration exceeded {budget} nodes")
            visited.add(w)
            dfs(w, weight * lam * jval[s], depth + 1)
            visited.remove(w)

    if target == origin:
        total += 1.0  # the empty walk
    dfs(origin, 1.0, 0)
    return total


# ---------------------------------------------------------------------------
# cone construction


@dataclass(frozen=True)
class ConeSpec:
    t: tuple
    delta: float
    r: float
    steps: tuple       # lattice points of Y_R
    witness: tuple     # unit u with x.u > 0 for every step
    min_projection: float


def build_cone(coupling, t, r, delta_grid=None):
    """Pick the smallest dyadic delta whose cone Y_R is usable.

    Y_R must be nonempty (off the s-axis in d >= 2) and admit a half-space
    witness; candidate witnesses are t itself plus a deterministic sample of
    unit directions, keeping the one maximizing the worst step projection.
    """
    t_arr = t.t_arr() if hasattr(t, "t_arr") else np.asarray(t, dtype=float)
    d = coupling.norm.d
    if delta_grid is None:
        delta_grid = [2.0 ** -k for k in range(21)]
    box = int(math.ceil(r))
    from itertools import product

    pts = np.asarray(
        [p for p in product(range(-box, box + 1), repeat=d) if any(p)], dtype=float
    )
    pts = pts[np.sqrt((pts * pts).sum(axis=1)) <= r]
    surch = surcharge_many(coupling.norm, t_arr, pts)
    enorm = np.sqrt((pts * pts).sum(axis=1))
    for delta in sorted(delta_grid):
        keep = surch <= delta * enorm
        steps = pts[keep]
        if len(steps) == 0:
            continue
        if d >= 2:
            # need a step off the axis spanned by the zero-surcharge ray
            ref = steps[np.argmax(enorm[keep])]
            cross = np.abs(np.cross(steps, ref)) if d == 2 else np.linalg.norm(
                np.cross(steps, ref), axis=1
            )
            if not (cross > 1e-9).any():
                continue
        u, proj = _witness(steps, t_arr)
        if proj > 0:
            return ConeSpec(
                t=tuple(float(c) for c in t_arr),
                delta=float(delta),
                r=float(r),
                steps=tuple(tuple(int(c) for c in p) for p in steps),
                witness=tuple(float(c) for c in u),
                min_projection=float(proj),
            )
    raise ValueError("no dyadic delta yields a usable cone")


def _witness(steps, t_arr):
    cands = [t_arr]
    cands.append(steps.sum(axis=0))
    d = len(t_arr)
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        cands.extend([t_arr + 0.5 * e, t_arr - 0.5 * e])
    best_u, best = None, -np.inf
    norms = np.sqrt((steps * steps).sum(axis=1))
    for c in cands:
        nc = np.linalg.norm(c)
        if nc == 0:
            continue
        u = c / nc
        proj = float((steps @ u / norms).min())
        if proj > best:
            best, best_u = proj, u
    return best_u, best * float(norms.min())


def concatenate_steps(cone, step_indices):
    """Walk from concatenating cone steps; the half-space witness makes it
    self-avoiding, which Walk() asserts."""
    verts = [np.zeros(len(cone.t), dtype=int)]
    for i in step_indices:
        verts.append(verts[-1] + np.asarray(cone.steps[i], dtype=int))
    return Walk(vertices=tuple(tuple(int(c) for c in v) for v in verts))


@dataclass(frozen=True)
class ConeSeriesResult:
    j_r: float                  # J_R((1-eps) t)
    lam_j: float                # lambda * J_R((1-eps) t)
    certificate: bool           # lam_j >= 1: geometric series diverges
    partial_sums: tuple         # cone-walk generating series, by max length
    thresholds_crossed: tuple


def cone_j(cone, coupling, eps):
    """J_R((1-eps)t) = sum over cone steps of J_x exp((1-eps) t.x),
    evaluated in surcharge form psi*exp(-s_t(x) - eps*t.x)/Z for stability."""
    if not coupling.prefactor.envelope:
        raise ValueError("cone series needs exponentially-decaying couplings")
    steps = np.asarray(cone.steps, dtype=float)
    rho = norm_eval_many(coupling.norm, steps)
    psi = coupling.prefactor.psi_of_rho(rho)
    t_arr = np.asarray(cone.t)
    surch = np.maximum(rho - steps @ t_arr, 0.0)
    return float(np.sum(psi * np.exp(-surch - eps * (steps @ t_arr))) / coupling.z)


def cone_series(cone, coupling, lam, eps, thresholds=None, n_max=400):
    """Divergence certificate for the cone-restricted walk series.

    Cone concatenations are self-avoiding, so the tilted walk generating
    function restricted to cone walks equals sum_n (lambda*J_R((1-eps)t))^n;
    its partial sums are accumulated until they exceed the doubling
    threshold sequence (certificate: lambda*J_R >= 1, sums grow without
    bound)."""
    if thresholds is None:
        thresholds = [10.0 * 2 ** k for k in range(18)]
    j_r = cone_j(cone, coupling, eps)
    lam_j = lam * j_r
    partial = []
    total = 0.0
    term = 1.0
    crossed = []
    for n in range(1, n_max + 1):
        term *= lam_j
        total += term
        partial.append(total)
        while crossed != thresholds and len(crossed) < len(thresholds) and total >= thresholds[len(crossed)]:
            crossed.append(thresholds[len(crossed)])
        if len(crossed) == len(thresholds):
            break
    return ConeSeriesResult(
        j_r=j_r,
        lam_j=lam_j,
        certificate=lam_j >= 1.0,
        partial_sums=tuple(partial),
        thresholds_crossed=tuple(crossed),
    )


# ---------------------------------------------------------------------------
# walk / random-cluster consistency exhibit


def saw_rc_bridge_doc(coupling, beta, lam, q=2.0, n_vertices=5, max_length=4):
    """Exhibit: on a small interval, the walk partial sum with a small
    lambda sits below the exact random-cluster two-point value.

    The mapping lambda(beta) is not pinned down here, so (beta, lambda) are
    independent inputs; this is a consistency exhibit, not a theorem check."""
    from .rc_exact import RCParams, exact_probability, interval_region

    region = interval_region(coupling, n_vertices, cutoff=float(n_vertices))
    x = (n_vertices - 1,)
    rc = exact_probability(region, RCParams(q=q, beta=beta),
                           ("connected", (0,) * coupling.norm.d, x))
    saw = saw_two_point(coupling, lam, x, max_length, r_step=n_vertices)
    return {
        "beta": beta,
        "lambda": lam,
        "q": q,
        "x": x,
        "rc_two_point": rc,
        "saw_partial_sum": saw,
        "saw_below_rc": saw <= rc,
    }
