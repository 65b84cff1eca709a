"""Exact evaluation of the random-cluster measure on small regions.

The measure on a finite edge set assigns the configuration omega the weight
prod_e (exp(beta*J_e)-1)^omega_e * q^kappa(omega), where kappa counts the
connected components meeting the region.  For the wired boundary all
vertices that interact with the complement (within the edge cutoff) are
identified before counting, so boundary-touching clusters merge into one;
for the free boundary isolated vertices count as singleton components.

Everything here enumerates all 2^|E| configurations (budget |E| <= 26) and
serves as the brute-force oracle for the Monte Carlo estimators.
"""

import math
from dataclasses import dataclass
from itertools import product

import numpy as np
from numba import njit
from scipy.special import logsumexp

from .geometry import linf_equivalence_bounds, norm_eval, norm_eval_many

MAX_EDGES = 26
MAX_LABEL_EDGES = 22  # full component labels kept below this size
EPS_TAIL = 1e-6  # per-vertex omitted coupling mass under the edge cutoff
FREE = "free"
WIRED = "wired"


class BudgetExceeded(RuntimeError):
    """Enumeration budget 2^|E| exceeded."""


@dataclass(frozen=True)
class RCParams:
    q: float
    beta: float
    boundary: str = FREE

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("q >= 1 required")
        if self.beta < 0:
            raise ValueError("beta >= 0 required")
        if self.boundary not in (FREE, WIRED):
            raise ValueError("boundary must be 'free' or 'wired'")


@dataclass(frozen=True)
class Region:
    """Finite vertex set with the couplings restricted to it.

    Edges keep every pair with rho(u-v) <= cutoff; the omitted within-region
    mass is recorded.  wired_vertices lists the vertices coupled to the
    complement within the cutoff (identified under the wired boundary).
    """

    coupling: object
    points: tuple
    edges: tuple  # (i, j) index pairs with i < j
    j_values: tuple
    wired_vertices: frozenset
    cutoff: float
    omitted_mass: float

    @property
    def n_vertices(self):
        return len(self.points)

    @property
    def n_edges(self):
        return len(self.edges)

    def index(self, point):
        return self.points.index(tuple(point))

    def edge_lengths(self):
        norm = self.coupling.norm
        diffs = [np.subtract(self.points[j], self.points[i]) for i, j in self.edges]
        return norm_eval_many(norm, np.array(diffs))


def rho_tail_mass(coupling, r):
    """sum over rho(x) > r of J_x (normalized units)."""
    from .couplings import _shell_sums

    _, series, _ = _shell_sums(coupling.norm, coupling.prefactor, coupling.trunc_radius)
    m = int(math.floor(r))
    inside = series[:m].sum() / coupling.z
    return float(1.0 - inside)


def default_cutoff(coupling, eps_tail=EPS_TAIL, cap=None):
    """Smallest integer radius whose per-vertex omitted mass is <= eps_tail,
    capped (heavy-tailed couplings keep every pair within the cap)."""
    r = 1
    while rho_tail_mass(coupling, r) > eps_tail:
        if cap is not None and r >= cap:
            return float(cap)
        r = min(2 * r, cap) if cap is not None else 2 * r
        if r > coupling.trunc_radius:
            raise ValueError("cutoff exceeds coupling truncation radius")
    while r > 1 and rho_tail_mass(coupling, r - 1) <= eps_tail:
        r -= 1
    return float(r)


def build_region(coupling, points, cutoff=None, boundary_pad=None):
    """Region over the given lattice points with all couplings of
    rho-length <= cutoff; deduplicated, no self-loops.  The default cutoff
    meets the per-vertex EPS_TAIL contract, capped at the region diameter."""
    if cutoff is None:
        arr0 = np.asarray(points, dtype=float)
        diam = math.ceil(
            float(norm_eval_many(coupling.norm, arr0.max(axis=0) - arr0.min(axis=0))[0])
        )
        cutoff = default_cutoff(coupling, cap=max(diam, 1))
    cutoff = float(cutoff)
    pts = tuple(tuple(int(c) for c in p) for p in points)
    if len(set(pts)) != len(pts):
        raise ValueError("duplicate points in region")
    arr = np.asarray(pts, dtype=float)
    norm = coupling.norm
    edges, jvals, omitted = [], [], 0.0
    for i in range(len(pts)):
        d = norm_eval_many(norm, arr[i + 1 :] - arr[i])
        jrow = coupling.j_of_rho(np.where(d > 0, d, 1.0))
        for k, dist in enumerate(d):
            j = i + 1 + k
            if dist <= 0:
                continue
            if dist <= cutoff:
                edges.append((i, j))
                jvals.append(float(jrow[k]))
            else:
                omitted += float(jrow[k])
    wired = _wired_vertices(coupling, pts, cutoff)
    return Region(
        coupling=coupling,
        points=pts,
        edges=tuple(edges),
        j_values=tuple(jvals),
        wired_vertices=frozenset(wired),
        cutoff=cutoff,
        omitted_mass=omitted,
    )


def _wired_vertices(coupling, pts, cutoff):
    ptset = set(pts)
    d = coupling.norm.d
    c_low, _ = linf_equivalence_bounds(coupling.norm)
    pad = int(math.ceil(cutoff / c_low))
    offsets = [o for o in product(range(-pad, pad + 1), repeat=d) if any(o)]
    offsets = [o for o in offsets if norm_eval(coupling.norm, o) <= cutoff]
    wired = []
    for idx, p in enumerate(pts):
        for o in offsets:
            if tuple(np.add(p, o)) not in ptset:
                wired.append(idx)
                break
    return wired


def interval_region(coupling, n_vertices, cutoff=None):
    """1d interval {0, ..., n_vertices - 1}."""
    if coupling.norm.d != 1:
        raise ValueError("interval region needs a 1d coupling")
    return build_region(coupling, [(i,) for i in range(n_vertices)], cutoff)


def box_region(coupling, n_radius, cutoff=None):
    """Box {-N, ..., N}^d."""
    d = coupling.norm.d
    rng = range(-n_radius, n_radius + 1)
    return build_region(coupling, list(product(rng, repeat=d)), cutoff)


# ---------------------------------------------------------------------------
# enumeration kernel


@njit(cache=True)
def _component_scan(edges_u, edges_v, n_v, base_parent, want_labels):
    n_e = len(edges_u)
    n_masks = 1 << n_e
    kappa = np.empty(n_masks, np.uint8)
    labels = np.empty((n_masks if want_labels else 1, n_v if want_labels else 1), np.uint8)
    parent = np.empty(n_v, np.int64)
    for mask in range(n_masks):
        for i in range(n_v):
            parent[i] = base_parent[i]
        for e in range(n_e):
            if (mask >> e) & 1:
                a = edges_u[e]
                while parent[a] != a:
                    a = parent[a]
                b = edges_v[e]
                while parent[b] != b:
                    b = parent[b]
                if a != b:
                    if a < b:
                        parent[b] = a
                    else:
                        parent[a] = b
        k = 0
        for i in range(n_v):
            r = i
            while parent[r] != r:
                r = parent[r]
            parent[i] = r
            if r == i:
                k += 1
        kappa[mask] = k
        if want_labels:
            for i in range(n_v):
                labels[mask, i] = parent[i]
    return kappa, labels


_measure_cache = {}


class ExactMeasure:
    """All 2^|E| log-weights of a region at given parameters."""

    def __init__(self, region, params):
        if region.n_edges > MAX_EDGES:
            raise BudgetExceeded(f"{region.n_edges} edges exceeds budget {MAX_EDGES}")
        self.region = region
        self.params = params
        self.n_masks = 1 << region.n_edges
        key = (region, params.boundary)
        if key not in _measure_cache:
            base = np.arange(region.n_vertices, dtype=np.int64)
            if params.boundary == WIRED and region.wired_vertices:
                root = min(region.wired_vertices)
                for v in region.wired_vertices:
                    base[v] = root
            eu = np.array([e[0] for e in region.edges], dtype=np.int64)
            ev = np.array([e[1] for e in region.edges], dtype=np.int64)
            want = region.n_edges <= MAX_LABEL_EDGES
            _measure_cache[key] = _component_scan(eu, ev, region.n_vertices, base, want)
        self.kappa, self._labels = _measure_cache[key]
        logw = self.kappa.astype(np.float64) * math.log(params.q)
        idx = np.arange(self.n_masks, dtype=np.uint64)
        for e, j in enumerate(region.j_values):
            le = math.log(math.expm1(params.beta * j)) if params.beta * j > 0 else -np.inf
            logw += ((idx >> np.uint64(e)) & np.uint64(1)).astype(np.float64) * le
        self.logw = logw
        self.logz = float(logsumexp(logw))

    def labels(self):
        if self._labels.shape[0] != self.n_masks:
            raise BudgetExceeded("component labels not stored beyond "
                                 f"{MAX_LABEL_EDGES} edges")
        return self._labels

    def prob(self, event):
        event = np.asarray(event, dtype=bool)
        if not event.any():
            return 0.0
        return float(np.exp(logsumexp(self.logw[event]) - self.logz))

    def edge_open_event(self, e):
        idx = np.arange(self.n_masks, dtype=np.uint64)
        return ((idx >> np.uint64(e)) & np.uint64(1)).astype(bool)

    def connected_event(self, point_a, point_b):
        a, b = self.region.index(point_a), self.region.index(point_b)
        lab = self.labels()
        return lab[:, a] == lab[:, b]

    def cluster_size_event(self, point, predicate):
        """Event {predicate(|C(point)|)}; sizes count region vertices."""
        lab = self.labels()
        a = self.region.index(point)
        sizes = (lab == lab[:, a][:, None]).sum(axis=1)
        return predicate(sizes)


def exact_measure(region, params):
    return ExactMeasure(region, params)


def partition_weight(region, params, omega):
    """Weight of one configuration (not normalized)."""
    if region.n_edges > MAX_EDGES:
        raise BudgetExceeded(f"{region.n_edges} edges exceeds budget {MAX_EDGES}")
    omega = np.asarray(omega, dtype=bool)
    if omega.shape != (region.n_edges,):
        raise ValueError("omega length must equal the edge count")
    parent = list(range(region.n_vertices))
    if params.boundary == WIRED and region.wired_vertices:
        root = min(region.wired_vertices)
        for v in region.wired_vertices:
            parent[v] = root

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    w = 1.0
    for e, (i, j) in enumerate(region.edges):
        if omega[e]:
            w *= math.expm1(params.beta * region.j_values[e])
            ra, rb = find(i), find(j)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    kappa = sum(1 for v in range(region.n_vertices) if find(v) == v)
    return w * params.q ** kappa


def exact_probability(region, params, event):
    """Probability of an event under exhaustive enumeration.

    event may be a boolean mask over all 2^|E| configurations, a tuple
    ("edge", e, value) or ("connected", a, b), or a callable on the edge
    configuration vector.
    """
    m = exact_measure(region, params)
    if callable(event):
        idx = np.arange(m.n_masks, dtype=np.uint64)
        bits = np.array(
            [((idx >> np.uint64(e)) & np.uint64(1)).astype(bool) for e in range(region.n_edges)]
        ).T
        ev = np.fromiter((event(row) for row in bits), dtype=bool, count=m.n_masks)
    elif isinstance(event, tuple) and event and event[0] == "edge":
        ev = m.edge_open_event(event[1])
        if not event[2]:
            ev = ~ev
    elif isinstance(event, tuple) and event and event[0] == "connected":
        ev = m.connected_event(event[1], event[2])
    else:
        ev = np.asarray(event, dtype=bool)
    return m.prob(ev)


# ---------------------------------------------------------------------------
# audits


@dataclass(frozen=True)
class AuditReport:
    max_violation: float
    n_checks: int
    detail: tuple = ()


def finite_energy_audit(region, params, max_patterns=2 ** 15, seed=0, tol=1e-12):
    """Conditional single-edge probabilities against the finite-energy bounds.

    For every edge e and conditioning pattern eta' on the other edges,
    (e^{bJ}-1)/(e^{bJ}-1+q) <= P(omega_e=1 | eta') <= 1-e^{-bJ}; patterns are
    subsampled (seeded) when 2^(|E|-1) exceeds max_patterns.
    """
    m = exact_measure(region, params)
    rng = np.random.default_rng(seed)
    worst = 0.0
    n_checks = 0
    idx = np.arange(m.n_masks, dtype=np.uint64)
    for e, j in enumerate(region.j_values):
        bj = params.beta * j
        lo = math.expm1(bj) / (math.expm1(bj) + params.q)
        hi = -math.expm1(-bj)
        closed = idx[((idx >> np.uint64(e)) & np.uint64(1)) == 0]
        if len(closed) > max_patterns:
            closed = rng.choice(closed, size=max_patterns, replace=False)
        lw_closed = m.logw[closed.astype(np.int64)]
        lw_open = m.logw[(closed | np.uint64(1 << e)).astype(np.int64)]
        with np.errstate(over="ignore"):
            p = 1.0 / (1.0 + np.exp(lw_closed - lw_open))
        viol = np.maximum(lo - p, p - hi)
        worst = max(worst, float(viol.max()))
        n_checks += len(closed)
    rep = AuditReport(max_violation=worst, n_checks=n_checks)
    if worst > tol:
        raise AssertionError(f"finite-energy violation {worst:.3e} above {tol}")
    return rep


def stochastic_domination_audit(region, q, beta_low, beta_high, tol=1e-12):
    """P_{beta_low, free}(A) <= P_{beta_high, wired}(A) for the increasing
    events {omega_e = 1} and {u <-> v} over all edges and vertex pairs."""
    if beta_low > beta_high:
        raise ValueError("need beta_low <= beta_high")
    lo = exact_measure(region, RCParams(q=q, beta=beta_low, boundary=FREE))
    hi = exact_measure(region, RCParams(q=q, beta=beta_high, boundary=WIRED))
    worst = -np.inf
    n = 0
    for e in range(region.n_edges):
        ev = lo.edge_open_event(e)
        worst = max(worst, lo.prob(ev) - hi.prob(ev))
        n += 1
    lab_lo, lab_hi = lo.labels(), hi.labels()
    for a in range(region.n_vertices):
        for b in range(a + 1, region.n_vertices):
            p_lo = lo.prob(lab_lo[:, a] == lab_lo[:, b])
            p_hi = hi.prob(lab_hi[:, a] == lab_hi[:, b])
            worst = max(worst, p_lo - p_hi)
            n += 1
    rep = AuditReport(max_violation=max(worst, 0.0), n_checks=n)
    if worst > tol:
        raise AssertionError(f"stochastic domination violated by {worst:.3e}")
    return rep


# ---------------------------------------------------------------------------
# per-configuration cluster statistics


@dataclass(frozen=True)
class ClusterStats:
    cluster: tuple  # lattice points of C(0)
    size: int
    pivotal: tuple  # edges (as lattice point pairs) pivotal for 0 <-> x
    long_edge_count: int
    nice_connection: bool
    connected: bool


def _open_components(region, omega, skip_edge=None):
    parent = list(range(region.n_vertices))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for e, (i, j) in enumerate(region.edges):
        if omega[e] and e != skip_edge:
            ra, rb = find(i), find(j)
            if ra != rb:
                parent[ra] = rb
    return find


def cluster_stats(region, omega, x, k_threshold, f_value):
    """C(0), pivotal edges for {0 <-> x}, the count of open long non-pivotal
    edges inside C(0), and the nice-connection flag at level f_value.

    An open edge is pivotal when removing it disconnects 0 from x; the nice
    connection event additionally requires |C(0)| <= f_value and every open
    edge inside C(0) of rho-length >= 3*log(f_value) to be pivotal.
    """
    omega = np.asarray(omega, dtype=bool)
    origin = region.index((0,) * region.coupling.norm.d)
    target = region.index(x)
    find = _open_components(region, omega)
    root0 = find(origin)
    cluster_idx = [v for v in range(region.n_vertices) if find(v) == root0]
    connected = find(target) == root0
    lengths = region.edge_lengths()

    pivotal = []
    if connected:
        for e, (i, j) in enumerate(region.edges):
            if not omega[e]:
                continue
            find_e = _open_components(region, omega, skip_edge=e)
            if find_e(origin) != find_e(target):
                pivotal.append(e)
    piv_set = set(pivotal)

    in_cluster = set(cluster_idx)
    long_count = 0
    nice = connected and len(cluster_idx) <= f_value
    nc_len = 3.0 * math.log(f_value) if f_value > 0 else np.inf
    for e, (i, j) in enumerate(region.edges):
        if not omega[e] or i not in in_cluster or j not in in_cluster:
            continue
        if lengths[e] >= k_threshold and e not in piv_set:
            long_count += 1
        if nice and lengths[e] >= nc_len and e not in piv_set:
            nice = False
    return ClusterStats(
        cluster=tuple(region.points[v] for v in sorted(cluster_idx)),
        size=len(cluster_idx),
        pivotal=tuple((region.points[i], region.points[j]) for i, j in
                      (region.edges[e] for e in pivotal)),
        long_edge_count=long_count,
        nice_connection=bool(nice),
        connected=bool(connected),
    )


# ---------------------------------------------------------------------------
# ratio mixing


@dataclass(frozen=True)
class MixingReport:
    deviation: float
    bound: float
    bound_applicable: bool
    holds: bool


def ratio_mixing_check(region, params, event_a, support_a, event_b, support_b, c_big, c_small):
    """|Phi(A&B)/(Phi(A)Phi(B)) - 1| against sum C exp(-c|x-y|) over the
    event supports; the bound is only asserted when its right side is <= 1."""
    m = exact_measure(region, params)
    ev_a = np.asarray(event_a, dtype=bool)
    ev_b = np.asarray(event_b, dtype=bool)
    pa, pb = m.prob(ev_a), m.prob(ev_b)
    if pa <= 0 or pb <= 0:
        raise ValueError("events must have positive probability")
    pab = m.prob(ev_a & ev_b)
    dev = abs(pab / (pa * pb) - 1.0)
    rhs = 0.0
    for x in support_a:
        for y in support_b:
            rhs += c_big * math.exp(-c_small * float(np.linalg.norm(np.subtract(x, y))))
    applicable = rhs <= 1.0
    return MixingReport(
        deviation=dev,
        bound=rhs,
        bound_applicable=applicable,
        holds=(dev <= rhs) or (not applicable),
    )
