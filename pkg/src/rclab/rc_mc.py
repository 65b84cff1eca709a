"""Monte Carlo sampling of the random-cluster model at desk scale.

Samplers
--------
* q = 1: edges are independent with p_e = 1 - exp(-beta*J_e); configurations
  are drawn directly, walking the probability-sorted edge list with
  geometric jumps so the cost scales with the number of open edges.
* q >= 1: single-edge heat-bath dynamics.  Every sweep proposes each edge
  once in random order and resamples it from its exact conditional:
  (e^{bJ}-1)/e^{bJ} when the endpoints are connected off the edge, else
  (e^{bJ}-1)/(e^{bJ}-1+q), with connectivity resolved by search on the
  current open subgraph.

Randomness comes from SplitMix64, a named counter-based 64-bit generator:
every (chain, sweep) pair owns a stream keyed by hashing, chains use the
seed schedule seed+i, and draws are indexed within the stream.  Runs are
therefore bit-reproducible regardless of chunking or worker count.

Rare-displacement campaigns (d = 1, q = 1) use a conditioned estimator:
short edges (rho <= K) are sampled, long edges are integrated out exactly at
single-bridge order, so each sample contributes the conditional probability
that one long edge connects the short clusters of the two endpoints.  This
is the measurable shadow of the single-giant-edge mechanism that dominates
the saturation regime; the neglected multi-bridge chains are bounded by the
reported two-bridge diagnostic and the estimator must not be used where
that diagnostic is large (no saturation).
"""

import math
import struct
from dataclasses import dataclass

import numpy as np
from numba import njit

from .geometry import norm_eval_many
from .rc_exact import WIRED, Region, box_region

N_BATCHES = 32
MIN_BATCHES = 16
BOUNDARY_TOUCH_LIMIT = 1e-3


class SamplingError(RuntimeError):
    pass


class InsufficientHits(SamplingError):
    pass


# ---------------------------------------------------------------------------
# SplitMix64 counter streams

_GOLD = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def _mix64(z):
    z = z + _GOLD
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _stream(seed, sweep):
    return _mix64(_mix64(np.uint64(seed)) ^ (np.uint64(sweep) * _M2))


@njit(cache=True, inline="always")
def _u01(base, k):
    return float(_mix64(base + np.uint64(k) * _GOLD) >> np.uint64(11)) * _INV53


# ---------------------------------------------------------------------------
# shared jit helpers


@njit(cache=True)
def _uf_root(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


@njit(cache=True)
def _measure(
    open_arr, eu, ev, parent, n_aug, n_real, origin,
    pair_a, pair_b, target_mask, conn_row, extra,
):
    """Label clusters of the open graph; fill pair connectivity and
    extra = (|C0|, boundary/target touched, open sampled-edge count)."""
    for v in range(n_aug):
        parent[v] = v
    for e in range(len(eu)):
        if open_arr[e]:
            ra = _uf_root(parent, eu[e])
            rb = _uf_root(parent, ev[e])
            if ra != rb:
                parent[ra] = rb
    r0 = _uf_root(parent, origin)
    c0 = 0
    touched = 0
    for v in range(n_aug):
        if _uf_root(parent, v) == r0:
            if v < n_real:
                c0 += 1
            if target_mask[v]:
                touched = 1
    for k in range(len(pair_a)):
        conn_row[k] = _uf_root(parent, pair_a[k]) == _uf_root(parent, pair_b[k])
    extra[0] = c0
    extra[1] = touched


@njit(cache=True)
def _connected_off(indptr, adj_edge, adj_other, open_arr, e_skip, src, dst, visited, stamp, stack):
    if src == dst:
        return True
    visited[src] = stamp
    stack[0] = src
    sp = 1
    while sp > 0:
        sp -= 1
        v = stack[sp]
        for k in range(indptr[v], indptr[v + 1]):
            e = adj_edge[k]
            if e == e_skip or not open_arr[e]:
                continue
            w = adj_other[k]
            if visited[w] != stamp:
                if w == dst:
                    return True
                visited[w] = stamp
                stack[sp] = w
                sp += 1
    return False


@njit(cache=True)
def _heatbath_kernel(
    indptr, adj_edge, adj_other, eu, ev, open_arr, n_sampled,
    p_conn, p_disc, n_aug, n_real, origin, pair_a, pair_b, target_mask,
    sweep0, n_sweeps, burn_in, thin, seed,
    conn_out, c0_out, touch_out, nopen_out, record, rec_out,
):
    n_e = n_sampled
    perm = np.empty(n_e, np.int64)
    parent = np.empty(n_aug, np.int64)
    visited = np.zeros(n_aug, np.int64)
    stack = np.empty(n_aug, np.int64)
    conn_row = np.empty(len(pair_a), np.uint8)
    extra = np.empty(2, np.int64)
    stamp = 0
    out = 0
    for s in range(sweep0, sweep0 + n_sweeps):
        base = _stream(seed, s)
        k = 0
        for i in range(n_e):
            perm[i] = i
        for i in range(n_e - 1, 0, -1):
            j = int(_u01(base, k) * (i + 1))
            k += 1
            perm[i], perm[j] = perm[j], perm[i]
        for i in range(n_e):
            e = perm[i]
            stamp += 1
            if _connected_off(indptr, adj_edge, adj_other, open_arr, e,
                              eu[e], ev[e], visited, stamp, stack):
                p = p_conn[e]
            else:
                p = p_disc[e]
            open_arr[e] = _u01(base, k) < p
            k += 1
        if s >= burn_in and (s - burn_in) % thin == 0:
            _measure(open_arr, eu, ev, parent, n_aug, n_real, origin,
                     pair_a, pair_b, target_mask, conn_row, extra)
            for t in range(len(pair_a)):
                conn_out[out, t] = conn_row[t]
            c0_out[out] = extra[0]
            touch_out[out] = extra[1]
            nop = 0
            for e in range(n_e):
                if open_arr[e]:
                    nop += 1
            nopen_out[out] = nop
            if record:
                for e in range(n_e):
                    rec_out[out, e] = open_arr[e]
            out += 1
    return out


@njit(cache=True)
def _bernoulli_kernel(
    eu, ev, open_arr, n_sampled, order, p_sorted,
    n_aug, n_real, origin, pair_a, pair_b, target_mask,
    sweep0, n_sweeps, burn_in, thin, seed,
    conn_out, c0_out, touch_out, nopen_out, record, rec_out,
):
    n_e = n_sampled
    parent = np.empty(n_aug, np.int64)
    conn_row = np.empty(len(pair_a), np.uint8)
    extra = np.empty(2, np.int64)
    out = 0
    for s in range(sweep0, sweep0 + n_sweeps):
        base = _stream(seed, s)
        k = 0
        for e in range(n_e):
            open_arr[e] = False
        # geometric skipping over the probability-sorted edge list
        i = 0
        nop = 0
        while i < n_e:
            p_max = p_sorted[i]
            if p_max <= 0.0:
                break
            if p_max >= 1.0 - 1e-12:
                open_arr[order[i]] = True
                nop += 1
                i += 1
                continue
            u = _u01(base, k)
            k += 1
            g = int(math.log(1.0 - u) / math.log1p(-p_max)) + 1
            j = i + g - 1
            if j >= n_e:
                break
            if _u01(base, k) < p_sorted[j] / p_max:
                open_arr[order[j]] = True
                nop += 1
            k += 1
            i = j + 1
        if s >= burn_in and (s - burn_in) % thin == 0:
            _measure(open_arr, eu, ev, parent, n_aug, n_real, origin,
                     pair_a, pair_b, target_mask, conn_row, extra)
            for t in range(len(pair_a)):
                conn_out[out, t] = conn_row[t]
            c0_out[out] = extra[0]
            touch_out[out] = extra[1]
            nopen_out[out] = nop
            if record:
                for e in range(n_e):
                    rec_out[out, e] = open_arr[e]
            out += 1
    return out


# ---------------------------------------------------------------------------
# estimates


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n_samples: int
    tau_int: float
    n_batches: int = N_BATCHES

    def compatible(self, other, n_sigma=3.0):
        se = math.hypot(self.stderr, getattr(other, "stderr", 0.0))
        mu = other.mean if hasattr(other, "mean") else float(other)
        return abs(self.mean - mu) <= n_sigma * max(se, 1e-300)


def batch_means(values, n_batches=N_BATCHES):
    """Batch-means mean/stderr estimate with an autocorrelation-time read."""
    x = np.asarray(values, dtype=float)
    if len(x) < 2 * MIN_BATCHES:
        raise SamplingError(f"need at least {2 * MIN_BATCHES} samples, got {len(x)}")
    n_batches = min(n_batches, len(x) // 2)
    per = len(x) // n_batches
    trimmed = x[: per * n_batches]
    bm = trimmed.reshape(n_batches, per).mean(axis=1)
    mean = float(trimmed.mean())
    se = float(bm.std(ddof=1) / math.sqrt(n_batches))
    var = float(trimmed.var(ddof=1))
    tau = 1.0 if var <= 0 else max(1.0, se * se * len(trimmed) / var)
    return Estimate(mean=mean, stderr=se, n_samples=len(trimmed), tau_int=tau,
                    n_batches=n_batches)


def pool_estimates(parts):
    """Combine independent per-chain estimates (equal-weight pooling)."""
    parts = list(parts)
    n = sum(p.n_samples for p in parts)
    mean = sum(p.mean * p.n_samples for p in parts) / n
    se = math.sqrt(sum((p.stderr * p.n_samples) ** 2 for p in parts)) / n
    tau = max(p.tau_int for p in parts)
    return Estimate(mean=mean, stderr=se, n_samples=n, tau_int=tau,
                    n_batches=sum(p.n_batches for p in parts))


@dataclass(frozen=True)
class SamplerConfig:
    region: Region
    q: float
    beta: float
    boundary: str = "free"
    sweeps: int = 10_000
    burn_in: int = 1_000
    thinning: int = 1
    seed: int = 1
    chains: int = 1

    def __post_init__(self):
        if not (self.sweeps > self.burn_in >= 0):
            raise ValueError("need sweeps > burn_in >= 0")
        if self.chains < 1 or self.thinning < 1:
            raise ValueError("chains and thinning must be >= 1")

    @property
    def n_samples(self):
        return (self.sweeps - self.burn_in + self.thinning - 1) // self.thinning


@dataclass(frozen=True)
class TwoPointTable:
    """G(0, x) estimates by displacement, with the sampling metadata."""

    values: dict
    q: float
    beta: float
    boundary: str
    provenance: str = "mc"

    def displacements(self):
        return sorted(self.values, key=lambda x: (norm2(x), x))

    def get(self, x):
        return self.values[tuple(x)]


def norm2(x):
    return math.sqrt(sum(c * c for c in x))


def _augmented_graph(region, boundary):
    """Vertex/edge arrays with a ghost vertex wired to the boundary set."""
    n_real = region.n_vertices
    eu = [e[0] for e in region.edges]
    ev = [e[1] for e in region.edges]
    n_sampled = len(eu)
    wired = boundary == WIRED and region.wired_vertices
    n_aug = n_real + (1 if wired else 0)
    perm_edges = []
    if wired:
        ghost = n_real
        for v in sorted(region.wired_vertices):
            perm_edges.append((v, ghost))
    eu_all = np.array(eu + [a for a, _ in perm_edges], dtype=np.int64)
    ev_all = np.array(ev + [b for _, b in perm_edges], dtype=np.int64)
    n_tot = len(eu_all)
    deg = np.zeros(n_aug + 1, dtype=np.int64)
    for a, b in zip(eu_all, ev_all):
        deg[a + 1] += 1
        deg[b + 1] += 1
    indptr = np.cumsum(deg)
    adj_edge = np.zeros(2 * n_tot, dtype=np.int64)
    adj_other = np.zeros(2 * n_tot, dtype=np.int64)
    fill = indptr[:-1].copy()
    for e in range(n_tot):
        a, b = eu_all[e], ev_all[e]
        adj_edge[fill[a]] = e
        adj_other[fill[a]] = b
        fill[a] += 1
        adj_edge[fill[b]] = e
        adj_other[fill[b]] = a
        fill[b] += 1
    open_arr = np.zeros(n_tot, dtype=np.uint8)
    open_arr[n_sampled:] = 1  # ghost edges are permanently open
    return {
        "indptr": indptr,
        "adj_edge": adj_edge,
        "adj_other": adj_other,
        "eu": eu_all,
        "ev": ev_all,
        "open": open_arr,
        "n_sampled": n_sampled,
        "n_aug": n_aug,
        "n_real": n_real,
    }


def _edge_probs(region, q, beta):
    j = np.asarray(region.j_values)
    bj = beta * j
    p_conn = -np.expm1(-bj)                      # endpoints connected off e
    p_disc = np.expm1(bj) / (np.expm1(bj) + q)   # endpoints disconnected
    return p_conn, p_disc


def _run_stats(config, displacements=(), target_points=(), ghost_target=False,
               record=False):
    """Run all chains, returning per-chain stat arrays (and configs if
    record).  Chain i uses seed + i."""
    region = config.region
    g = _augmented_graph(region, config.boundary)
    p_conn, p_disc = _edge_probs(region, config.q, config.beta)
    origin = region.index((0,) * region.coupling.norm.d)
    pair_a = np.full(len(displacements), origin, dtype=np.int64)
    pair_b = np.array(
        [region.index(x) for x in displacements], dtype=np.int64
    ) if displacements else np.zeros(0, dtype=np.int64)
    target_mask = np.zeros(g["n_aug"], dtype=np.uint8)
    for p in target_points:
        target_mask[region.index(p)] = 1
    if ghost_target and g["n_aug"] > g["n_real"]:
        target_mask[g["n_real"]] = 1
    n_samples = config.n_samples
    chains = []
    for c in range(config.chains):
        conn = np.zeros((n_samples, len(pair_b)), dtype=np.uint8)
        c0 = np.zeros(n_samples, dtype=np.int32)
        touch = np.zeros(n_samples, dtype=np.uint8)
        nopen = np.zeros(n_samples, dtype=np.int32)
        rec = np.zeros((n_samples if record else 1, max(g["n_sampled"], 1)),
                       dtype=np.uint8)
        open_arr = g["open"].copy()
        seed = np.uint64(config.seed + c)
        if config.q == 1.0:
            order = np.argsort(-p_conn, kind="stable").astype(np.int64)
            p_sorted = p_conn[order]
            n_out = _bernoulli_kernel(
                g["eu"], g["ev"], open_arr, g["n_sampled"], order, p_sorted,
                g["n_aug"], g["n_real"], origin, pair_a, pair_b, target_mask,
                0, config.sweeps, config.burn_in, config.thinning, seed,
                conn, c0, touch, nopen, record, rec,
            )
        else:
            n_out = _heatbath_kernel(
                g["indptr"], g["adj_edge"], g["adj_other"], g["eu"], g["ev"],
                open_arr, g["n_sampled"], p_conn, p_disc,
                g["n_aug"], g["n_real"], origin, pair_a, pair_b, target_mask,
                0, config.sweeps, config.burn_in, config.thinning, seed,
                conn, c0, touch, nopen, record, rec,
            )
        assert n_out == n_samples
        chains.append({"conn": conn, "c0": c0, "touch": touch, "nopen": nopen,
                       "rec": rec if record else None})
    return chains


def sample_bernoulli(config, max_samples=None):
    """Stream of independent edge configurations (q = 1 only)."""
    if config.q != 1.0:
        raise ValueError("sample_bernoulli requires q = 1")
    return _config_stream(config, max_samples)


def sample_heatbath(config, max_samples=None):
    """Stream of heat-bath edge configurations (any q >= 1)."""
    return _config_stream(config, max_samples)


def _config_stream(config, max_samples):
    chains = _run_stats(config, record=True)
    count = 0
    for chain in chains:
        for row in chain["rec"]:
            if max_samples is not None and count >= max_samples:
                return
            yield row.astype(bool)
            count += 1


def estimate_two_point(config, displacements):
    """TwoPointTable of indicator averages with batch-means errors."""
    displacements = [tuple(x) for x in displacements]
    nonzero = [x for x in displacements if any(x)]
    chains = _run_stats(config, displacements=nonzero)
    values = {}
    zero = (0,) * config.region.coupling.norm.d
    if zero in displacements:
        values[zero] = Estimate(mean=1.0, stderr=0.0,
                                n_samples=config.n_samples * config.chains,
                                tau_int=1.0)
    for k, x in enumerate(nonzero):
        parts = [batch_means(ch["conn"][:, k]) for ch in chains]
        values[x] = pool_estimates(parts)
    return TwoPointTable(values=values, q=config.q, beta=config.beta,
                         boundary=config.boundary)


def surface_vertices(region):
    """Lattice points of the region with a nearest neighbour outside it
    (the finite-size diagnostic set)."""
    pts = set(region.points)
    d = region.coupling.norm.d
    out = []
    for p in region.points:
        for i in range(d):
            for sgn in (1, -1):
                q = list(p)
                q[i] += sgn
                if tuple(q) not in pts:
                    out.append(p)
                    break
            else:
                continue
            break
    return out


def estimate_susceptibility(config, touch_limit=BOUNDARY_TOUCH_LIMIT):
    """Mean origin-cluster size; errors out when the cluster reaches the
    region surface too often (region too small)."""
    region = config.region
    touch_set = surface_vertices(region)
    chains = _run_stats(config, target_points=touch_set)
    c0 = np.concatenate([ch["c0"] for ch in chains])
    touch_rate = float(np.concatenate([ch["touch"] for ch in chains]).mean())
    if touch_rate > touch_limit:
        raise SamplingError(
            f"origin cluster touches the boundary in {touch_rate:.2%} of "
            f"samples (> {touch_limit:.2%}): region too small"
        )
    parts = [batch_means(ch["c0"].astype(float)) for ch in chains]
    return pool_estimates(parts)


def estimate_fN(coupling, q, beta, n_scale, sweeps=20_000, burn_in=2_000,
                thinning=1, seed=1, chains=1, cutoff=None):
    """f_N = P(origin cluster leaves the inner box Lambda_N) on the wired
    box Lambda_{2N} (side 4N+1)."""
    region = box_region(coupling, 2 * n_scale, cutoff=cutoff)
    config = SamplerConfig(region=region, q=q, beta=beta, boundary=WIRED,
                           sweeps=sweeps, burn_in=burn_in, thinning=thinning,
                           seed=seed, chains=chains)
    outside = [p for p in region.points if max(abs(c) for c in p) > n_scale]
    chains_out = _run_stats(config, target_points=outside, ghost_target=True)
    parts = [batch_means(ch["touch"].astype(float)) for ch in chains_out]
    return pool_estimates(parts)


# ---------------------------------------------------------------------------
# effective inverse correlation length


@dataclass(frozen=True)
class IclPoint:
    n: int
    nu_hat: float
    nu_err: float
    ratio: float     # G_hat / J at the displacement (saturation diagnostic)
    ratio_err: float


def effective_icl(table, coupling, s, n_list):
    """Effective inverse correlation lengths nu_n = -log G(0, ns)/n and the
    ratio diagnostic r_n = G_hat/J_{ns}.

    Returns (points, flag) with flag "saturation-consistent" when r_n stays
    bounded over n_list (end-to-end growth <= 2), "saturation-broken" when
    r_n grows monotonically by more than a factor 2.
    """
    s = np.asarray(s, dtype=float)
    points = []
    for n in n_list:
        x = tuple(int(round(n * c)) for c in s)
        est = table.get(x)
        if est.mean <= 0:
            raise SamplingError(f"nonpositive two-point estimate at {x}")
        j = float(coupling.coupling_eval_many([x])[0])
        nu = -math.log(est.mean) / n
        nu_err = est.stderr / (est.mean * n)
        points.append(IclPoint(n=n, nu_hat=nu, nu_err=nu_err,
                               ratio=est.mean / j, ratio_err=est.stderr / j))
    ratios = [p.ratio for p in points]
    growing = all(b > a for a, b in zip(ratios, ratios[1:]))
    if growing and ratios[-1] / ratios[0] > 2.0:
        flag = "saturation-broken"
    elif ratios[-1] / ratios[0] <= 2.0:
        flag = "saturation-consistent"
    else:
        flag = "indeterminate"
    return points, flag


# ---------------------------------------------------------------------------
# conditioned single-bridge campaign (d = 1, q = 1)


@njit(cache=True)
def _campaign_kernel(
    n_v, origin, k_short, p_short, log1m_bridge, targets,
    n_samples, seed, n_batches,
    batch_h, sum_h, sum_h2, short_conn,
    tail_slot, m_list, tail_num, tail_den, c0_sum,
):
    parent = np.empty(n_v, np.int64)
    slot_of_root = np.full(n_v, -1, np.int64)
    n_slots = len(targets) + 1
    members = np.empty((n_slots, n_v), np.int64)
    m_count = np.empty(n_slots, np.int64)
    roots = np.empty(n_slots, np.int64)
    for s in range(n_samples):
        base = _stream(seed, s)
        k = 0
        for v in range(n_v):
            parent[v] = v
        # sample short edges displacement class by displacement class
        for delta in range(1, k_short + 1):
            p = p_short[delta]
            if p <= 0.0:
                continue
            limit = n_v - delta
            i = 0
            while i < limit:
                u = _u01(base, k)
                k += 1
                g = int(math.log(1.0 - u) / math.log1p(-p)) + 1
                i += g - 1
                if i >= limit:
                    break
                ra = _uf_root(parent, i)
                rb = _uf_root(parent, i + delta)
                if ra != rb:
                    parent[ra] = rb
                i += 1
        # collect members of the clusters of origin and targets
        r0 = _uf_root(parent, origin)
        roots[0] = r0
        slot_of_root[r0] = 0
        n_used = 1
        for t in range(len(targets)):
            rt = _uf_root(parent, targets[t])
            if slot_of_root[rt] < 0:
                slot_of_root[rt] = n_used
                roots[n_used] = rt
                n_used += 1
        for sl in range(n_used):
            m_count[sl] = 0
        for v in range(n_v):
            sl = slot_of_root[_uf_root(parent, v)]
            if sl >= 0:
                members[sl, m_count[sl]] = v
                m_count[sl] += 1
        batch = s * n_batches // n_samples
        c0_sum[batch] += m_count[0]
        for t in range(len(targets)):
            rt = _uf_root(parent, targets[t])
            if rt == r0:
                h = 1.0
                short_conn[t] += 1
            else:
                sl = slot_of_root[rt]
                acc = 0.0
                for ia in range(m_count[0]):
                    a = members[0, ia]
                    for ib in range(m_count[sl]):
                        b = members[sl, ib]
                        dist = b - a
                        if dist < 0:
                            dist = -dist
                        if dist > k_short:
                            acc += log1m_bridge[dist]
                h = -math.expm1(acc)
            batch_h[batch, t] += h
            sum_h[t] += h
            sum_h2[t] += h * h
            if t == tail_slot:
                rt = _uf_root(parent, targets[t])
                size = m_count[0] if rt == r0 else m_count[0] + m_count[slot_of_root[rt]]
                tail_den[batch] += h
                for im in range(len(m_list)):
                    if size > m_list[im]:
                        tail_num[batch, im] += h
        # reset slot map
        for sl in range(n_used):
            slot_of_root[roots[sl]] = -1
    return 0


@dataclass(frozen=True)
class CampaignResult:
    table: TwoPointTable
    ess: dict               # effective sample size per displacement
    short_connect: dict     # fraction of samples already connected short
    two_bridge_ratio: float
    tail: dict              # M -> Estimate of P(|C0| > M | 0 <-> tail_target)
    tail_target: tuple
    tail_hits: float
    mean_c0_short: float
    n_samples: int
    k_short: int


def two_bridge_ratio(coupling, beta, k_short, n, chi_tilted=1.5):
    """Rough relative weight of two-bridge chains against the single bridge
    at displacement n: the conditioned estimator is only trusted when this
    is small (saturation regime)."""
    ks = np.arange(k_short + 1, max(n - k_short, k_short + 2))
    j1 = coupling.coupling_eval_many(ks[:, None].astype(float))
    j2 = coupling.coupling_eval_many((n - ks)[:, None].astype(float))
    jn = float(coupling.coupling_eval_many([[float(n)]])[0])
    # the envelope cancels exactly: the two bridge lengths sum to n
    return beta * chi_tilted * float(np.sum(j1 * j2)) / jn


def run_campaign(
    coupling, beta, targets, n_samples, seed=1, k_short=None, pad=48,
    tail_target=None, m_list=(2, 4, 8, 16), min_tail_hits=200.0,
    max_two_bridge=0.2,
):
    """Conditioned single-bridge two-point campaign (d = 1, q = 1).

    Estimates G(0, u) for every displacement u in targets on the interval
    [min targets - pad, max targets + pad], by sampling edges of rho-length
    <= k_short and integrating out single long bridges exactly.  Also
    returns the conditional cluster-size tail at tail_target.
    Refuses to run when the two-bridge diagnostic exceeds max_two_bridge
    (the estimator is a saturation-regime tool).
    """
    if coupling.norm.d != 1:
        raise ValueError("campaign estimator is one-dimensional")
    targets = [int(t[0]) if isinstance(t, tuple) else int(t) for t in targets]
    if k_short is None:
        k_short = 10
    n_far = max(abs(t) for t in targets)
    diag = two_bridge_ratio(coupling, beta, k_short, max(n_far, 2 * k_short + 2))
    if diag > max_two_bridge:
        raise SamplingError(
            f"two-bridge diagnostic {diag:.3f} > {max_two_bridge}: single-bridge "
            "conditioning is not valid here (likely outside the saturation "
            "regime); use direct sampling"
        )
    lo = min(min(targets), 0) - pad
    hi = max(max(targets), 0) + pad
    n_v = hi - lo + 1
    origin = -lo
    tgt_idx = np.array([t - lo for t in targets], dtype=np.int64)
    deltas = np.arange(0, n_v, dtype=float)
    j_by_delta = np.zeros(n_v)
    j_by_delta[1:] = coupling.j_of_rho(deltas[1:])
    p_any = -np.expm1(-beta * j_by_delta)
    p_short = np.zeros(k_short + 1)
    p_short[1:] = p_any[1 : k_short + 1]
    with np.errstate(divide="ignore"):
        log1m_bridge = np.log1p(-p_any)
    if tail_target is None:
        tail_target = max(targets)
    else:
        tail_target = int(tail_target[0]) if isinstance(tail_target, tuple) else int(tail_target)
    tail_slot = targets.index(tail_target)
    m_arr = np.asarray(m_list, dtype=np.int64)

    batch_h = np.zeros((N_BATCHES, len(targets)))
    sum_h = np.zeros(len(targets))
    sum_h2 = np.zeros(len(targets))
    short_conn = np.zeros(len(targets), dtype=np.int64)
    tail_num = np.zeros((N_BATCHES, len(m_arr)))
    tail_den = np.zeros(N_BATCHES)
    c0_sum = np.zeros(N_BATCHES)
    _campaign_kernel(
        n_v, origin, k_short, p_short, log1m_bridge, tgt_idx,
        n_samples, np.uint64(seed), N_BATCHES,
        batch_h, sum_h, sum_h2, short_conn,
        tail_slot, m_arr, tail_num, tail_den, c0_sum,
    )
    per_batch = n_samples / N_BATCHES
    values, ess, short_frac = {}, {}, {}
    values[(0,)] = Estimate(mean=1.0, stderr=0.0, n_samples=n_samples, tau_int=1.0)
    for t, u in enumerate(targets):
        bm = batch_h[:, t] / per_batch
        mean = float(sum_h[t] / n_samples)
        se = float(bm.std(ddof=1) / math.sqrt(N_BATCHES))
        values[(u,)] = Estimate(mean=mean, stderr=se, n_samples=n_samples,
                                tau_int=1.0)
        ess[(u,)] = float(sum_h[t] ** 2 / sum_h2[t]) if sum_h2[t] > 0 else 0.0
        short_frac[(u,)] = float(short_conn[t] / n_samples)
    table = TwoPointTable(values=values, q=1.0, beta=beta, boundary="free",
                          provenance="mc-conditioned-bridge")
    tail_hits = float(sum_h[tail_slot] ** 2 / sum_h2[tail_slot]) if sum_h2[tail_slot] > 0 else 0.0
    tail = {}
    if tail_den.sum() > 0:
        if tail_hits < min_tail_hits:
            raise InsufficientHits(
                f"effective conditional hits {tail_hits:.1f} < {min_tail_hits}; "
                f"increase n_samples (currently {n_samples})"
            )
        ratios = tail_num / np.maximum(tail_den[:, None], 1e-300)
        for im, m in enumerate(m_arr):
            bm = ratios[:, im]
            tail[int(m)] = Estimate(
                mean=float(tail_num[:, im].sum() / tail_den.sum()),
                stderr=float(bm.std(ddof=1) / math.sqrt(N_BATCHES)),
                n_samples=n_samples, tau_int=1.0,
            )
    return CampaignResult(
        table=table, ess=ess, short_connect=short_frac, two_bridge_ratio=diag,
        tail=tail, tail_target=(tail_target,), tail_hits=tail_hits,
        mean_c0_short=float(c0_sum.sum() / n_samples), n_samples=n_samples,
        k_short=k_short,
    )


def conditional_cluster_tail(campaign_result):
    """Conditional tail P(|C(0)| > M | 0 <-> tail_target) with the
    log-linear fit slope over the M grid."""
    tail = campaign_result.tail
    ms = sorted(tail)
    probs = [tail[m].mean for m in ms]
    if any(p <= 0 for p in probs):
        fitted = None
    else:
        fitted = float(np.polyfit(ms, np.log(probs), 1)[0])
    return {"M": ms, "tail": [tail[m] for m in ms], "slope": fitted,
            "hits": campaign_result.tail_hits}


# ---------------------------------------------------------------------------
# raw sample dumps: magic "RCLB1", then d, |V|, |E| (little-endian uint32),
# then per sample a varint count followed by varint open-edge indices.


def _write_varint(out, value):
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def _read_varint(buf, pos):
    shift = 0
    val = 0
    while True:
        b = buf[pos]
        pos += 1
        val |= (b & 0x7F) << shift
        if not b & 0x80:
            return val, pos
        shift += 7


def dump_samples(path, region, configs):
    """Write edge configurations in the RCLB1 binary layout."""
    out = bytearray()
    out += b"RCLB1"
    out += struct.pack("<III", region.coupling.norm.d, region.n_vertices,
                       region.n_edges)
    n = 0
    for omega in configs:
        idx = np.flatnonzero(omega)
        _write_varint(out, len(idx))
        for e in idx:
            _write_varint(out, int(e))
        n += 1
    with open(path, "wb") as fh:
        fh.write(bytes(out))
    return n


def load_samples(path):
    """Read an RCLB1 dump; returns (d, n_vertices, n_edges, configs)."""
    buf = open(path, "rb").read()
    if buf[:5] != b"RCLB1":
        raise ValueError("not an RCLB1 dump")
    d, n_v, n_e = struct.unpack("<III", buf[5:17])
    pos = 17
    configs = []
    while pos < len(buf):
        count, pos = _read_varint(buf, pos)
        omega = np.zeros(n_e, dtype=bool)
        for _ in range(count):
            e, pos = _read_varint(buf, pos)
            omega[e] = True
        configs.append(omega)
    return d, n_v, n_e, configs
