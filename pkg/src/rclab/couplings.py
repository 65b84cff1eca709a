"""Coupling constants J_x = psi(x) exp(-rho(x)) / Z and their series.

Two prefactor families are supported: psi(x) = rho(x)^(-alpha) ("poly") and
psi(x) = exp(-ctilde * rho(x)^eta) ("stretched").  With envelope=False the
exponential factor is dropped (sub-exponential couplings, which for the
polynomial family requires alpha > d to be summable).

The module normalizes couplings on a truncated lattice with a certified
bound on the omitted mass, evaluates the tilted series
J(t) = sum_x exp(t.x) J_x = sum_x psi(x) exp(-s_t(x)) / Z over growing radii,
and classifies its convergence.  For the two supported families the verdict
reduces to a shell-exponent comparison: the unit-shell sums of exp(-s_t)
grow like m^sigma, so the polynomial-prefactor series converges exactly when
sigma - alpha < -1.  The numeric partial-sum fit must not contradict this
closed form; a conflict signals a geometry bug.

Saturation: the inverse correlation length stays pinned at rho for small
beta if and only if some dual vector t has J(t) < infinity, so the
classifier scans a finite sample of the dual face.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import zeta

from .geometry import (
    linf_equivalence_bounds,
    norm_eval,
    norm_eval_many,
    sample_dual_face,
)

EPS_NORM = 1e-8
DELTA_FIT = 0.15
DEFAULT_TRUNC = {1: 2 ** 14, 2: 2 ** 10, 3: 2 ** 7}


class NonSummableError(ValueError):
    """Prefactor family not summable (envelope=False with alpha <= d)."""


class NormalizationError(RuntimeError):
    """Certified tail bound too loose to normalize within EPS_NORM."""


class VerdictConflict(RuntimeError):
    """Numeric shell fit contradicts the closed-form classification."""


@dataclass(frozen=True)
class PrefactorSpec:
    """Sub-exponential correction psi and whether exp(-rho) multiplies it."""

    family: str  # "poly" | "stretched"
    alpha: float = None
    ctilde: float = None
    eta: float = None
    envelope: bool = True

    def __post_init__(self):
        if self.family == "poly":
            if self.alpha is None or self.alpha <= 0:
                raise ValueError("poly prefactor needs alpha > 0")
        elif self.family == "stretched":
            if not (self.ctilde and self.ctilde > 0 and self.eta and 0 < self.eta < 1):
                raise ValueError("stretched prefactor needs ctilde > 0, eta in (0,1)")
        else:
            raise ValueError(f"unknown prefactor family {self.family!r}")

    def psi_of_rho(self, rho):
        """psi as a function of rho(x) (vectorized, rho > 0)."""
        rho = np.asarray(rho, dtype=float)
        if self.family == "poly":
            return rho ** (-self.alpha)
        return np.exp(-self.ctilde * rho ** self.eta)

    def raw_of_rho(self, rho):
        """Unnormalized coupling psi * exp(-rho) (or psi without envelope)."""
        val = self.psi_of_rho(rho)
        if self.envelope:
            val = val * np.exp(-np.asarray(rho, dtype=float))
        return val


def polynomial(alpha, envelope=True):
    return PrefactorSpec("poly", alpha=float(alpha), envelope=envelope)


def stretched_exp(ctilde, eta, envelope=True):
    return PrefactorSpec("stretched", ctilde=float(ctilde), eta=float(eta), envelope=envelope)


@dataclass(frozen=True)
class CouplingSpec:
    """Normalized couplings: J_x = prefactor.raw_of_rho(rho(x)) / z.

    tail_bound is the (normalized) mass assigned to the omitted region
    rho(x) > trunc_radius; by construction the truncated mass plus
    tail_bound equals 1.  norm_gap is the certified half-width of the tail
    estimate (how far the true total mass may sit from 1).
    """

    norm: object
    prefactor: PrefactorSpec
    z: float
    trunc_radius: float
    tail_bound: float
    norm_gap: float

    @property
    def d(self):
        return self.norm.d

    def j_of_rho(self, rho):
        return self.prefactor.raw_of_rho(rho) / self.z

    def coupling_eval_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        rho = norm_eval_many(self.norm, X)
        out = np.zeros(len(rho))
        nz = rho > 0
        out[nz] = self.j_of_rho(rho[nz])
        return out


def coupling_eval(spec, x):
    """J_x (0 at the origin)."""
    return float(spec.coupling_eval_many(x)[0])


# ---------------------------------------------------------------------------
# lattice enumeration (streamed in chunks, reduced to shell sums)


def _lattice_chunks(norm, radius):
    """Yield (X, rho) for lattice points 0 < rho(x) <= radius."""
    c_low, _ = linf_equivalence_bounds(norm)
    box = int(math.floor(radius / c_low))
    d = norm.d
    if d == 1:
        x = np.arange(-box, box + 1, dtype=float)[:, None]
        rho = norm_eval_many(norm, x)
        keep = (rho > 0) & (rho <= radius)
        yield x[keep], rho[keep]
        return
    side = np.arange(-box, box + 1, dtype=float)
    rows_per_chunk = max(1, int(2e5 / max(1, len(side) ** (d - 1))))
    for start in range(0, len(side), rows_per_chunk):
        block = side[start : start + rows_per_chunk]
        if d == 2:
            g = np.meshgrid(block, side, indexing="ij")
        else:
            g = np.meshgrid(block, side, side, indexing="ij")
        X = np.stack([c.ravel() for c in g], axis=1)
        rho = norm_eval_many(norm, X)
        keep = (rho > 0) & (rho <= radius)
        yield X[keep], rho[keep]


_shell_cache = {}


def _shell_sums(norm, prefactor, radius, t=None):
    """Unit-shell reductions over rho(x) <= radius.

    Returns (geom, series, linf_mass): geom[m-1] = sum over the shell
    rho in (m-1, m] of exp(-s_t(x)) (1 if t is None), series[m-1] the same
    weighted by the unnormalized coupling with the tilt exp(t.x) applied,
    and linf_mass[k] the unnormalized coupling mass on {|x|_inf = k}.
    """
    key = (norm, prefactor, float(radius), None if t is None else tuple(np.round(t, 15)))
    if key in _shell_cache:
        return _shell_cache[key]
    n_shell = int(math.ceil(radius))
    geom = np.zeros(n_shell)
    series = np.zeros(n_shell)
    c_low, _ = linf_equivalence_bounds(norm)
    linf_mass = np.zeros(int(math.floor(radius / c_low)) + 1)
    t_arr = None if t is None else np.asarray(t, dtype=float)
    for X, rho in _lattice_chunks(norm, radius):
        m = np.ceil(rho).astype(int)
        m[m < 1] = 1
        raw = prefactor.raw_of_rho(rho)
        if t_arr is None:
            surch = np.zeros(len(rho))
        else:
            surch = np.maximum(rho - X @ t_arr, 0.0)
        geom += np.bincount(m - 1, weights=np.exp(-surch), minlength=n_shell)[:n_shell]
        if t_arr is None:
            tilted = raw
        elif prefactor.envelope:
            # psi * exp(-surcharge): stable where psi*exp(-rho)*exp(t.x) is not
            tilted = prefactor.psi_of_rho(rho) * np.exp(-surch)
        else:
            tilted = raw * np.exp(X @ t_arr)
        series += np.bincount(m - 1, weights=tilted, minlength=n_shell)[:n_shell]
        kinf = np.abs(X).max(axis=1).astype(int)
        linf_mass += np.bincount(kinf, weights=raw, minlength=len(linf_mass))[: len(linf_mass)]
    out = (geom, series, linf_mass)
    _shell_cache[key] = out
    return out


# ---------------------------------------------------------------------------
# tail bounds for the omitted region rho(x) > R


def _linf_shell_count(d, k):
    return float((2 * k + 1) ** d - (2 * k - 1) ** d)


def _tail_bound_envelope(norm, prefactor, radius):
    """Upper bound on sum over rho(x) > radius of psi(x) exp(-rho(x))."""
    c_low, c_high = linf_equivalence_bounds(norm)
    d = norm.d
    k = int(math.floor(radius / c_high)) + 1
    total = 0.0
    while True:
        r_min = max(radius, c_low * k)
        term = _linf_shell_count(d, k) * prefactor.psi_of_rho(min(r_min, radius)) * math.exp(-r_min)
        total += float(term)
        if c_low * k > radius:
            ratio = math.exp(-c_low) * ((2 * k + 3) / (2 * k + 1)) ** (d - 1)
            if ratio < 1 and term < 1e-3 * max(total, 1e-300):
                total += float(term) * ratio / (1 - ratio)
                return total
        if term == 0.0:
            return total
        k += 1


def _tail_no_envelope(norm, prefactor, radius):
    """(upper, lower) bounds on the omitted mass for envelope=False."""
    c_low, c_high = linf_equivalence_bounds(norm)
    d = norm.d
    if d == 1 and c_low == c_high == 1.0:
        # rho = |x| exactly: the tail is a one-dimensional sum
        r0 = int(math.floor(radius)) + 1
        if prefactor.family == "poly":
            val = 2 * float(zeta(prefactor.alpha, r0))
        else:
            val, x, term = 0.0, r0, 1.0
            while term > 1e-18 * max(val, 1e-300):
                term = 2 * float(prefactor.psi_of_rho(x))
                val += term
                x += 1
        return val, val
    k_up = int(math.floor(radius / c_high)) + 1
    k_lo = int(math.floor(radius / c_low)) + 1

    def shell_bound(kstart, c):
        # sum_{k >= kstart} N_k psi(c*k), closed by an integral
        acc, k = 0.0, kstart
        h = lambda x: _linf_shell_count(d, x) * float(prefactor.psi_of_rho(c * x))
        while k < kstart + 64:
            acc += h(k)
            k += 1
        tail, _ = quad(h, k, np.inf, limit=200)
        return acc + h(k) + tail

    if prefactor.family == "poly" and prefactor.alpha <= d:
        raise NonSummableError("alpha <= d with no exponential envelope")
    return shell_bound(k_up, c_low), shell_bound(k_lo, c_high)


def normalize(norm, prefactor, trunc_radius=None):
    """Build a CouplingSpec with total mass 1 within EPS_NORM.

    The normalizer is the truncated sum over rho(x) <= trunc_radius plus an
    analytic bound on the omitted mass; raises NonSummableError for a
    non-summable prefactor and NormalizationError when the tail estimate is
    too uncertain to meet the EPS_NORM contract.
    """
    if prefactor.family == "poly" and not prefactor.envelope and prefactor.alpha <= norm.d:
        raise NonSummableError(
            f"polynomial prefactor with alpha={prefactor.alpha} <= d={norm.d} "
            "and no exponential envelope is not summable"
        )
    radius = float(trunc_radius if trunc_radius is not None else DEFAULT_TRUNC[norm.d])
    _, series, _ = _shell_sums(norm, prefactor, radius)
    s_r = float(series.sum())
    if prefactor.envelope:
        b_hi = _tail_bound_envelope(norm, prefactor, radius)
        b_lo = 0.0
    else:
        b_hi, b_lo = _tail_no_envelope(norm, prefactor, radius)
    b_mid = 0.5 * (b_hi + b_lo)
    z = s_r + b_mid
    gap = 0.5 * (b_hi - b_lo) / z
    if b_mid / z > 0.5 or gap > EPS_NORM:
        raise NormalizationError(
            f"tail bound {b_mid:.3e} (half-width {gap:.3e}) too loose at "
            f"trunc_radius={radius}; increase the radius"
        )
    return CouplingSpec(
        norm=norm,
        prefactor=prefactor,
        z=z,
        trunc_radius=radius,
        tail_bound=b_mid / z,
        norm_gap=gap,
    )


def truncated_mass(spec):
    """sum over rho(x) <= trunc_radius of J_x (normalized units)."""
    _, series, _ = _shell_sums(spec.norm, spec.prefactor, spec.trunc_radius)
    return float(series.sum()) / spec.z


# ---------------------------------------------------------------------------
# tilted series and saturation classification

CONVERGES = "Converges"
DIVERGES = "Diverges"
INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class SeriesVerdict:
    radii: tuple
    partial_sums: tuple
    shell_sums: tuple
    verdict: str
    diagnostic: float  # fitted growth exponent of the shell sums
    closed_form: str


def _fit_exponent(values, radius):
    """Log-log slope of unit-shell sums over the top portion of the range."""
    m = np.arange(1, len(values) + 1, dtype=float)
    lo = max(4, int(radius / 8))
    win = (m >= lo) & (values > 0)
    if win.sum() < 4:
        win = values > 0
    return float(np.polyfit(np.log(m[win]), np.log(values[win]), 1)[0])


def sigma_geometry(norm, t, radius=None):
    """Growth exponent sigma of the shell sums of exp(-s_t(x)).

    For a polynomial prefactor rho^(-alpha), J(t) converges exactly when
    sigma - alpha < -1; computed once per (norm, t) and cached.
    """
    radius = float(radius if radius is not None else DEFAULT_TRUNC[norm.d])
    pref = polynomial(1.0)  # any prefactor: only the geom reduction is used
    geom, _, _ = _shell_sums(norm, pref, radius, t=t)
    return _fit_exponent(geom, radius)


def _closed_form_verdict(spec, t):
    if spec.prefactor.family == "stretched":
        return CONVERGES
    sigma = sigma_geometry(spec.norm, t, spec.trunc_radius)
    return CONVERGES if sigma - spec.prefactor.alpha < -1 - 1e-6 else DIVERGES


def j_series(spec, t, r_schedule=None):
    """Partial sums of J(t) = sum_x exp(t.x) J_x over rho(x) <= R.

    The numeric verdict comes from the fitted shell-sum exponent with a
    DELTA_FIT margin around -1; the closed-form family classification
    overrides it and the two must not contradict each other.
    """
    if not spec.prefactor.envelope:
        raise ValueError("j_series requires the exponential envelope")
    t_arr = t.t_arr() if hasattr(t, "t_arr") else np.asarray(t, dtype=float)
    _, series, _ = _shell_sums(spec.norm, spec.prefactor, spec.trunc_radius, t=t_arr)
    series = series / spec.z
    cum = np.cumsum(series)
    if r_schedule is None:
        r_schedule = [2 ** k for k in range(1, int(math.log2(spec.trunc_radius)) + 1)]
    radii = [r for r in r_schedule if r <= len(cum)]
    partial = [float(cum[r - 1]) for r in radii]
    shells = [float(series[r - 1]) for r in radii]
    slope = _fit_exponent(series, spec.trunc_radius)
    if slope < -1 - DELTA_FIT:
        numeric = CONVERGES
    elif slope >= -1 + DELTA_FIT:
        numeric = DIVERGES
    else:
        numeric = INCONCLUSIVE
    closed = _closed_form_verdict(spec, t_arr)
    if (numeric, closed) in ((CONVERGES, DIVERGES), (DIVERGES, CONVERGES)):
        raise VerdictConflict(
            f"numeric fit {numeric} (slope {slope:.3f}) contradicts closed form {closed}"
        )
    return SeriesVerdict(
        radii=tuple(radii),
        partial_sums=tuple(partial),
        shell_sums=tuple(shells),
        verdict=closed,
        diagnostic=slope,
        closed_form=closed,
    )


SATURATION_POSITIVE = "SaturationPositive"
SATURATION_ZERO = "SaturationZero"


def saturation_criterion(spec, s, face_samples=5):
    """Does a saturation regime exist in direction s?

    Scans a finite sample of the dual face; SaturationPositive as soon as
    one tilt converges, SaturationZero when every sampled tilt diverges by
    the closed form.  The finite face sample approximates the existential
    quantifier over the (possibly continuous) dual face.
    """
    if not spec.prefactor.envelope:
        raise ValueError("saturation criterion requires the exponential envelope")
    verdicts = []
    for dv in sample_dual_face(spec.norm, s, face_samples):
        v = j_series(spec, dv)
        verdicts.append((dv, v))
        if v.verdict == CONVERGES:
            return SATURATION_POSITIVE, verdicts
    if all(v.verdict == DIVERGES for _, v in verdicts):
        return SATURATION_ZERO, verdicts
    return INCONCLUSIVE, verdicts


def alpha_sat_estimate(norm, s, alpha_grid, face_samples=5, trunc_radius=None):
    """Bracket the saturation threshold exponent on a grid of alpha.

    Returns (alpha_lo, alpha_hi, estimate): the last diverging and first
    converging grid points and the estimate alpha_lo (the threshold is
    approached from the diverging side).  Raises if no flip is found.
    """
    alphas = sorted(float(a) for a in alpha_grid)
    verdicts = []
    for a in alphas:
        spec = normalize(norm, polynomial(a), trunc_radius=trunc_radius)
        v, _ = saturation_criterion(spec, s, face_samples)
        verdicts.append(v)
    flips = [
        i
        for i in range(len(alphas) - 1)
        if verdicts[i] == SATURATION_ZERO and verdicts[i + 1] == SATURATION_POSITIVE
    ]
    if not flips:
        raise RuntimeError(f"no saturation flip found on grid {alphas}: {verdicts}")
    if len(flips) > 1 or any(
        verdicts[i] == SATURATION_POSITIVE and verdicts[j] == SATURATION_ZERO
        for i in range(len(alphas))
        for j in range(i + 1, len(alphas))
    ):
        raise VerdictConflict(f"non-monotone verdicts over alpha grid: {verdicts}")
    i = flips[0]
    return alphas[i], alphas[i + 1], alphas[i]


# ---------------------------------------------------------------------------
# tail mass F and its interpolated inverse


def tail_mass_table(spec):
    """F(r) = sum over |x|_inf >= r of J_x on integer r (normalized)."""
    _, _, linf_mass = _shell_sums(spec.norm, spec.prefactor, spec.trunc_radius)
    mass = linf_mass / spec.z
    # everything strictly beyond the enumerated box carries tail_bound
    above = np.concatenate([np.cumsum(mass[::-1])[::-1], [0.0]]) + spec.tail_bound
    return above  # above[r] = F(r), r = 0 .. len(mass)


def tail_mass(spec, r):
    """F(r); F(0) = 1 by normalization, strictly decreasing beyond."""
    if r < 0:
        raise ValueError("r must be >= 0")
    table = tail_mass_table(spec)
    ri = int(math.ceil(r))
    if ri >= len(table):
        raise ValueError(f"r={r} beyond truncation box ({len(table) - 1})")
    if ri == r:
        return float(table[ri])
    lo, hi = table[ri - 1], table[ri]
    return float(lo + (hi - lo) * (r - (ri - 1)))


def tail_inverse(spec, u):
    """F^{-1}(u) for u in (0, 1], extended by linear interpolation."""
    if not (0 < u <= 1):
        raise ValueError("u must be in (0, 1]")
    table = tail_mass_table(spec)
    if u >= table[1]:
        return 1.0
    if u < table[-2]:
        raise ValueError(f"u={u:.3e} below resolvable tail {table[-2]:.3e}")
    r = int(np.searchsorted(-table, -u) - 1)  # largest r with F(r) >= u
    f_r, f_r1 = table[r], table[r + 1]
    return float(r + (f_r - u) / (f_r - f_r1))


def psi_property_constants(spec):
    """The (a, b) constants of the prefactor splitting inequality
    psi(u) * prod psi(v_i) <= b^k psi(u + sum v) * prod psi(v_i)^a."""
    pref = spec.prefactor
    if pref.family == "poly":
        return 1.0, 2.0 ** pref.alpha
    a = 2.0 - 2.0 ** pref.eta
    c_psi = 1.0 / spec.z
    return a, c_psi ** (2.0 ** pref.eta - 1.0)
