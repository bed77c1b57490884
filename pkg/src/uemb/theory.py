"""Closed-form distance/kernel maps and the probability-bound calculus.

The squared-distance map of an embedding y = h(Ax + w) with folded power
spectrum {P_k} and projected-distance characteristic function phi is

    g(d) = 2 sum_{k>=1} P_k (1 - phi(2 pi k | d)),

its kernel is K(d) = sum_{k>=0} P_k phi(2 pi k | d), and the two satisfy
K(d) + g(d)/2 = sum_k P_k identically.  The engine here evaluates both
through one adaptively truncated sum of S = sum_{k>=1} P_k phi(2 pi k | d),
using exact AC totals for the analytic map kinds so the identity holds to
rounding and g(0) = 0 exactly.

The phi argument is unified at 2 pi k for both maps; a quadrature oracle of
E[(y - y')^2] arbitrates that convention in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import spence

from .maps import analytic_spectrum_kind, make_sawtooth
from .randproj import ProjectionSpec, char_fn

_K_CAP = 1 << 21
_SQRT2 = math.sqrt(2.0)

SATURATION_FRACTION = 0.95

# default certification tolerance for spectra of quantized (numeric) kinds
DEFAULT_NUMERIC_SPECTRUM_TOL = 5e-4


def _li2(x):
    """Dilogarithm Li_2(x) for x in [0, 1]."""
    return float(spence(1.0 - x))


# ---------------------------------------------------------------------------
# Folded-spectrum descriptors feeding the series engine


class _Desc:
    ac_total: float
    dc: float
    tail: float

    def powers(self, lo, hi):  # harmonics in [lo, hi], ascending
        raise NotImplementedError


class _SquareDesc(_Desc):
    ac_total = 0.25
    dc = 0.25
    tail = 0.0

    def powers(self, lo, hi):
        lo = lo if lo % 2 == 1 else lo + 1
        ks = np.arange(lo, hi + 1, 2, dtype=np.float64)
        return ks, 2.0 / (np.pi * ks) ** 2


class _SawtoothDesc(_Desc):
    ac_total = 1.0 / 6.0
    dc = 0.0
    tail = 0.0

    def powers(self, lo, hi):
        ks = np.arange(lo, hi + 1, dtype=np.float64)
        return ks, 1.0 / (np.pi * ks) ** 2


class _FiniteDesc(_Desc):
    """Explicit (k, P_k) arrays: mixtures and certified numeric spectra."""

    def __init__(self, ks, p, dc=0.0, tail=0.0):
        self.ks = np.asarray(ks, dtype=np.float64)
        self.p = np.asarray(p, dtype=np.float64)
        self.ac_total = float(np.sum(self.p))
        self.dc = float(dc)
        self.tail = float(tail)


def _descriptor(map_, spectrum_tol=None):
    kind = analytic_spectrum_kind(map_)
    if kind == "square":
        return _SquareDesc()
    if kind == "sawtooth":
        return _SawtoothDesc()
    if kind == "mixture":
        terms = map_.params["terms"]
        return _FiniteDesc(
            [k for k, _ in terms], [a * a / 2.0 for _, a in terms]
        )
    spectrum = map_.power_coeffs(spectrum_tol or DEFAULT_NUMERIC_SPECTRUM_TOL)
    ac = spectrum.k >= 1
    return _FiniteDesc(
        spectrum.k[ac], spectrum.power[ac], spectrum.dc_power, spectrum.tail_bound
    )


def _phi_sum(desc, spec, d, rtol=1e-12):
    """S = sum_{k>=1} P_k phi(2 pi k | d) with a certified truncation bound.

    Returns (S_hat, err) with |S - S_hat| <= err; exploits that phi is
    nonincreasing in k for both families, so the remainder past K is at
    most tail_P(K) * phi(2 pi (K+1) | d).
    """
    if isinstance(desc, _FiniteDesc):
        s = float(desc.p @ char_fn(spec, 2.0 * np.pi * desc.ks, d))
        return s, desc.tail  # unknown-tail harmonics bounded by phi <= 1
    if d == 0.0:
        return desc.ac_total, 0.0
    s = 0.0
    partial = 0.0
    lo, block = 1, 512
    while True:
        hi = min(lo + block - 1, _K_CAP)
        ks, powers = desc.powers(lo, hi)
        if len(ks):
            s += float(powers @ char_fn(spec, 2.0 * np.pi * ks, d))
            partial += float(np.sum(powers))
        tail_p = max(desc.ac_total - partial, 0.0)
        rem = tail_p * char_fn(spec, 2.0 * np.pi * (hi + 1), d)
        if rem <= rtol * max(s, 1e-3 * desc.ac_total) or hi >= _K_CAP:
            return s + rem / 2.0, rem / 2.0
        lo = hi + 1
        block = min(block * 4, 1 << 18)


def _dphi_abs(spec, ks, d):
    """|d phi(2 pi k | d) / dd|, vectorized over k."""
    xi = 2.0 * np.pi * np.asarray(ks, dtype=np.float64)
    phi = char_fn(spec, xi, d)
    if spec.family == "gaussian":
        return (spec.scale ** 2) * xi ** 2 * d * phi
    return spec.scale * np.abs(xi) * phi


def _phi_deriv_sum(desc, spec, d, rtol=1e-10):
    """sum_{k>=1} P_k |d phi / dd|; positive, equals g'(d)/2."""
    if isinstance(desc, _FiniteDesc):
        return float(desc.p @ _dphi_abs(spec, desc.ks, d))
    if d == 0.0:
        if spec.family == "gaussian":
            return 0.0
        return math.inf  # cauchy maps have log-divergent slope at 0
    if spec.family == "gaussian":
        k_peak = 1.0 / (math.pi * spec.scale * d * _SQRT2)
    else:
        k_peak = 1.0
    s = 0.0
    lo, block = 1, 512
    while True:
        hi = min(lo + block - 1, _K_CAP)
        ks, powers = desc.powers(lo, hi)
        contrib = float(powers @ _dphi_abs(spec, ks, d)) if len(ks) else 0.0
        s += contrib
        if (hi >= 2 * k_peak and contrib <= rtol * max(s, 1e-300)) or hi >= _K_CAP:
            return s
        lo = hi + 1
        block = min(block * 4, 1 << 18)


# ---------------------------------------------------------------------------
# Distance-map models

FLAVORS = ("sq_l2", "sqrt", "kernel")


class DistanceMapModel:
    """Callable distance/kernel map of one (map, spec) pair.

    flavor selects the curve: "sq_l2" is g(d) for the mean squared
    embedding distance, "sqrt" is sqrt(g) for the mean l2 distance, and
    "kernel" is K(d) for the mean inner product.  D0 is the saturation
    radius: the smallest d where the (monotone) curve reaches 95% of its
    asymptote; beyond it, inversion only reports "farther than D0".
    """

    def __init__(self, map_, spec, flavor="sq_l2", spectrum_tol=None, series_rtol=1e-12):
        if flavor not in FLAVORS:
            raise ValueError("flavor must be one of %r" % (FLAVORS,))
        if not isinstance(spec, ProjectionSpec):
            raise TypeError("spec must be a ProjectionSpec")
        self.map = map_
        self.spec = spec
        self.flavor = flavor
        self.series_rtol = series_rtol
        self._desc = _descriptor(map_, spectrum_tol)
        self._d0 = None

    # -- raw curves ---------------------------------------------------------

    @property
    def ac_power(self):
        return self._desc.ac_total

    @property
    def total_power(self):
        """Certified sum of all P_k including the spectrum tail."""
        return self._desc.dc + self._desc.ac_total + self._desc.tail

    @property
    def tail_bound(self):
        return self._desc.tail

    @property
    def g_inf(self):
        """Asymptote of g: 2 * sum_{k>=1} P_k."""
        return 2.0 * self._desc.ac_total

    def g(self, d):
        """g(d) = 2 sum_{k>=1} P_k (1 - phi(2 pi k | d)); g(0) = 0 exactly."""
        if d < 0:
            raise ValueError("d must be nonnegative")
        if d == 0.0:
            return 0.0
        s, _ = _phi_sum(self._desc, self.spec, d, self.series_rtol)
        return 2.0 * max(self._desc.ac_total - s, 0.0)

    def g_sqrt(self, d):
        return math.sqrt(self.g(d))

    def kernel(self, d):
        """K(d) = sum_{k>=0} P_k phi(2 pi k | d); K(0) is the total power."""
        if d < 0:
            raise ValueError("d must be nonnegative")
        if d == 0.0:
            return self._desc.dc + self._desc.ac_total
        s, _ = _phi_sum(self._desc, self.spec, d, self.series_rtol)
        return self._desc.dc + s

    # -- flavored view ------------------------------------------------------

    def value(self, d):
        if self.flavor == "sq_l2":
            return self.g(d)
        if self.flavor == "sqrt":
            return self.g_sqrt(d)
        return self.kernel(d)

    def curve(self, ds):
        return np.array([self.value(float(d)) for d in np.asarray(ds).ravel()])

    @property
    def value_inf(self):
        if self.flavor == "sq_l2":
            return self.g_inf
        if self.flavor == "sqrt":
            return math.sqrt(self.g_inf)
        return self._desc.dc

    def derivative(self, d):
        """Slope of the flavored curve (analytic series, not differences)."""
        if d < 0:
            raise ValueError("d must be nonnegative")
        gp = 2.0 * _phi_deriv_sum(self._desc, self.spec, d)
        if self.flavor == "sq_l2":
            return gp
        if self.flavor == "sqrt":
            gv = self.g(d)
            if gv == 0.0:
                return math.inf
            return gp / (2.0 * math.sqrt(gv))
        raise ValueError("derivative is defined for the monotone flavors only")

    # -- saturation & inversion ---------------------------------------------

    def _require_monotone_flavor(self):
        if self.flavor == "kernel":
            raise ValueError("kernel flavor is decreasing; use sq_l2 or sqrt")

    @property
    def D0(self):
        """Smallest d with value(d) >= 0.95 * value_inf (bisection)."""
        self._require_monotone_flavor()
        if self._d0 is None:
            target = SATURATION_FRACTION * self.value_inf
            hi = 1.0 / self.spec.scale
            for _ in range(200):
                if self.value(hi) >= target:
                    break
                hi *= 2.0
            else:
                raise RuntimeError("saturation radius not bracketed")
            lo = 0.0
            for _ in range(100):
                mid = 0.5 * (lo + hi)
                if self.value(mid) >= target:
                    hi = mid
                else:
                    lo = mid
            self._d0 = hi
            self._check_monotone_grid()
        return self._d0

    def _check_monotone_grid(self, n=65, slack=1e-12):
        ds = np.linspace(0.0, self._d0, n)
        vals = self.curve(ds)
        if np.any(np.diff(vals) < -slack):
            raise RuntimeError("distance map is not monotone on [0, D0]")

    def invert(self, gval, rel_tol=1e-10):
        """Signal distance with value(d) = gval; see invert_map."""
        self._require_monotone_flavor()
        if gval < 0:
            return 0.0, "below_range"
        d0 = self.D0
        if gval >= SATURATION_FRACTION * self.value_inf:
            return d0, "saturated"
        if gval == 0.0:
            return 0.0, "unique"
        lo, hi = 0.0, d0
        while hi - lo > rel_tol * max(hi, 1e-300):
            mid = 0.5 * (lo + hi)
            if self.value(mid) >= gval:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi), "unique"


def distance_map(map_, spec, d, spectrum_tol=None):
    """g(d) for one (map, spec) pair; see DistanceMapModel.g."""
    return DistanceMapModel(map_, spec, spectrum_tol=spectrum_tol).g(d)


def kernel_map(map_, spec, d, spectrum_tol=None):
    """K(d) for one (map, spec) pair; see DistanceMapModel.kernel."""
    return DistanceMapModel(map_, spec, spectrum_tol=spectrum_tol).kernel(d)


def invert_map(model, gval):
    return model.invert(gval)


# ---------------------------------------------------------------------------
# Binary / multibit universal closed forms (independent of the engine)


@dataclass(frozen=True)
class BinaryMapBounds:
    lower: float      # 1/2 - (1/2) exp(-(pi sigma d / sqrt2 Delta)^2)
    upper_exp: float  # 1/2 - (4/pi^2) exp(-(pi sigma d / sqrt2 Delta)^2)
    upper_lin: float  # sqrt(2/pi) sigma d / Delta


def universal_binary_map(d, sigma, Delta):
    """Hamming distance map of the binary universal embedding, with bounds.

    Evaluates  g(d) = 1/2 - sum_{i>=0} exp(-((2i+1) pi sigma d / (sqrt2
    Delta))^2) / (pi (i + 1/2))^2  by adaptive summation, plus the
    lower/exponential-upper/linear-upper bound triple.
    """
    if sigma <= 0 or Delta <= 0:
        raise ValueError("sigma and Delta must be positive")
    if d < 0:
        raise ValueError("d must be nonnegative")
    s = sigma * d / Delta
    e1 = math.exp(-((math.pi * s) ** 2) / 2.0)
    bounds = BinaryMapBounds(
        lower=0.5 - 0.5 * e1,
        upper_exp=0.5 - (4.0 / math.pi ** 2) * e1,
        upper_lin=math.sqrt(2.0 / math.pi) * s,
    )
    if d == 0.0:
        return 0.0, bounds
    acc = 0.0
    partial = 0.0
    lo, block = 1, 512
    c = (math.pi * s) ** 2 / 2.0
    while True:
        hi = min(lo + block - 1, _K_CAP)
        k = np.arange(lo if lo % 2 == 1 else lo + 1, hi + 1, 2, dtype=np.float64)
        if len(k):
            coeff = 4.0 / (math.pi * k) ** 2
            acc += float(coeff @ np.exp(-c * k * k))
            partial += float(np.sum(coeff))
        tail_p = max(0.5 - partial, 0.0)
        rem = tail_p * math.exp(-c * (hi + 1) ** 2) if c * (hi + 1) ** 2 < 700 else 0.0
        if rem <= 1e-14 * max(acc, 1e-3) or hi >= _K_CAP:
            acc += rem / 2.0
            break
        lo = hi + 1
        block = min(block * 4, 1 << 18)
    return min(max(0.5 - acc, 0.0), 0.5), bounds


def universal_binary_map_l1(d, gamma, Delta):
    """l1 distance map of the Cauchy binary universal embedding.

    Exact dilogarithm form of  1/2 - sum_i exp(-(2i+1) pi gamma d / Delta)
    / (pi (i+1/2))^2:  the odd-k sum of q^k / k^2 is Li2(q) - Li2(q^2)/4.
    """
    if gamma <= 0 or Delta <= 0:
        raise ValueError("gamma and Delta must be positive")
    if d < 0:
        raise ValueError("d must be nonnegative")
    if d == 0.0:
        return 0.0
    q = math.exp(-math.pi * gamma * d / Delta)
    odd_sum = _li2(q) - 0.25 * _li2(q * q)
    return min(max(0.5 - (4.0 / math.pi ** 2) * odd_sum, 0.0), 0.5)


def multibit_map(d, spec, bits, Delta):
    """Distance map of the (unquantized-sawtooth) B-bit universal embedding.

    1/3 - 2 sum_{k>0} (1/(pi k)^2) phi(2 pi k | d) at effective scale
    spec.scale / (2^B Delta).  The B-bit quantized embedding obeys this map
    inflated per the quantized-embedding theorem with E_Q =
    multibit_quantization_error(bits).
    """
    if int(bits) != bits or not (1 <= bits <= 16):
        raise ValueError("bits must be an integer in [1, 16]")
    if Delta <= 0:
        raise ValueError("Delta must be positive")
    scaled = ProjectionSpec(spec.family, spec.scale / (2 ** int(bits) * Delta))
    return DistanceMapModel(make_sawtooth(), scaled).g(d)


def multibit_quantization_error(bits, flavor="sqrt"):
    """Worst-case per-coordinate quantization error of the B-bit map.

    Half a quantizer step of the range-sqrt(2) sawtooth: sqrt(2) 2^{-B-1}
    on the metric (sqrt) guarantee, its square on the sq_l2 guarantee.
    """
    e = _SQRT2 * 2.0 ** (-int(bits) - 1)
    return e * e if flavor == "sq_l2" else e


# ---------------------------------------------------------------------------
# Ambiguity & subadditivity


def ambiguity(model, d_W, eps, delta):
    """(eps + delta d_W) / g'(d~) at d~ = invert(d_W); inf when saturated."""
    if eps < 0 or delta < 0:
        raise ValueError("eps and delta must be nonnegative")
    num = eps + delta * d_W
    d_est, status = model.invert(d_W)
    if status == "saturated":
        return math.inf
    if num == 0.0:
        return 0.0
    slope = model.derivative(d_est)
    if slope == 0.0:
        return math.inf
    if math.isinf(slope):
        return 0.0
    return num / slope


@dataclass(frozen=True)
class SubadditivityReport:
    worst_violation: float
    worst_pair: tuple
    passed: bool


def check_subadditivity(g, eps, delta, grid, slack=1e-9):
    """Worst violation of (1-2eps) g(a+b) - 3delta <= g(a) + g(b) on a grid.

    ``grid`` is either an iterable of (a, b) pairs or a 1-D array whose
    cartesian square is scanned.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim == 1:
        pairs = [(a, b) for a in grid for b in grid]
    else:
        pairs = [tuple(p) for p in grid]
    worst = -math.inf
    worst_pair = None
    cache = {}

    def gv(x):
        if x not in cache:
            cache[x] = g(x)
        return cache[x]

    for a, b in pairs:
        if a < 0 or b < 0:
            raise ValueError("grid points must be nonnegative")
        v = (1.0 - 2.0 * eps) * gv(a + b) - 3.0 * delta - gv(a) - gv(b)
        if v > worst:
            worst, worst_pair = v, (a, b)
    return SubadditivityReport(worst, worst_pair, worst <= slack)


# ---------------------------------------------------------------------------
# Probability-bound calculators


@dataclass(frozen=True)
class BoundReport:
    """Failure-probability upper bound with its regime echoed.

    ``probability`` is clamped to [0, 1]; ``vacuous`` marks bounds that
    cannot certify anything (>= 1).  ``extras`` carries derived constants
    (r, c1, ...).
    """

    probability: float
    exponent: float
    vacuous: bool
    params: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)


def _clamped_prob(lead, exponent):
    if exponent >= 700.0:
        return 1.0
    return min(1.0, lead * math.exp(exponent))

POINTCLOUD_FLAVORS = ("sq_l2", "sqrt_loose", "sqrt_tight", "kernel", "norm")


def pointcloud_bound(Q, M, eps, hbar, flavor):
    """Finite point-cloud failure bounds for the h(Ax+w) embeddings.

    Exponents: sq_l2   2 ln Q - 2 M eps^2 / hbar^4
               sqrt_loose 2 ln Q - 2 M (eps/hbar)^4
               sqrt_tight same exponent as sq_l2, valid for eps <= 1
               kernel  2 ln Q - (8/9) M eps^2 / hbar^4
               norm    ln Q - 2 M eps^2 / hbar^4 (leading factor 2)
    """
    if flavor not in POINTCLOUD_FLAVORS:
        raise ValueError("flavor must be one of %r" % (POINTCLOUD_FLAVORS,))
    if Q < 2 or M < 1 or eps <= 0 or hbar <= 0:
        raise ValueError("require Q >= 2, M >= 1, eps > 0, hbar > 0")
    if flavor == "sqrt_tight" and eps > 1:
        raise ValueError("sqrt_tight flavor requires eps <= 1")
    lead = 1.0
    if flavor == "sq_l2" or flavor == "sqrt_tight":
        expo = 2.0 * math.log(Q) - 2.0 * M * eps ** 2 / hbar ** 4
    elif flavor == "sqrt_loose":
        expo = 2.0 * math.log(Q) - 2.0 * M * (eps / hbar) ** 4
    elif flavor == "kernel":
        expo = 2.0 * math.log(Q) - (8.0 / 9.0) * M * eps ** 2 / hbar ** 4
    else:
        expo = math.log(Q) - 2.0 * M * eps ** 2 / hbar ** 4
        lead = 2.0
    prob = _clamped_prob(lead, expo)
    return BoundReport(
        probability=prob,
        exponent=expo,
        vacuous=prob >= 1.0,
        params={"Q": Q, "M": M, "eps": eps, "hbar": hbar, "flavor": flavor},
    )


def continuous_extension_bound(E_r, M, w_value, c, delta, K_f, K_g, alpha):
    """Infinite-set bound for Lipschitz embedding maps.

    Covering radius r = alpha / ((1+delta) 2 K_g + 2 K_f); failure bound
    c exp(2 E_r - M w); the additive constant inflates to eps + alpha.
    """
    if c <= 0 or w_value <= 0 or alpha <= 0 or M < 1 or E_r < 0:
        raise ValueError("constants must be positive (E_r >= 0)")
    if delta < 0 or K_f < 0 or K_g < 0:
        raise ValueError("delta, K_f, K_g must be nonnegative")
    denom = (1.0 + delta) * 2.0 * K_g + 2.0 * K_f
    if denom == 0:
        raise ZeroDivisionError("K_f and K_g cannot both be zero")
    r = alpha / denom
    expo = 2.0 * E_r - M * w_value
    prob = _clamped_prob(c, expo)
    return BoundReport(
        probability=prob,
        exponent=expo,
        vacuous=prob >= 1.0,
        params={
            "E_r": E_r, "M": M, "w": w_value, "c": c,
            "delta": delta, "K_f": K_f, "K_g": K_g, "alpha": alpha,
        },
        extras={"r": r, "eps_inflation": alpha},
    )


def discontinuous_extension_bound(E_r_half, M, w_value, c, P_T, T_max, P_F, c0):
    """Infinite-set bound for T-part Lipschitz (e.g. quantized) maps.

    c1 = sum_{T=2}^{T_max} P_T (1 + c0) ln T; failure bound
    c e^{2 E_{r/2} + c1 M - M w} + T_max e^{-2 c0^2 M} + P_F.  The first
    term decays in M only when c1 < w, which for the binary universal map
    (w = 2 eps^2, P_2 = 1) needs eps > sqrt((1+c0) ln 2 / 2).
    """
    if int(T_max) != T_max or T_max < 2:
        raise ValueError("T_max must be an integer >= 2")
    P_T = list(P_T)
    if len(P_T) != T_max - 1:
        raise ValueError("P_T must list T = 2..T_max (length T_max-1)")
    if any(p < 0 or p > 1 for p in P_T) or not (0 <= P_F <= 1):
        raise ValueError("P_T entries and P_F must lie in [0, 1]")
    if c <= 0 or w_value <= 0 or c0 < 0 or M < 1 or E_r_half < 0:
        raise ValueError("invalid constants")
    c1 = sum(p * (1.0 + c0) * math.log(T) for p, T in zip(P_T, range(2, T_max + 1)))
    expo = 2.0 * E_r_half + c1 * M - M * w_value
    term1 = _clamped_prob(c, expo)
    term2 = T_max * math.exp(-2.0 * c0 ** 2 * M)
    prob = min(1.0, term1 + term2 + P_F)
    return BoundReport(
        probability=prob,
        exponent=expo,
        vacuous=prob >= 1.0,
        params={
            "E_r_half": E_r_half, "M": M, "w": w_value, "c": c,
            "T_max": T_max, "P_F": P_F, "c0": c0,
        },
        extras={"c1": c1, "no_decay": c1 >= w_value},
    )


def binary_decay_threshold(c0=0.0):
    """Smallest eps with exponential decay when P_2 = 1 and w = 2 eps^2."""
    return math.sqrt((1.0 + c0) * math.log(2.0) / 2.0)


def quantized_bound_inflation(eps, E_Q):
    """Additive constant after quantizing an embedding: eps + 2 E_Q."""
    if eps < 0 or E_Q < 0:
        raise ValueError("eps and E_Q must be nonnegative")
    return eps + 2.0 * E_Q


def rate_form(eps, delta, R, M, S):
    """Additive term at fixed rate R = M B: eps + 2^{-R/M+1} sqrt(M) S."""
    if R < M:
        raise ValueError("rate R must be at least M (>= 1 bit per dimension)")
    if eps < 0 or delta < 0 or S <= 0 or M < 1:
        raise ValueError("invalid parameters")
    return eps + 2.0 ** (-R / M + 1.0) * math.sqrt(M) * S


def p2_bound(N, sigma, r, Delta):
    """Boundary-crossing bound: sigma r sqrt(N+1)/Delta + tail term.

    The tail term exp(-(Delta/(sigma r sqrt N) - 1)^2 N / 6) is only a
    valid concentration bound when Delta/(sigma r sqrt N) >= 1; below that
    it is reported as 1.  Meaningful (< 1) when r < Delta/(sigma sqrt(N+1)).
    """
    if N < 1 or sigma <= 0 or r <= 0 or Delta <= 0:
        raise ValueError("all parameters must be positive")
    beta = Delta / (sigma * r * math.sqrt(N)) - 1.0
    tail = math.exp(-beta * beta * N / 6.0) if beta >= 0 else 1.0
    return sigma * r * math.sqrt(N + 1.0) / Delta + tail


def p2_meaningful_radius(N, sigma, Delta):
    """Largest ball radius for which p2_bound can fall below 1."""
    return Delta / (sigma * math.sqrt(N + 1.0))


def p2_monte_carlo(N, sigma, r, Delta, trials, rs, chunk=2048):
    """Monte Carlo estimate of the boundary-crossing probability P_2.

    Each trial projects a ball of radius r/2 through a Gaussian row
    (interval of length ||a|| r) dropped uniformly against the Delta-grid;
    counts grid crossings.  Deterministic given rs; trials are indexed so
    partitioning cannot change the estimate.
    """
    if N < 1 or sigma <= 0 or r <= 0 or Delta <= 0:
        raise ValueError("all parameters must be positive")
    trials = int(trials)
    if trials < 1:
        raise ValueError("trials must be positive")
    N = int(N)
    crossings = 0
    for lo in range(0, trials, chunk):
        n = min(chunk, trials - lo)
        z = rs.gaussian("montecarlo:p2_rows", n * N, start=lo * N).reshape(n, N)
        norms = np.linalg.norm(sigma * z, axis=1)
        u = Delta * rs.uniform("montecarlo:p2_offsets", n, start=lo)
        crossings += int(np.count_nonzero(u + norms * r >= Delta))
    return crossings / trials
