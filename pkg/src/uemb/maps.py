"""Catalog of period-1 embedding nonlinearities and their power spectra.

Every map h(t) here has period 1 and a bounded codomain.  What the rest of
the library consumes is the *folded* one-sided power spectrum

    P_0 = |H_0|^2,     P_k = |H_k|^2 + |H_-k|^2 = 2|H_k|^2   (k >= 1),

so that Parseval reads  sum_k P_k = int_0^1 h(t)^2 dt  and the squared-
distance map of an embedding built on h saturates at 2 * sum_{k>=1} P_k.

Discontinuity convention: maps are right-continuous at bin edges (a bin's
value holds from its left endpoint).  Dither makes the convention measure-
zero irrelevant, but determinism requires one choice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

SQRT2 = math.sqrt(2.0)

# Hard ceiling on the number of retained harmonics in a certified spectrum.
KMAX_CAP = 2 ** 16


class SpectrumToleranceError(RuntimeError):
    """Requested spectrum tail tolerance is unreachable within the kmax cap."""


def _frac(t):
    t = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(t)):
        raise ValueError("map argument must be finite")
    return np.mod(t, 1.0)


@dataclass(frozen=True)
class PowerSpectrum:
    """Certified folded power spectrum of a periodic map.

    ``k`` and ``power`` hold the nonzero coefficients (k ascending, k=0 is
    the DC power when present).  ``tail_bound`` bounds the power above the
    largest retained harmonic, so total_power = sum(power) + tail_bound up
    to the certification tolerance.
    """

    k: np.ndarray
    power: np.ndarray
    tail_bound: float
    total_power: float

    def __post_init__(self):
        k = np.asarray(self.k, dtype=np.int64)
        p = np.asarray(self.power, dtype=np.float64)
        if k.shape != p.shape:
            raise ValueError("k and power must have equal length")
        if len(k) and (np.any(np.diff(k) <= 0) or k[0] < 0):
            raise ValueError("k must be nonnegative and strictly increasing")
        if np.any(p < 0) or self.tail_bound < 0:
            raise ValueError("powers and tail bound must be nonnegative")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "power", p)

    @property
    def coeffs(self):
        return list(zip(self.k.tolist(), self.power.tolist()))

    @property
    def ac_power(self):
        """Certified sum of P_k over k >= 1 (excludes DC and tail)."""
        mask = self.k >= 1
        return float(np.sum(self.power[mask]))

    @property
    def dc_power(self):
        return float(self.power[0]) if len(self.k) and self.k[0] == 0 else 0.0


class PeriodicMap:
    """A period-1 scalar map h(t); immutable after construction.

    Instances evaluate vectorized via ``__call__`` and expose their exact
    codomain bounds.  Construction goes through the ``make_*`` /
    ``quantize_map`` factories below.
    """

    def __init__(self, kind, params, value_range, is_binary=False):
        self.kind = kind
        self.params = dict(params)
        self.value_range = (float(value_range[0]), float(value_range[1]))
        self.is_binary = bool(is_binary)
        self._pieces = None
        self._spectrum_cache = {}

    @property
    def hbar(self):
        """Codomain width sup h - inf h."""
        lo, hi = self.value_range
        return hi - lo

    @property
    def name(self):
        """Config-file selector string for this map."""
        if self.kind == "square":
            return "square"
        if self.kind == "sawtooth":
            return "sawtooth"
        if self.kind == "multibit":
            return "multibit:B=%d" % self.params["B"]
        if self.kind == "mixture":
            terms = ",".join(
                "%d:%s" % (k, repr(float(a))) for k, a in self.params["terms"]
            )
            return "mixture:" + terms
        if self.kind == "quantized":
            return "quantized:%s:B=%d" % (self.params["inner"].name, self.params["B"])
        raise AssertionError(self.kind)

    def __repr__(self):
        return "PeriodicMap(%s)" % self.name

    def __call__(self, t):
        tau = _frac(t)
        if self.kind == "square":
            out = np.where(tau < 0.5, 1.0, 0.0)
        elif self.kind == "sawtooth":
            out = SQRT2 * (tau - 0.5)
        elif self.kind == "mixture":
            out = np.zeros_like(tau)
            for k, a in self.params["terms"]:
                out = out + a * np.sin((2.0 * np.pi * k) * tau)
        elif self.kind in ("multibit", "quantized"):
            inner = self.params["inner"]
            out = _quantize_values(inner(tau), inner.value_range, self.params["B"])
        else:
            raise AssertionError(self.kind)
        if np.ndim(t) == 0:
            return float(out)
        return out

    # -- spectrum -----------------------------------------------------------

    def power_coeffs(self, tol):
        """Folded power spectrum with certified tail_bound <= tol.

        Analytic for square/sawtooth/mixture kinds; piecewise-exact Fourier
        integrals for the (piecewise-constant) quantized kinds.  Raises
        SpectrumToleranceError when the tolerance would require more than
        KMAX_CAP harmonics.
        """
        if tol <= 0:
            raise ValueError("tol must be positive")
        key = float(tol)
        if key not in self._spectrum_cache:
            self._spectrum_cache[key] = _compute_spectrum(self, tol)
        return self._spectrum_cache[key]

    def constant_pieces(self):
        """(t0, t1, value) tiles of [0,1) for piecewise-constant kinds."""
        if self._pieces is None:
            self._pieces = _constant_pieces(self)
        return self._pieces


def _quantize_values(v, value_range, bits):
    lo, hi = value_range
    levels = 2 ** bits
    step = (hi - lo) / levels
    idx = np.clip(np.floor((v - lo) / step), 0, levels - 1)
    return lo + (idx + 0.5) * step


# ---------------------------------------------------------------------------
# Factories


def make_square_wave():
    """Binary universal quantizer map: 1 on [0, 1/2), 0 on [1/2, 1).

    Folded spectrum: P_0 = 1/4, P_k = 2/(pi k)^2 for odd k.  AC power 1/4,
    so the squared-distance map saturates at 1/2.
    """
    return PeriodicMap("square", {}, (0.0, 1.0), is_binary=True)


def make_sawtooth():
    """Period-1 sawtooth sqrt(2)*(t - 1/2), values in [-sqrt2/2, sqrt2/2).

    The sqrt(2) amplitude makes the folded coefficients exactly
    P_k = (1/pi k)^2, total power 1/6, and the map asymptote 1/3.
    """
    return PeriodicMap("sawtooth", {}, (-SQRT2 / 2, SQRT2 / 2))


def make_fourier_mixture(terms):
    """h(t) = sum_i a_i sin(2 pi k_i t) for terms = [(k_i, a_i), ...].

    Folded power is a_i^2/2 at each declared frequency (Parseval:
    sum a_i^2/2 = int h^2).
    """
    terms = list(terms)
    if not terms:
        raise ValueError("mixture needs at least one term")
    freqs = [k for k, _ in terms]
    if len(set(freqs)) != len(freqs):
        raise ValueError("duplicate mixture frequencies")
    clean = []
    for k, a in terms:
        if int(k) != k or k < 1:
            raise ValueError("mixture frequencies must be positive integers")
        a = float(a)
        if not math.isfinite(a):
            raise ValueError("mixture amplitudes must be finite")
        clean.append((int(k), a))
    clean.sort()
    m = PeriodicMap("mixture", {"terms": tuple(clean)}, (0.0, 0.0))
    m.value_range = _smooth_range(m)
    return m


def quantize_map(inner, bits):
    """Pass ``inner`` through a B-bit uniform quantizer spanning its range.

    Cells have width range/2^B with midpoint reconstruction, so the output
    stays within range(inner)/2^{B+1} of the inner map everywhere.  For
    B = 1 this is the two-level sign-style map.
    """
    if not isinstance(inner, PeriodicMap):
        raise TypeError("inner must be a PeriodicMap")
    if int(bits) != bits or bits < 1:
        raise ValueError("bits must be a positive integer")
    bits = int(bits)
    if bits > 40:
        raise ValueError("bits too large for float quantization")
    lo, hi = inner.value_range
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise ValueError("inner map must be bounded with positive range")
    step = (hi - lo) / 2 ** bits
    out_range = (lo + step / 2, hi - step / 2)
    return PeriodicMap("quantized", {"inner": inner, "B": bits}, out_range)


def make_multibit(bits):
    """B-bit universal quantizer map: the sawtooth uniformly quantized.

    Pointwise identical to quantize_map(make_sawtooth(), B); kept as its own
    kind so breakpoints (exact dyadics j/2^B) and the selector name survive.
    """
    if int(bits) != bits or not (1 <= bits <= 16):
        raise ValueError("bits must be an integer in [1, 16]")
    bits = int(bits)
    saw = make_sawtooth()
    step = SQRT2 / 2 ** bits
    out_range = (-SQRT2 / 2 + step / 2, SQRT2 / 2 - step / 2)
    return PeriodicMap("multibit", {"inner": saw, "B": bits}, out_range)


def eval_map(map_, t):
    """Functional form of map evaluation: h(t mod 1)."""
    return map_(t)


def power_coeffs(map_, tol):
    """Functional form of PeriodicMap.power_coeffs."""
    return map_.power_coeffs(tol)


# ---------------------------------------------------------------------------
# Codomain range of smooth maps


def _smooth_range(map_):
    n = 1 << 16
    ts = (np.arange(n) + 0.5) / n
    v = map_(ts)
    i_lo = int(np.argmin(v))
    i_hi = int(np.argmax(v))
    w = 2.0 / n

    def refine(i, sign):
        res = minimize_scalar(
            lambda t: sign * map_(float(t)),
            bounds=(ts[i] - w, ts[i] + w),
            method="bounded",
            options={"xatol": 1e-14},
        )
        return sign * res.fun

    lo = min(float(v[i_lo]), refine(i_lo, 1.0))
    hi = max(float(v[i_hi]), refine(i_hi, -1.0))
    return lo, hi


# ---------------------------------------------------------------------------
# Piecewise-constant structure (quantized kinds)


def _constant_pieces(map_):
    if map_.kind == "square":
        return [(0.0, 0.5, 1.0), (0.5, 1.0, 0.0)]
    if map_.kind == "multibit":
        bits = map_.params["B"]
        n = 2 ** bits
        step = SQRT2 / n
        return [
            (j / n, (j + 1) / n, -SQRT2 / 2 + (j + 0.5) * step) for j in range(n)
        ]
    if map_.kind == "quantized":
        inner = map_.params["inner"]
        bits = map_.params["B"]
        if inner.kind == "sawtooth":
            # same partition as the multibit kind, exact dyadic breakpoints
            n = 2 ** bits
            step = SQRT2 / n
            return [
                (j / n, (j + 1) / n, -SQRT2 / 2 + (j + 0.5) * step)
                for j in range(n)
            ]
        if inner.kind in ("multibit", "quantized", "square"):
            return [
                (t0, t1, float(_quantize_values(np.float64(v), inner.value_range, bits)))
                for t0, t1, v in inner.constant_pieces()
            ]
        return _pieces_by_crossing(inner, bits)
    raise ValueError("map kind %r is not piecewise constant" % map_.kind)


def _pieces_by_crossing(inner, bits):
    """Locate quantizer-cell boundaries of a smooth inner map by bisection."""
    lo, hi = inner.value_range
    levels = 2 ** bits
    step = (hi - lo) / levels

    def cell(t):
        return np.clip(np.floor((inner(t) - lo) / step), 0, levels - 1)

    n = 1 << 15
    grid = np.arange(n + 1) / n
    c = cell(grid)
    breaks = [0.0]
    for i in np.nonzero(np.diff(c) != 0)[0]:
        a, b = grid[i], grid[i + 1]
        ca = cell(np.float64(a))
        for _ in range(60):
            m = 0.5 * (a + b)
            if cell(np.float64(m)) == ca:
                a = m
            else:
                b = m
        breaks.append(b)
    breaks.append(1.0)
    breaks = sorted(set(breaks))
    pieces = []
    for t0, t1 in zip(breaks[:-1], breaks[1:]):
        if t1 - t0 <= 0:
            continue
        v = float(_quantize_values(np.float64(inner(0.5 * (t0 + t1))), (lo, hi), bits))
        pieces.append((t0, t1, v))
    return pieces


# ---------------------------------------------------------------------------
# Spectra


def analytic_spectrum_kind(map_):
    """'square' | 'sawtooth' | 'mixture' for closed-form kinds, else None."""
    if map_.kind in ("square", "sawtooth", "mixture"):
        return map_.kind
    return None


def _compute_spectrum(map_, tol):
    kind = map_.kind
    if kind == "square":
        # P_k = 2/(pi k)^2, odd k; exact AC total 1/4, DC 1/4.
        ks = np.arange(1, KMAX_CAP + 1, 2, dtype=np.int64)
        powers = 2.0 / (np.pi * ks) ** 2
        tails = 0.25 - np.cumsum(powers)
        idx = np.nonzero(tails <= tol)[0]
        if len(idx) == 0:
            raise SpectrumToleranceError(
                "square-wave tail %g > tol %g at kmax cap" % (tails[-1], tol)
            )
        m = idx[0] + 1
        k = np.concatenate(([0], ks[:m]))
        p = np.concatenate(([0.25], powers[:m]))
        return PowerSpectrum(k, p, max(float(tails[m - 1]), 0.0), 0.5)
    if kind == "sawtooth":
        ks = np.arange(1, KMAX_CAP + 1, dtype=np.int64)
        powers = 1.0 / (np.pi * ks) ** 2
        tails = 1.0 / 6.0 - np.cumsum(powers)
        idx = np.nonzero(tails <= tol)[0]
        if len(idx) == 0:
            raise SpectrumToleranceError(
                "sawtooth tail %g > tol %g at kmax cap" % (tails[-1], tol)
            )
        m = idx[0] + 1
        return PowerSpectrum(
            ks[:m], powers[:m], max(float(tails[m - 1]), 0.0), 1.0 / 6.0
        )
    if kind == "mixture":
        terms = map_.params["terms"]
        k = np.array([kk for kk, _ in terms], dtype=np.int64)
        p = np.array([a * a / 2.0 for _, a in terms])
        total = float(np.sum(p))
        return PowerSpectrum(k, p, 0.0, total)
    if kind in ("multibit", "quantized"):
        return _pieces_spectrum(map_.constant_pieces(), tol)
    raise AssertionError(kind)


def _pieces_spectrum(pieces, tol):
    """Exact Fourier integrals of a piecewise-constant map, per piece.

    For a constant v on [a, b):  H_k = v (e^{-2 pi i k a} - e^{-2 pi i k b})
    / (2 pi i k).  The tail is certified through Parseval: total power is
    the exact sum of v^2 (b - a).
    """
    t0 = np.array([a for a, _, _ in pieces])
    t1 = np.array([b for _, b, _ in pieces])
    vals = np.array([v for _, _, v in pieces])
    total = float(np.sum(vals ** 2 * (t1 - t0)))
    dc = float(np.sum(vals * (t1 - t0))) ** 2

    blocks = []
    running = dc
    kmax = 0
    block = 2048
    tail = max(total - running, 0.0)
    while tail > tol:
        if kmax >= KMAX_CAP:
            raise SpectrumToleranceError(
                "piecewise spectrum tail %g > tol %g at kmax cap" % (tail, tol)
            )
        n = min(block, KMAX_CAP - kmax)
        ks = np.arange(kmax + 1, kmax + n + 1, dtype=np.int64)
        e0 = np.exp(-2j * np.pi * np.outer(ks, t0))
        e1 = np.exp(-2j * np.pi * np.outer(ks, t1))
        hk = (e0 - e1) @ vals / (2j * np.pi * ks)
        pw = 2.0 * np.abs(hk) ** 2
        blocks.append(pw)
        running += float(np.sum(pw))
        kmax += n
        block = min(block * 2, 16384)
        tail = max(total - running, 0.0)

    if blocks:
        ks = np.arange(1, kmax + 1, dtype=np.int64)
        powers = np.concatenate(blocks)
    else:
        ks = np.zeros(0, dtype=np.int64)
        powers = np.zeros(0)
    floor = 1e-15 * max(total, 1.0)
    keep = powers > floor
    k = np.concatenate(([0], ks[keep])) if dc > floor else ks[keep]
    p = np.concatenate(([dc], powers[keep])) if dc > floor else powers[keep]
    # dropped sub-floor coefficients are folded into the certified tail
    dropped = float(np.sum(powers[~keep])) + (0.0 if dc > floor else dc)
    return PowerSpectrum(k, p, tail + dropped, total)
