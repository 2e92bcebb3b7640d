"""Kernels, multipliers, and the nonlocal operator in physical form.

Three jobs live here:

1. The exact correspondence between power-law symbols and fractional
   multipliers (normalization constants C_{d,a} and their inverses).
2. Application of L to periodic fields through quadrature of the
   lattice-periodized kernel against symmetrized double differences. In
   1-D the lattice sum has a closed Hurwitz-zeta form; in 2-D the far
   field is handled by exact radial Bessel quadrature. Neither route
   truncates the periodization, so the only error is the quadrature's.
3. Numerical inversion multiplier -> kernel (cosine transform in 1-D,
   Hankel-type in 2-D) with smooth dyadic frequency windows to tame the
   oscillatory divergence, feeding the upper/lower kernel-ratio
   diagnostics (KernelTable).

Translation invariance lets the double-difference quadrature factor
exactly through Fourier modes: the physical route computes a quadrature
multiplier v(k) and applies it diagonally, which reproduces the pointwise
quadrature to rounding while staying a genuinely independent computation
from the closed-form spectral multiplier.
"""
from __future__ import annotations

import io
import math
import warnings
import weakref
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.special import j0, zeta

from .fields import ScalarField1D, ScalarField2D
from .quadrature import SmoothCutoff, oscillation_resolved_edges, panel_nodes
from .symbols import DissipationSymbol, Multiplier

TWO_PI = 2.0 * math.pi
# beyond this argument the large-x Bessel expansion is used (7 terms each
# series; truncation error ~ 1e-16 relative at x = 35)
X_ASYM = 35.0


# ---------------------------------------------------------------------------
# fractional normalization constants
# ---------------------------------------------------------------------------

def fractional_multiplier_constant(d: int, a: float) -> float:
    """Multiplier magnitude of the unit power kernel: the operator with
    kernel |y|^(-d-a) has symbol Q * |k|^a; returns Q."""
    if d not in (1, 2):
        raise ValueError("dimension must be 1 or 2")
    if not 0.0 < a < 2.0:
        raise ValueError("exponent must lie in (0, 2)")
    return math.pi ** (0.5 * d) * abs(math.gamma(-0.5 * a)) \
        / (2.0 ** a * math.gamma(0.5 * (d + a)))


def fractional_normalization(d: int, a: float) -> float:
    """C_{d,a}: the symbol m(r) = C_{d,a} r^(-a) has multiplier exactly |k|^a."""
    return 1.0 / fractional_multiplier_constant(d, a)


# ---------------------------------------------------------------------------
# large-argument Bessel J0 in oscillatory form
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _hankel_coeffs(nterms: int = 7) -> tuple[tuple, tuple]:
    # Hankel symbols (0, m), built by the ratio recurrence
    sym = [1.0]
    for mm in range(1, 2 * nterms):
        sym.append(sym[-1] * (-((2 * mm - 1) ** 2)) / (8.0 * mm))
    p = tuple((-1.0) ** j * sym[2 * j] for j in range(nterms))
    q = tuple((-1.0) ** j * sym[2 * j + 1] for j in range(nterms))
    return p, q


def bessel_j0_osc_parts(x):
    """A, B with J0(x) = A(x) cos x + B(x) sin x; accurate for x >= X_ASYM."""
    x = np.asarray(x, dtype=float)
    p, q = _hankel_coeffs()
    xi2 = 1.0 / (x * x)
    P0 = np.polynomial.polynomial.polyval(xi2, p)
    Q0 = np.polynomial.polynomial.polyval(xi2, q) / x
    s = 1.0 / np.sqrt(np.pi * x)
    return s * (P0 + Q0), s * (P0 - Q0)


def one_minus_j0(x):
    """1 - J0(x) without cancellation at small argument."""
    x = np.asarray(x, dtype=float)
    u = 0.25 * x * x
    series = u * (1.0 - u / 4.0 * (1.0 - u / 9.0 * (1.0 - u / 16.0)))
    return np.where(x < 0.1, series, 1.0 - j0(x))


# ---------------------------------------------------------------------------
# whole-line multiplier of a symbol (1-D)
# ---------------------------------------------------------------------------

def _graded_osc_edges(hi: float, freq: float, eps: float) -> np.ndarray:
    """Panel edges on [eps, hi]: geometric toward 0, each panel further split
    to at most a quarter oscillation period of frequency ``freq``."""
    levels = max(4, math.ceil(math.log2(hi / eps)))
    base = (hi * 2.0 ** -np.arange(levels + 1, dtype=float))[::-1].copy()
    base[0] = eps
    width = math.pi / (2.0 * max(freq, 1e-12))
    parts = [np.array([eps])]
    for lo, b in zip(base[:-1], base[1:]):
        n = int(min(4096, max(1, math.ceil((b - lo) / width))))
        parts.append(np.linspace(lo, b, n + 1)[1:])
    return np.concatenate(parts)


def _sin2_accumulate(ks: np.ndarray, y: np.ndarray, kerw: np.ndarray) -> np.ndarray:
    """sum_q 4 sin^2(k y_q / 2) kerw_q for each k, chunked to bound memory."""
    out = np.empty(ks.size)
    chunk = max(1, int(4e6 // max(y.size, 1)))
    for lo in range(0, ks.size, chunk):
        sl = slice(lo, lo + chunk)
        S = np.sin(np.outer(ks[sl], 0.5 * y)) ** 2
        out[sl] = 4.0 * (S @ kerw)
    return out


_SYMMULT_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def multiplier_of_symbol_1d(sym: DissipationSymbol, k, order: int = 16):
    """Fourier multiplier of the symbol's operator in one dimension:

        P_m(k) = 2 * integral_0^inf (1 - cos(k y)) m(y) / y dy.

    Exact closed form for the power family; otherwise graded Gauss-Legendre
    over the core plus analytic + cosine quadrature over the power tail.
    Folding the integral over the period lattice leaves mode identities
    unchanged, so this is also the multiplier of the periodic operator.
    """
    karr = np.atleast_1d(np.asarray(k, dtype=float))
    scalar = np.ndim(k) == 0
    if sym.family == "power":
        Q = fractional_multiplier_constant(1, sym.alpha)
        out = sym.tail_coeff * Q * np.abs(karr) ** sym.alpha
        return float(out[0]) if scalar else out

    cached = _SYMMULT_CACHE.setdefault(sym, {})
    key = (karr.tobytes(), order)
    if key in cached:
        out = cached[key]
        return float(out[0]) if scalar else out

    out = np.zeros_like(karr)
    kabs = np.abs(karr)
    nz = kabs > 0.0
    if nz.any():
        ks = kabs[nz]
        Rc = sym.core_radius
        edges = _graded_osc_edges(Rc, float(ks.max()), eps=Rc * 2.0 ** -48)
        y, w = panel_nodes(edges, order)
        core = _sin2_accumulate(ks, y, w * sym.m(y) / y)
        T, al = sym.tail_coeff, sym.alpha
        tail_full = 2.0 * T * Rc ** (-al) / al
        osc = np.empty(ks.size)
        for i, kk in enumerate(ks):
            val, _ = quad(lambda r: r ** (-1.0 - al), Rc, np.inf,
                          weight="cos", wvar=kk, epsabs=1e-12)
            osc[i] = 2.0 * T * val
        out[nz] = core + tail_full - osc
    cached[key] = out
    if len(cached) > 8:
        cached.pop(next(iter(cached)))
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# periodized kernel and physical application
# ---------------------------------------------------------------------------

def periodized_kernel_1d(sym: DissipationSymbol, y):
    """K_per(y) = sum over lattice images of m(|y + 2 pi n|)/|y + 2 pi n|,
    for y in (0, pi]. All off-origin images sit in the symbol's exact power
    tail, so the image sum is a pair of Hurwitz zeta values: the lattice
    summation carries no truncation error at all."""
    if sym.core_radius > math.pi:
        raise ValueError("periodization needs the power tail to start by pi")
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0.0) or np.any(y > math.pi + 1e-12):
        raise ValueError("periodized kernel defined on (0, pi]")
    t = y / TWO_PI
    s = 1.0 + sym.alpha
    images = sym.tail_coeff * TWO_PI ** (-s) * (zeta(s, 1.0 + t) + zeta(s, 1.0 - t))
    return sym.m(y) / y + images


@dataclass
class PhysicalApplyReport:
    """Accounting for one physical-space application of L."""
    eps: float                  # inner cutoff of the symmetrized quadrature
    removed_core_bound: float   # analytic bound on the discarded (0, eps) part
    quad_nodes: int
    kmax: int


_PHYS_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def periodic_increment_multiplier_1d(sym: DissipationSymbol, kmax: int,
                                     eps: float | None = None,
                                     order: int = 16):
    """Quadrature multiplier of the physical route in 1-D:

        v_k = integral_eps^pi 4 sin^2(k y / 2) K_per(y) dy,  k = 0..kmax.

    sin^2(k y / 2) is the exact double difference of the mode e^{ikx}, so
    applying v_k diagonally equals the pointwise periodized quadrature."""
    if eps is None:
        eps = math.pi * 2.0 ** -50
    cache = _PHYS_CACHE.setdefault(sym, {})
    key = (1, kmax, eps, order)
    if key not in cache:
        edges = _graded_osc_edges(math.pi, float(kmax), eps=eps)
        y, w = panel_nodes(edges, order)
        kerw = w * periodized_kernel_1d(sym, y)
        v = _sin2_accumulate(np.arange(kmax + 1, dtype=float), y, kerw)
        cache[key] = (v, y.size)
    return cache[key]


def increment_multiplier_2d(sym: DissipationSymbol, kappas: np.ndarray,
                            eps: float | None = None,
                            order: int = 16) -> np.ndarray:
    """Physical-route multiplier in 2-D at radial wavenumbers ``kappas``:

        v(K) = 2 pi [ integral_eps^pi (1 - J0(K r)) m(r)/r dr        (near)
                      + integral_pi^inf m(r)/r dr                    (mass)
                      - integral_pi^inf J0(K r) m(r)/r dr ]          (osc)

    The angular integral over directions of y is J0 in closed form, so the
    2-D double-difference quadrature reduces to radial integrals. The far
    field is exact (power tail), evaluated by Bessel-asymptotic cosine/sine
    quadrature: no lattice truncation anywhere."""
    if sym.core_radius > math.pi:
        raise ValueError("far-field split needs the power tail to start by pi")
    if eps is None:
        eps = math.pi * 2.0 ** -50
    kappas = np.asarray(kappas, dtype=float)
    T, al = sym.tail_coeff, sym.alpha
    mass = TWO_PI * sym.tail_integral_over_r(math.pi)

    kmax = float(kappas.max()) if kappas.size else 1.0
    edges = _graded_osc_edges(math.pi, kmax, eps=eps)
    y, w = panel_nodes(edges, order)
    kerw = TWO_PI * w * sym.m(y) / y

    out = np.empty(kappas.size)
    chunk = max(1, int(4e6 // max(y.size, 1)))
    for lo in range(0, kappas.size, chunk):
        sl = slice(lo, lo + chunk)
        near = one_minus_j0(np.outer(kappas[sl], y)) @ kerw
        out[sl] = near
    for i, kap in enumerate(kappas):
        if kap == 0.0:
            out[i] = 0.0  # near term vanishes and osc tail equals the mass
            continue
        out[i] += mass - TWO_PI * _bessel_tail(T, al, kap)
    return out


def _bessel_tail(T: float, al: float, kap: float) -> float:
    """integral_pi^inf J0(kap r) T r^(-1-al) dr, split at the Bessel
    asymptotic threshold."""
    split = max(math.pi, X_ASYM / kap)
    total = 0.0
    if split > math.pi:
        edges = oscillation_resolved_edges(math.pi, split, kap,
                                           panels_per_period=6.0)
        r, w = panel_nodes(edges, 16)
        total += float(np.dot(w, j0(kap * r) * T * r ** (-1.0 - al)))

    def fa(r):
        return bessel_j0_osc_parts(kap * r)[0] * T * r ** (-1.0 - al)

    def fb(r):
        return bessel_j0_osc_parts(kap * r)[1] * T * r ** (-1.0 - al)

    ca, _ = quad(fa, split, np.inf, weight="cos", wvar=kap)
    cb, _ = quad(fb, split, np.inf, weight="sin", wvar=kap)
    return total + ca + cb


def apply_dissipation_physical(sym: DissipationSymbol, fld, x=None,
                               eps: float | None = None, order: int = 16,
                               return_report: bool = False):
    """Apply L by quadrature of the periodized kernel against the
    symmetrized double difference of the field.

    Returns the value(s) at ``x`` (trig-interpolated from the quadrature
    result), or a new field when ``x`` is None. The inner cutoff defaults to
    a scale where the discarded core is negligible; its analytic bound is
    in the report either way.
    """
    if eps is None:
        eps = math.pi * 2.0 ** -50
    if isinstance(fld, ScalarField1D):
        kmax = fld.N // 2
        v, nodes = periodic_increment_multiplier_1d(sym, kmax, eps, order)
        result = ScalarField1D.from_spectrum(fld.spec * v, fld.N)
        k = fld.wavenumbers()
        second_sup = ScalarField1D.from_spectrum(-k * k * fld.spec, fld.N).linf()
        bound = second_sup * sym.C0 * min(eps, sym.r0)  # integral_0^eps y m <= C0 eps
    elif isinstance(fld, ScalarField2D):
        kmod = fld.wavenumber_modulus()
        uniq, inv = np.unique(np.round(kmod, 9), return_inverse=True)
        cache = _PHYS_CACHE.setdefault(sym, {})
        key = (2, fld.N, eps, order)
        if key not in cache:
            cache[key] = increment_multiplier_2d(sym, uniq, eps, order)
        v = cache[key]
        result = ScalarField2D.from_spectrum(
            fld.spec * v[inv].reshape(kmod.shape), fld.N)
        nodes = 0
        kx, ky = fld.wavenumber_grids()

        def dsup(mult):
            return ScalarField2D.from_spectrum(mult * fld.spec, fld.N).linf()

        hess = dsup(-kx * kx) + dsup(-ky * ky) + 2.0 * dsup(-kx * ky)
        bound = math.pi * hess * sym.C0 * min(eps, sym.r0)
        kmax = int(round(float(uniq.max())))
    else:
        raise TypeError("expected a 1-D or 2-D scalar field")

    report = PhysicalApplyReport(eps=eps, removed_core_bound=float(bound),
                                 quad_nodes=int(nodes), kmax=kmax)
    if x is None:
        return (result, report) if return_report else result
    vals = result.evaluate_at(x)
    out = float(vals[0]) if np.ndim(x) <= (0 if result.values.ndim == 1 else 1) \
        and vals.size == 1 else vals
    return (out, report) if return_report else out


def dissipation_direct_1d(sym: DissipationSymbol, fld: ScalarField1D, x,
                          eps: float | None = None, order: int = 16):
    """Literal pointwise quadrature: int_eps^pi (2 th(x) - th(x+y) - th(x-y))
    K_per(y) dy, with the field differences formed by naive subtraction.

    Exists to cross-check the factored route; subtraction noise limits it
    to ~1e-9 relative, which is ample for that purpose."""
    if eps is None:
        eps = math.pi * 2.0 ** -50
    pts = np.atleast_1d(np.asarray(x, dtype=float))
    kmax = fld.N // 2
    edges = _graded_osc_edges(math.pi, float(kmax), eps=eps)
    y, w = panel_nodes(edges, order)
    kerw = w * periodized_kernel_1d(sym, y)
    out = np.empty(pts.size)
    for i, xv in enumerate(pts):
        g = 2.0 * fld.evaluate_at(xv) - fld.evaluate_at(xv + y) \
            - fld.evaluate_at(xv - y)
        out[i] = float(np.dot(g, kerw))
    return float(out[0]) if np.ndim(x) == 0 else out


# ---------------------------------------------------------------------------
# multiplier -> kernel inversion
# ---------------------------------------------------------------------------

class KernelInversionError(RuntimeError):
    """Raised when the windowed transform fails to settle at some radius."""

    def __init__(self, radius: float, message: str):
        super().__init__(f"radius {radius:g}: {message}")
        self.radius = radius


_LP_CUT = SmoothCutoff(1.0, 2.0)


class _WindowAccumulator:
    """Stopping logic for the dyadic window sums.

    Past the oscillation gate the true window envelope decays monotonically
    (superpolynomially in 2^j y), while quadrature roundoff grows with the
    window, so the measured |I_j| is V-shaped. Success is either two
    consecutive windows below tol*|total| or two consecutive rises once the
    envelope minimum is already negligible (the roundoff floor). Rises while
    increments are still large mean genuine non-convergence."""

    def __init__(self, tol: float):
        self.tol = tol
        self.total = 0.0
        self.errsum = 0.0
        self._small = 0
        self._rises = 0
        self._prev: float | None = None
        self._envmin = math.inf

    def add(self, val: float, err: float, phase: float) -> bool:
        """phase = 2^j * y; below 8 nothing is checked (pre-oscillatory),
        below 128 only the sub-tolerance success rule runs (the envelope can
        still be in its hump), beyond that rises are monitored too."""
        self.total += val
        self.errsum += abs(err)
        if phase < 8.0:
            return False
        mag = abs(val)
        scale = max(abs(self.total), 1e-12)
        if mag <= self.tol * scale:
            self._small += 1
            if self._small >= 2:
                return True
        else:
            self._small = 0
        if phase < 128.0:
            return False
        if self._prev is not None and mag > self._prev:
            self._rises += 1
            if self._rises >= 2:
                if self._envmin <= 1e-4 * scale:
                    self.errsum += self._envmin + mag
                    return True
                raise _WindowDivergence
        else:
            self._rises = 0
        self._prev = mag
        self._envmin = min(self._envmin, mag)
        return False


class _WindowDivergence(Exception):
    pass


def _window(j: int):
    """Smooth dyadic partition member j and its support."""
    if j == 0:
        return (lambda z: _LP_CUT(z)), 0.0, 2.0
    lo, hi = 2.0 ** (j - 1), 2.0 ** (j + 1)

    def w(z, j=j):
        return _LP_CUT(z / 2.0 ** j) - _LP_CUT(z / 2.0 ** (j - 1))

    return w, lo, hi


def _kernel_value_1d(P, y: float, tol: float, max_windows: int):
    """K(y) = -(1/pi) integral_0^inf P(z) cos(z y) dz, summed over smooth
    dyadic windows; each window done by adaptive cosine quadrature."""
    acc = _WindowAccumulator(tol)
    for j in range(max_windows):
        w, lo, hi = _window(j)
        with warnings.catch_warnings():
            # roundoff at high windows is expected; the accumulator's
            # stopping rule is what decides whether it stayed harmless
            warnings.simplefilter("ignore", IntegrationWarning)
            val, err = quad(lambda z: w(z) * P(z), lo, hi,
                            weight="cos", wvar=y, limit=400)
        try:
            done = acc.add(val, err, phase=2.0 ** j * y)
        except _WindowDivergence:
            raise KernelInversionError(y, "cosine-window sum diverged") from None
        if done:
            return -acc.total / math.pi, acc.errsum / math.pi, j + 1
    raise KernelInversionError(y, "cosine-window sum did not settle")


def _kernel_value_2d(P, s: float, tol: float, max_windows: int):
    """K(y) = -(1/2 pi) integral_0^inf P(rho) J0(rho |y|) rho drho with the
    same dyadic windows; oscillation-resolved panels below the Bessel
    asymptotic threshold, cosine/sine quadrature above it."""
    split = X_ASYM / s
    acc = _WindowAccumulator(tol)
    for j in range(max_windows):
        w, lo, hi = _window(j)

        def f(rho):
            return w(rho) * P(rho) * rho

        val = 0.0
        err = 0.0
        if lo < split:
            b = min(hi, split)
            edges = oscillation_resolved_edges(lo, b, s, panels_per_period=6.0)
            r16, w16 = panel_nodes(edges, 16)
            r24, w24 = panel_nodes(edges, 24)
            v16 = float(np.dot(w16, f(r16) * j0(s * r16)))
            v24 = float(np.dot(w24, f(r24) * j0(s * r24)))
            val += v24
            err += abs(v24 - v16)
        if hi > split:
            a = max(lo, split)

            def fa(rho):
                return f(rho) * bessel_j0_osc_parts(s * rho)[0]

            def fb(rho):
                return f(rho) * bessel_j0_osc_parts(s * rho)[1]

            with warnings.catch_warnings():
                warnings.simplefilter("ignore", IntegrationWarning)
                ca, ea = quad(fa, a, hi, weight="cos", wvar=s, limit=400)
                cb, eb = quad(fb, a, hi, weight="sin", wvar=s, limit=400)
            val += ca + cb
            err += abs(ea) + abs(eb)
        try:
            done = acc.add(val, err, phase=2.0 ** j * s)
        except _WindowDivergence:
            raise KernelInversionError(s, "Hankel-window sum diverged") from None
        if done:
            return -acc.total / TWO_PI, acc.errsum / TWO_PI, j + 1
    raise KernelInversionError(s, "Hankel-window sum did not settle")


@dataclass
class KernelTable:
    """Tabulated kernel K(y) with the bound-ratio diagnostics.

    upper_ratios = |K(y)| |y|^d / P(1/|y|) must stay bounded; lower_ratios
    (signed) must stay above a positive constant for radii below sigma."""

    dimension: int
    radii: np.ndarray
    values: np.ndarray
    upper_ratios: np.ndarray
    lower_ratios: np.ndarray
    sigma: float
    lower_constant: float
    upper_constant: float
    window_counts: list
    error_estimates: np.ndarray

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "radii": self.radii.tolist(),
            "values": self.values.tolist(),
            "upper_ratios": self.upper_ratios.tolist(),
            "lower_ratios": self.lower_ratios.tolist(),
            "sigma": self.sigma,
            "lower_constant": self.lower_constant,
            "upper_constant": self.upper_constant,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("radius,value,upper_ratio,lower_ratio\n")
        for r, v, u, low in zip(self.radii, self.values,
                                self.upper_ratios, self.lower_ratios):
            buf.write(f"{float(r)!r},{float(v)!r},{float(u)!r},{float(low)!r}\n")
        return buf.getvalue()


def multiplier_to_kernel(P, d: int = 1, radii: np.ndarray | None = None,
                         tol: float = 1e-7,
                         max_windows: int = 48) -> KernelTable:
    """Recover the physical kernel of a radial multiplier on a radius grid.

    1-D: K(y) = -(1/pi) int P(z) cos(zy) dz; 2-D: -(1/2 pi) int P J0 rho drho,
    both read through a smooth dyadic partition of frequency space. Raises
    KernelInversionError naming the radius if a sum fails to settle.
    """
    if d not in (1, 2):
        raise ValueError("dimension must be 1 or 2")
    if radii is None:
        radii = np.geomspace(1e-3, 0.25, 29)
    radii = np.asarray(radii, dtype=float)
    values = np.empty(radii.size)
    errs = np.empty(radii.size)
    wins = []
    for i, y in enumerate(radii):
        if d == 1:
            values[i], errs[i], nw = _kernel_value_1d(P, y, tol, max_windows)
        else:
            values[i], errs[i], nw = _kernel_value_2d(P, y, tol, max_windows)
        wins.append(nw)

    ref = np.asarray(P(1.0 / radii), dtype=float) / radii ** d
    with np.errstate(divide="ignore", invalid="ignore"):
        upper = np.where(ref > 0.0, np.abs(values) / ref, 0.0)
        lower = np.where(ref > 0.0, values / ref, 0.0)

    positive = lower > 0.0
    if positive.all():
        cut = radii.size
    else:
        cut = int(np.argmin(positive))  # first index failing the lower bound
    sigma = float(radii[cut - 1]) if cut > 0 else 0.0
    lower_c = float(np.min(lower[:cut])) if cut > 0 else math.nan
    upper_c = float(np.max(upper))

    table = KernelTable(
        dimension=d, radii=radii, values=values,
        upper_ratios=upper, lower_ratios=lower,
        sigma=sigma, lower_constant=lower_c, upper_constant=upper_c,
        window_counts=wins, error_estimates=errs,
    )
    if isinstance(P, Multiplier):
        P.c0 = sigma
    return table
