"""Radial dissipation symbols and Fourier multipliers.

A dissipation symbol is a singular radial density m(r) > 0 defining the
nonlocal operator

    L u(x) = P.V. integral of (u(x) - u(x+y)) m(|y|) / |y|^d  dy,

subject to two structure conditions: r * m(r) bounded on (0, r0), and
r^alpha * m(r) non-increasing for some alpha in (0, 1]. A Fourier multiplier
P(|k|) plays the same role on the spectral side. Built-in families:

* power:  m(r) = r^-a, 0 < a <= 1 (a = 1 is the critical case);
* log:    m(r) = 1 / (r * ln^a(2/r)) on (0, 1], 0 < a <= 1;
* multiplier-derived: m(r) = P(1/r) for a sub-linear multiplier P.

Every built-in decays as an exact power law tail_coeff * r^-alpha beyond its
core radius, which downstream periodization exploits. The log family with
a > ln 2 is not monotone on (2 e^-a, 1]; the `envelope` accessor provides the
non-increasing envelope that modulus construction uses (the raw m is kept so
closed-form identities on (0, 1] survive, and `check_conditions` reports the
violation window honestly).
"""
from __future__ import annotations

import json
import math
import weakref
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.optimize import bisect

from .quadrature import quad_log

LN2 = math.log(2.0)

_DELTA_GUARD: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


# ---------------------------------------------------------------------------
# dissipation symbols
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class DissipationSymbol:
    """Singular radial density m(r). Treat as immutable after construction."""

    family: str
    alpha: float                 # tail decay exponent; r^alpha m(r) monotone where valid
    r0: float                    # validity radius for the r*m <= C0 bound
    C0: float
    sqg_admissible: bool         # integral of m over (0,1) diverges
    a: float | None = None
    core_radius: float = 1.0
    tail_coeff: float = 1.0      # m(r) = tail_coeff * r**-alpha beyond core_radius
    label: str = ""
    _core: Callable | None = field(default=None, repr=False)
    # plateau (r_lo, m_flat, r_hi) of the non-increasing envelope, or None
    _env_plateau: tuple | None = field(default=None, repr=False)
    # (radii, values) for the tabulated family, kept for serialization
    _table: tuple | None = field(default=None, repr=False)

    def m(self, r):
        """Evaluate m(r), vectorized; r must be positive."""
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        if np.any(r <= 0.0):
            raise ValueError("symbol evaluated at non-positive radius")
        out = np.empty_like(r)
        core = r <= self.core_radius
        if core.any():
            out[core] = self._core(r[core])
        if (~core).any():
            out[~core] = self.tail_coeff * r[~core] ** (-self.alpha)
        return float(out[0]) if scalar else out

    __call__ = m

    def envelope(self, r):
        """Non-increasing envelope of m; equals m wherever m is monotone."""
        if self._env_plateau is None:
            return self.m(r)
        r_lo, m_flat, r_hi = self._env_plateau
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        out = np.empty_like(r)
        low = r < r_lo
        mid = (r >= r_lo) & (r < r_hi)
        high = r >= r_hi
        if low.any():
            out[low] = self.m(r[low])
        out[mid] = m_flat
        if high.any():
            out[high] = self.tail_coeff * r[high] ** (-self.alpha)
        return float(out[0]) if scalar else out

    def tail_integral_over_r(self, R: float) -> float:
        """Exact integral of m(r)/r over (R, inf) for R >= core_radius."""
        if R < self.core_radius:
            raise ValueError("tail starts inside the core region")
        return self.tail_coeff * R ** (-self.alpha) / self.alpha

    def to_dict(self) -> dict:
        if self.family == "log":
            scale = self.tail_coeff * LN2 ** self.a
        else:
            scale = self.tail_coeff
        doc = {
            "family": self.family,
            "a": self.a,
            "alpha": self.alpha,
            "r0": self.r0,
            "C0": self.C0,
            "scale": scale,
            "sqg_admissible": self.sqg_admissible,
            "label": self.label,
        }
        if self._table is not None:
            doc["radii"] = list(self._table[0])
            doc["values"] = list(self._table[1])
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def make_symbol(family: str, a: float | None = None, r0: float = 1.0,
                alpha: float | None = None,
                scale: float = 1.0) -> DissipationSymbol:
    """Build a built-in dissipation symbol.

    Parameters
    ----------
    family : "power" or "log"
    a : family parameter in (0, 1]
    r0 : requested validity radius (capped where the family requires it)
    alpha : tail decay exponent for the log family; defaults to 1/2
    scale : overall positive prefactor (e.g. the fractional-Laplacian
        normalization for the power family)

    Returns
    -------
    DissipationSymbol with C0, alpha, admissibility set for the family and a
    smooth power-law extension beyond r = 1.
    """
    if not scale > 0.0:
        raise ValueError("scale must be positive")
    if family == "power":
        if a is None or not 0.0 < a <= 1.0:
            raise ValueError("power family needs a in (0, 1]")
        if alpha is not None and not math.isclose(alpha, a):
            raise ValueError("power family has tail exponent a")
        # r * m = scale * r^(1-a) is increasing for a < 1, constant at a = 1
        C0 = scale if a == 1.0 else scale * r0 ** (1.0 - a)
        label = f"power(a={a:g})" if scale == 1.0 \
            else f"{scale:g}*power(a={a:g})"
        # the power law is its own tail: core_radius 0 routes every radius
        # through the exact tail branch, which periodization relies on
        return DissipationSymbol(
            family="power", a=a, alpha=a, r0=r0, C0=C0,
            sqg_admissible=(a >= 1.0),
            core_radius=0.0, tail_coeff=scale,
            label=label,
            _core=lambda r, a=a, s=scale: s * r ** (-a),
        )
    if family == "log":
        if a is None or not 0.0 < a <= 1.0:
            raise ValueError("log family needs a in (0, 1]")
        alpha = 0.5 if alpha is None else float(alpha)
        if not 0.0 < alpha < 1.0:
            raise ValueError("log family tail exponent must lie in (0, 1)")

        def core(r, a=a, s=scale):
            return s / (r * np.log(2.0 / r) ** a)

        m1 = scale / LN2 ** a
        # closed form stops being monotone at 2 e^-a; the stored validity
        # radius stays below that so m and its envelope agree on (0, r0)
        r_mono = 2.0 * math.exp(-a)
        r0_eff = min(r0, r_mono)
        C0 = scale / math.log(2.0 / r0_eff) ** a
        plateau = None
        if r_mono < 1.0:
            m_flat = float(core(np.array([r_mono]))[0])
            r_hi = (m1 / m_flat) ** (1.0 / alpha)
            plateau = (r_mono, m_flat, r_hi)
        label = f"log(a={a:g})" if scale == 1.0 else f"{scale:g}*log(a={a:g})"
        return DissipationSymbol(
            family="log", a=a, alpha=alpha, r0=r0_eff, C0=C0,
            sqg_admissible=True,
            core_radius=1.0, tail_coeff=m1,
            label=label,
            _core=core, _env_plateau=plateau,
        )
    raise ValueError(f"unknown symbol family: {family!r}")


def symbol_from_table(radii, values, alpha: float | None = None,
                      r0: float | None = None,
                      sqg_admissible: bool | None = None,
                      label: str = "tabulated") -> DissipationSymbol:
    """Build a symbol from tabulated (radius, value) samples.

    Interpolation is shape-preserving (monotone pchip in log-log), so the
    interpolant never overshoots the data. Values must be positive and
    strictly decreasing; non-monotone tables are rejected outright. Beyond
    the last radius the symbol continues with the power law fitted to the
    final two samples.
    """
    from scipy.interpolate import PchipInterpolator

    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    if radii.ndim != 1 or radii.shape != values.shape or radii.size < 4:
        raise ValueError("need matching 1-D arrays of at least 4 samples")
    if np.any(radii <= 0.0) or np.any(np.diff(radii) <= 0.0):
        raise ValueError("radii must be positive and strictly increasing")
    if np.any(values <= 0.0):
        raise ValueError("symbol values must be positive")
    if np.any(np.diff(values) >= 0.0):
        raise ValueError("tabulated symbol must be strictly decreasing")

    logr = np.log(radii)
    logm = np.log(values)
    interp = PchipInterpolator(logr, logm, extrapolate=False)
    end_slope = (logm[-1] - logm[-2]) / (logr[-1] - logr[-2])
    tail_alpha = -end_slope if alpha is None else float(alpha)
    if not tail_alpha > 0.0:
        raise ValueError("tail exponent must come out positive")
    core_radius = float(radii[-1])
    tail_coeff = float(values[-1]) * core_radius ** tail_alpha
    # inside the first sample, extend with the power law of the first pair;
    # the table owner is expected to sample deep enough that this is moot
    head_slope = (logm[1] - logm[0]) / (logr[1] - logr[0])

    def core(r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        below = r < radii[0]
        if below.any():
            out[below] = values[0] * (r[below] / radii[0]) ** head_slope
        if (~below).any():
            out[~below] = np.exp(interp(np.log(r[~below])))
        return out

    r0 = float(r0) if r0 is not None else core_radius
    sample = np.geomspace(max(radii[0], r0 * 1e-9), r0 * (1.0 - 1e-12), 400)
    C0 = float(np.max(sample * core(sample)))
    if sqg_admissible is None:
        sqg_admissible = _trend_divergent(core, min(1.0, core_radius), 12)
    return DissipationSymbol(
        family="tabulated", a=None, alpha=tail_alpha, r0=r0, C0=C0,
        sqg_admissible=bool(sqg_admissible),
        core_radius=core_radius, tail_coeff=tail_coeff,
        label=label, _core=core,
        _table=(radii.tolist(), values.tolist()),
    )


def symbol_from_json(doc: str | dict) -> DissipationSymbol:
    """Rebuild a built-in or tabulated symbol from its JSON document."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    family = doc["family"]
    if family in ("power", "log"):
        kw = {"scale": doc.get("scale", 1.0)}
        if family == "log":
            kw["alpha"] = doc.get("alpha")
        return make_symbol(family, a=doc["a"], r0=doc["r0"], **kw)
    if family == "tabulated":
        return symbol_from_table(
            doc["radii"], doc["values"], alpha=doc.get("alpha"),
            r0=doc.get("r0"), sqg_admissible=doc.get("sqg_admissible"),
            label=doc.get("label", "tabulated"))
    raise ValueError(f"cannot rebuild symbol family {family!r} from JSON")


def symbol_from_callable(fn: Callable, core_radius: float, alpha: float,
                         r0: float, C0: float, sqg_admissible: bool,
                         label: str = "callable") -> DissipationSymbol:
    """Wrap a user-supplied monotone core m(r) on (0, core_radius].

    The caller vouches for monotonicity of the core; the power tail with the
    given alpha is attached at core_radius.
    """
    tail = float(np.atleast_1d(fn(np.array([core_radius])))[0])
    return DissipationSymbol(
        family="callable", a=None, alpha=alpha, r0=r0, C0=C0,
        sqg_admissible=sqg_admissible,
        core_radius=core_radius,
        tail_coeff=tail * core_radius ** alpha,
        label=label, _core=fn,
    )


def symbol_from_multiplier(P: "Multiplier", scale: float = 1.0,
                           r0: float = 1.0) -> DissipationSymbol:
    """Physical-side stand-in m(r) = P(1/r) / scale for a sub-linear multiplier.

    P non-decreasing makes the core automatically non-increasing; the tail
    exponent is the multiplier's sampled growth exponent.
    """
    alpha = P.alpha
    if not 0.0 < alpha <= 1.0:
        raise ValueError("multiplier growth exponent outside (0, 1]")

    def core(r):
        return P(1.0 / np.asarray(r, dtype=float)) / scale

    zz = np.logspace(0.0, 9.0, 400)
    C0 = float(np.max(P(zz) / zz)) / scale
    m1 = float(P(np.array([1.0]))[0]) / scale
    # integral of m over (0,1) = integral of P(z)/z^2 over (1,inf)
    admissible = _trend_divergent(lambda z: P(z) / z ** 2, 1.0, 16)
    return DissipationSymbol(
        family="multiplier-derived", a=None, alpha=alpha, r0=r0,
        C0=C0, sqg_admissible=admissible,
        core_radius=1.0, tail_coeff=m1,
        label=f"from[{P.label}]", _core=core,
    )


# ---------------------------------------------------------------------------
# condition checks
# ---------------------------------------------------------------------------

@dataclass
class ConditionReport:
    C0_measured: float
    rm_bounded: bool
    m_monotone_violations: int
    m_violation_window: tuple | None
    alpha_monotone_violations: int
    alpha_violation_window: tuple | None
    integral_divergent_analytic: bool
    integral_divergent_trend: bool | None   # None when the trend is ambiguous
    trend_consistent: bool
    partial_integrals: list
    warnings: list

    @property
    def ok(self) -> bool:
        return self.rm_bounded and self.trend_consistent


def _decade_increments(fn, hi: float, decades: int) -> list[float]:
    """Per-decade integrals of fn toward 0: [hi/10^(k+1), hi/10^k]."""
    out = []
    for k in range(decades):
        a = hi * 10.0 ** -(k + 1)
        b = hi * 10.0 ** -k
        val, _ = quad_log(fn, a, b)
        out.append(val)
    return out


def _trend_divergent(fn, hi: float, decades: int) -> bool:
    """Heuristic: does the integral of fn toward 0 (or toward infinity when
    read through 1/r) diverge? Geometric extrapolation of decade increments."""
    inc = _decade_increments(fn, hi, decades)
    tail = inc[-4:]
    ratios = [tail[i + 1] / tail[i] for i in range(3) if tail[i] > 0.0]
    if not ratios:
        return False
    return min(ratios) >= 0.9


def check_conditions(sym: DissipationSymbol, grid: np.ndarray | None = None,
                     depth_decades: int = 16) -> ConditionReport:
    """Verify the structure conditions on a sample grid and classify the
    integral of m near zero.

    The divergence trend is a heuristic (geometric extrapolation of
    per-decade partial integrals down to ~1e-18); families within a few
    percent of criticality may trip a spurious inconsistency warning, which
    is reported, never silently dropped. The analytic flag stays
    authoritative.
    """
    if grid is None:
        grid = np.logspace(-9.0, 2.0, 48 * 11)
    grid = np.asarray(grid, dtype=float)
    warnings: list[str] = []

    mvals = sym.m(grid)
    in_r0 = grid < sym.r0
    rm = grid[in_r0] * mvals[in_r0]
    C0_measured = float(np.max(rm)) if in_r0.any() else 0.0
    rm_bounded = C0_measured <= sym.C0 * (1.0 + 1e-9)
    if not rm_bounded:
        warnings.append(
            f"r*m exceeds declared C0: measured {C0_measured:.6g} > {sym.C0:.6g}")

    def count_increases(vals):
        d = np.diff(vals)
        tol = 1e-12 * np.maximum(np.abs(vals[:-1]), np.abs(vals[1:]))
        bad = np.nonzero(d > tol)[0]
        if bad.size == 0:
            return 0, None
        return int(bad.size), (float(grid[bad[0]]), float(grid[bad[-1] + 1]))

    n_mono, win_mono = count_increases(mvals)
    n_alpha, win_alpha = count_increases(grid ** sym.alpha * mvals)
    if n_mono:
        warnings.append(f"m increases on ~({win_mono[0]:.3g}, {win_mono[1]:.3g})")
    if n_alpha:
        warnings.append(
            f"r^alpha*m increases on ~({win_alpha[0]:.3g}, {win_alpha[1]:.3g})")

    partial = _decade_increments(sym.m, 1.0, depth_decades)
    tail = partial[-4:]
    ratios = [tail[i + 1] / tail[i] for i in range(3) if tail[i] > 0.0]
    trend: bool | None
    if not ratios:
        trend = False
    elif min(ratios) >= 0.93:
        trend = True
    elif max(ratios) <= 0.85:
        trend = False
    else:
        trend = None
    consistent = trend is None or trend == sym.sqg_admissible
    if not consistent:
        warnings.append(
            "numeric divergence trend disagrees with the analytic flag "
            f"(trend divergent={trend}, analytic divergent={sym.sqg_admissible})")

    return ConditionReport(
        C0_measured=C0_measured,
        rm_bounded=rm_bounded,
        m_monotone_violations=n_mono,
        m_violation_window=win_mono,
        alpha_monotone_violations=n_alpha,
        alpha_violation_window=win_alpha,
        integral_divergent_analytic=sym.sqg_admissible,
        integral_divergent_trend=trend,
        trend_consistent=consistent,
        partial_integrals=partial,
        warnings=warnings,
    )


# ---------------------------------------------------------------------------
# crossover scale
# ---------------------------------------------------------------------------

def crossover_scale(sym: DissipationSymbol, kappa: float, B: float) -> float:
    """Solve m(delta) = B / kappa by bisection in log radius.

    Needs kappa < r0 / (4 C0) and B >= 1, which place the root strictly
    below r0/4, inside the region where every built-in m is monotone.
    The residual |m(delta) - B/kappa| is verified to 1e-12 relative.
    """
    if not kappa > 0.0 or kappa >= sym.r0 / (4.0 * sym.C0):
        raise ValueError("kappa must lie in (0, r0 / (4 C0))")
    if B < 1.0:
        raise ValueError("crossover scale defined for B >= 1")
    target = B / kappa
    hi = sym.r0 / 4.0
    if sym.m(hi) >= target:
        raise ValueError("m(r0/4) >= B/kappa; preconditions violated")
    lo = hi
    for _ in range(400):
        lo *= 1e-3
        if sym.m(lo) > target:
            break
    else:
        raise RuntimeError("could not bracket the crossover scale")

    ltarget = math.log(target)

    def f(t: float) -> float:
        return math.log(sym.m(math.exp(t))) - ltarget

    t = bisect(f, math.log(lo), math.log(hi), xtol=1e-15, rtol=8.9e-16,
               maxiter=400)
    delta = math.exp(t)
    resid = abs(sym.m(delta) - target)
    if resid > 1e-12 * target:
        raise RuntimeError(
            f"crossover residual {resid:.3e} exceeds 1e-12 relative tolerance")
    _guard_delta_monotone(sym, kappa, B, delta)
    return delta


# canonical name used throughout the construction formulas
delta_of_B = crossover_scale


def _guard_delta_monotone(sym, kappa, B, delta) -> None:
    # cross-call sanity: delta(B) must be non-increasing in B per symbol/kappa
    per_sym = _DELTA_GUARD.setdefault(sym, {})
    hist = per_sym.setdefault(round(kappa, 15), [])
    for B_prev, d_prev in hist:
        if (B - B_prev) * (delta - d_prev) > 1e-12 * delta * max(B, B_prev):
            raise AssertionError(
                "crossover scale failed cross-call monotonicity in B")
    hist.append((B, delta))
    del hist[:-32]


# ---------------------------------------------------------------------------
# Fourier multipliers
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class Multiplier:
    """Radial Fourier multiplier P(|k|) with sampled structure constants."""

    kind: str
    params: dict
    alpha: float            # inf of the sampled log-log slope, clipped to [0, 1]
    slope_sup: float        # sup of the sampled log-log slope
    sub_linear: bool        # integral of P(1/z) z dz near 0 converges
    cD: float               # sampled doubling constant sup P(2z)/P(z)
    cH: float               # sampled Hormander constant, derivatives to order 4
    c0: float | None = None  # lower-bound validity radius (from kernel table)
    label: str = ""

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        scalar = z.ndim == 0
        z = np.abs(np.atleast_1d(z))
        out = _MULTIPLIER_FORMS[self.kind](z, self.params)
        return float(out[0]) if scalar else out

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "params": self.params, "alpha": self.alpha,
            "sub_linear": self.sub_linear, "cD": self.cD, "cH": self.cH,
            "c0": self.c0, "label": self.label,
        }


def _form_power(z, p):
    s = p["s"]
    out = np.zeros_like(z)
    nz = z > 0.0
    out[nz] = z[nz] ** s
    return out


def _form_log_damped(z, p):
    a = p.get("a", 1.0)
    return z / np.log(2.0 + z) ** a


def _form_constant(z, p):
    return np.full_like(z, float(p["c"]))


def _form_loglog(z, p):
    g = p.get("g", 1.0)
    return np.log1p(np.log1p(z ** 2)) ** g


def _form_zero(z, p):
    return np.zeros_like(z)


_MULTIPLIER_FORMS = {
    "power": _form_power,
    "log-damped": _form_log_damped,
    "constant": _form_constant,
    "loglog": _form_loglog,
    "zero": _form_zero,
}

# central finite-difference stencils (7-point), orders 1..4
_FD_STENCILS = {
    1: (np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0, 1),
    2: (np.array([2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0]) / 180.0, 2),
    3: (np.array([1.0, -8.0, 13.0, 0.0, -13.0, 8.0, -1.0]) / 8.0, 3),
    4: (np.array([-1.0, 12.0, -39.0, 56.0, -39.0, 12.0, -1.0]) / 6.0, 4),
}


def make_multiplier(kind: str, label: str | None = None,
                    sample_grid: np.ndarray | None = None,
                    **params) -> Multiplier:
    """Build a multiplier and sample its structure constants.

    Doubling, Hormander (derivative orders <= 4), growth exponent and
    sub-linearity are measured on a log grid, not assumed.
    """
    if kind not in _MULTIPLIER_FORMS:
        raise ValueError(f"unknown multiplier kind: {kind!r}")
    form = _MULTIPLIER_FORMS[kind]
    if sample_grid is None:
        sample_grid = np.logspace(-3.0, 8.0, 600)
    z = np.asarray(sample_grid, dtype=float)
    P = form(z, params)

    pos = P > 0.0
    cD = float(np.max(form(2.0 * z[pos], params) / P[pos])) if pos.any() else 1.0

    # log-log slope range
    lp = np.full_like(P, -np.inf)
    lp[pos] = np.log(P[pos])
    with np.errstate(invalid="ignore"):
        slopes = np.diff(lp) / np.diff(np.log(z))
    slopes = slopes[np.isfinite(slopes)]
    slope_inf = float(np.min(slopes)) if slopes.size else 0.0
    slope_sup = float(np.max(slopes)) if slopes.size else 0.0
    alpha = min(max(slope_inf, 0.0), 1.0)

    cH = _sampled_hormander(form, params, z[(z > 1e-2) & (z < 1e7)][::6])

    if kind == "zero":
        sub_linear = True
    else:
        sub_linear = not _trend_divergent(
            lambda r: form(1.0 / np.atleast_1d(r), params)[0] * r, 1.0, 14)

    return Multiplier(
        kind=kind, params=dict(params), alpha=alpha, slope_sup=slope_sup,
        sub_linear=sub_linear, cD=cD, cH=cH,
        label=label or _default_label(kind, params),
    )


def _default_label(kind: str, params: dict) -> str:
    if not params:
        return kind
    inner = ",".join(f"{k}={v:g}" for k, v in sorted(params.items()))
    return f"{kind}({inner})"


def _sampled_hormander(form, params, zs: np.ndarray) -> float:
    """max over sampled z and orders j <= 4 of |z^j P^(j)(z)| / P(z)."""
    worst = 0.0
    offsets = np.arange(-3, 4, dtype=float)
    for z0 in zs:
        h = 0.04 * z0
        vals = form(z0 + h * offsets, params)
        base = form(np.array([z0]), params)[0]
        if base <= 0.0:
            continue
        for j, (coef, order) in _FD_STENCILS.items():
            deriv = float(np.dot(coef, vals)) / h ** order
            worst = max(worst, abs(deriv) * z0 ** order / base)
    return worst


def check_euler_hypotheses(P: Multiplier, grid: np.ndarray | None = None) -> dict:
    """Sampled check of the velocity-multiplier hypotheses: doubling and
    z^-alpha P(z) non-increasing for some alpha < 1 (slow growth)."""
    if grid is None:
        grid = np.logspace(-2.0, 8.0, 400)
    vals = P(grid)
    pos = vals > 0.0
    doubling = float(np.max(P(2.0 * grid[pos]) / vals[pos])) if pos.any() else 1.0
    return {
        "doubling": doubling,
        "slope_sup": P.slope_sup,
        "slow_growth": P.slope_sup < 1.0 - 1e-9,
    }


# ---------------------------------------------------------------------------
# spectral application
# ---------------------------------------------------------------------------

def apply_dissipation_spectral(P: Multiplier | Callable, fld):
    """Apply the multiplier pointwise on the spectrum: new_hat = P(|k|) * hat.

    Works for both 1-D and 2-D fields; exact for band-limited data.
    """
    return fld.apply_multiplier(P)
