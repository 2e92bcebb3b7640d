"""Moduli of continuity built on top of a dissipation symbol.

Each family member joins two pieces at the crossover scale delta(B) solving
m(delta) = B / kappa: below it the slope decays from B under an explicit
curvature integral, above it the slope is gamma * m(2 xi), with m taken
through its non-increasing envelope. Construction verifies on the spot that
the slope survives to the joint at B/2 and that the joint is concave;
violated smallness conditions on kappa and gamma are rejected by name.

check_obeys measures breakthrough margins, min over tested pairs of
omega(|x - y|) - |theta(x) - theta(y)|. 1-D tests every grid pair; 2-D
stratifies pairs by separation and direction over lattice offsets and then
refines the worst pair off-lattice.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .fields import ScalarField1D, ScalarField2D
from .quadrature import gauss_legendre, panel_nodes
from .symbols import DissipationSymbol, delta_of_B, symbol_from_json

DEFAULT_KAPPA = 0.1
DEFAULT_GAMMA = 0.01

TWO_PI = 2.0 * math.pi


class ModulusConstructionError(ValueError):
    """A construction precondition or built-in invariant failed."""


class ModulusSearchError(RuntimeError):
    """No certified modulus parameter could be produced for the data."""


# ---------------------------------------------------------------------------
# cached quadrature tables
# ---------------------------------------------------------------------------

class _CumulativeMoments:
    """Running moments of the low-part integrand on a log grid over (0, delta].

    g(eta) = (3 + ln(delta/eta)) / (eta * m(eta)); the table stores cumulative
    integrals of g and of eta * g, so both the slope (B - pref * M0) and the
    value (B*xi - pref*(xi*M0 - M1), by Fubini) come out of one structure.
    Queries land on a node plus one partial Gauss-Legendre panel; below the
    table floor they fall back to live quadrature.

    ``scale`` multiplies the stored integrals. Members carry scale = B so the
    slope formula reads B - [B/(2 C_alpha kappa)] * scaled_M0: certified B
    values can be so large that B^2 overflows and the raw moments underflow,
    while both rescaled factors stay comfortably representable.
    """

    _ORDER = 20

    def __init__(self, sym: DissipationSymbol, delta: float, scale: float = 1.0,
                 nodes_per_decade: int = 32, floor_decades: int = 12):
        self._sym = sym
        self._delta = delta
        self._scale = scale
        self._log_delta = math.log(delta)
        n = floor_decades * nodes_per_decade + 1
        s = np.linspace(self._log_delta - floor_decades * math.log(10.0),
                        self._log_delta, n)
        self._s = s
        seed0, seed1 = self._below_floor(math.exp(s[0]))
        nodes, weights = panel_nodes(s, self._ORDER)
        f0, f1 = self._integrands(nodes)
        p0 = (weights * f0).reshape(n - 1, self._ORDER).sum(axis=1)
        p1 = (weights * f1).reshape(n - 1, self._ORDER).sum(axis=1)
        self._m0 = np.concatenate(([seed0], seed0 + np.cumsum(p0)))
        self._m1 = np.concatenate(([seed1], seed1 + np.cumsum(p1)))

    def _integrands(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        # in the log variable: g deta -> (3 + ln delta - s) / m(e^s) ds
        eta = np.exp(s)
        base = self._scale * (3.0 + self._log_delta - s) / self._sym.envelope(eta)
        return base, eta * base

    def _below_floor(self, xi: float) -> tuple[float, float]:
        # integral over (0, xi] via t = ln(1/eta); integrands decay like
        # e^{-alpha t}, so a truncated window is exact to machine precision
        # (an infinite upper limit would sample radii that underflow to 0)
        t0 = -math.log(xi)
        hi = min(t0 + 48.0 / max(self._sym.alpha, 0.05), 700.0)
        hi = max(hi, t0 + 1.0)
        ld = self._log_delta

        def f0(t: float) -> float:
            return (3.0 + ld + t) / self._sym.envelope(math.exp(-t))

        def f1(t: float) -> float:
            return math.exp(-t) * f0(t)

        v0 = quad(f0, t0, hi, epsabs=0.0, epsrel=1e-11, limit=200)[0]
        v1 = quad(f1, t0, hi, epsabs=0.0, epsrel=1e-11, limit=200)[0]
        return self._scale * v0, self._scale * v1

    def moments(self, xi: float) -> tuple[float, float]:
        if not 0.0 < xi <= self._delta * (1.0 + 1e-12):
            raise ValueError("low-part moment queried outside (0, delta]")
        sq = min(math.log(xi), self._log_delta)
        if sq < self._s[0]:
            return self._below_floor(xi)
        i = int(np.searchsorted(self._s, sq, side="right") - 1)
        i = min(i, len(self._s) - 2)
        m0, m1 = self._m0[i], self._m1[i]
        if sq > self._s[i]:
            x, w = gauss_legendre(self._ORDER)
            half = 0.5 * (sq - self._s[i])
            nodes = self._s[i] + half * (x + 1.0)
            f0, f1 = self._integrands(nodes)
            m0 += half * float(np.dot(w, f0))
            m1 += half * float(np.dot(w, f1))
        return float(m0), float(m1)


def _envelope_breakpoints(sym: DissipationSymbol) -> list[float]:
    pts = []
    if sym._env_plateau is not None:
        r_lo, _, r_hi = sym._env_plateau
        pts += [r_lo, r_hi]
    else:
        pts.append(sym.core_radius)
    if sym._table is not None:
        pts += list(sym._table[0])
    return [p for p in pts if p > 0.0]


class _EnvelopeIntegral:
    """Running integral of the envelope of m from a fixed left endpoint.

    Log-spaced Gauss-Legendre panels with the envelope's kink radii pinned
    as panel edges; the grid extends itself geometrically on demand.
    """

    _ORDER = 20

    def __init__(self, sym: DissipationSymbol, lo: float, hi: float,
                 nodes_per_decade: int = 16):
        self._sym = sym
        self._per_decade = nodes_per_decade
        self._edges = np.array([lo])
        self._cum = np.array([0.0])
        self._grow(hi)

    def _grow(self, hi: float) -> None:
        lo = float(self._edges[-1])
        if hi <= lo:
            return
        decades = math.log10(hi / lo)
        n = max(2, int(math.ceil(self._per_decade * decades)) + 1)
        pts = set(np.geomspace(lo, hi, n))
        pts.update(p for p in _envelope_breakpoints(self._sym) if lo < p < hi)
        edges = np.array(sorted(pts))
        s_edges = np.log(edges)
        nodes, weights = panel_nodes(s_edges, self._ORDER)
        eta = np.exp(nodes)
        vals = (weights * eta * self._sym.envelope(eta)).reshape(
            len(edges) - 1, self._ORDER).sum(axis=1)
        self._edges = np.concatenate((self._edges, edges[1:]))
        self._cum = np.concatenate(
            (self._cum, self._cum[-1] + np.cumsum(vals)))

    def value(self, v: float) -> float:
        if v < self._edges[0] * (1.0 - 1e-12):
            raise ValueError("envelope integral queried left of its origin")
        v = max(v, float(self._edges[0]))
        if v > self._edges[-1]:
            self._grow(2.0 * v)
        i = int(np.searchsorted(self._edges, v, side="right") - 1)
        i = min(i, len(self._edges) - 2)
        out = self._cum[i]
        if v > self._edges[i]:
            x, w = gauss_legendre(self._ORDER)
            half = 0.5 * (math.log(v) - math.log(self._edges[i]))
            nodes = math.log(self._edges[i]) + half * (x + 1.0)
            eta = np.exp(nodes)
            out += half * float(np.dot(w, eta * self._sym.envelope(eta)))
        return float(out)


def envelope_tail_over_r(sym: DissipationSymbol, R: float) -> float:
    """Exact-or-quadrature integral of envelope(u)/u over (R, infinity).

    The far part is the symbol's power tail, integrated in closed form; any
    plateau or core portion of the envelope between R and the tail start is
    added by panel quadrature.
    """
    if not R > 0.0:
        raise ValueError("tail integral needs R > 0")
    if sym._env_plateau is not None:
        tail_start = sym._env_plateau[2]
    else:
        tail_start = sym.core_radius
    out = sym.tail_coeff * max(R, tail_start) ** (-sym.alpha) / sym.alpha
    if R < tail_start:
        edges = sorted({R, tail_start}
                       | {p for p in _envelope_breakpoints(sym)
                          if R < p < tail_start})
        nodes, weights = panel_nodes(np.log(np.array(edges)), 20)
        eta = np.exp(nodes)
        out += float(np.dot(weights, sym.envelope(eta)))
    return out


# ---------------------------------------------------------------------------
# the modulus family
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class ModulusMember:
    """One modulus of the two-piece family; immutable after construction."""

    sym: DissipationSymbol
    B: float
    kappa: float
    gamma: float
    delta: float             # crossover scale, m(delta) = B / kappa
    C_alpha: float           # (1 + 3 alpha) / alpha^2, low-part normalizer
    doubling_bound: float    # 1 + (3/2)^-alpha, claimed for xi >= delta
    slope_at_delta_left: float
    omega_at_delta: float
    # B / (2 C_alpha kappa); pairs with B-rescaled moments so that B^2 is
    # never formed explicitly
    _slope_factor: float = field(repr=False, default=0.0)
    _low: _CumulativeMoments = field(repr=False, default=None)
    _high: _EnvelopeIntegral = field(repr=False, default=None)

    def omega(self, xi):
        return self._vectorized(self._omega_scalar, xi)

    def omega_prime(self, xi):
        return self._vectorized(self._omega_prime_scalar, xi)

    def omega_second(self, xi):
        return self._vectorized(self._omega_second_scalar, xi)

    def evaluate(self, xi: float) -> tuple[float, float, float]:
        return (self._omega_scalar(xi), self._omega_prime_scalar(xi),
                self._omega_second_scalar(xi))

    @staticmethod
    def _vectorized(fn, xi):
        arr = np.asarray(xi, dtype=float)
        if arr.ndim == 0:
            return fn(float(arr))
        return np.array([fn(float(v)) for v in arr.ravel()]).reshape(arr.shape)

    def _omega_scalar(self, xi: float) -> float:
        if xi < 0.0:
            raise ValueError("modulus evaluated at negative separation")
        if xi == 0.0:
            return 0.0
        if xi <= self.delta:
            m0, m1 = self._low.moments(xi)
            return self.B * xi - self._slope_factor * (xi * m0 - m1)
        return self.omega_at_delta + 0.5 * self.gamma * self._high.value(2.0 * xi)

    def _omega_prime_scalar(self, xi: float) -> float:
        if not xi > 0.0:
            raise ValueError("slope evaluated at non-positive separation")
        if xi < self.delta:
            m0, _ = self._low.moments(xi)
            return self.B - self._slope_factor * m0
        return self.gamma * float(self.sym.envelope(2.0 * xi))

    def _omega_second_scalar(self, xi: float) -> float:
        if not xi > 0.0:
            raise ValueError("curvature evaluated at non-positive separation")
        if xi <= self.delta:
            m = float(self.sym.envelope(xi))
            try:
                return -self._slope_factor * (
                    self.B * (3.0 + math.log(self.delta / xi)) / (xi * m))
            except OverflowError:
                return -math.inf  # curvature beyond float range
        # differentiate gamma * env(2 xi); the envelope may only have
        # one-sided slopes at its kinks, so central differences
        h = 1e-6 * xi
        lo = float(self.sym.envelope(2.0 * (xi - h)))
        hi = float(self.sym.envelope(2.0 * (xi + h)))
        return self.gamma * (hi - lo) / (2.0 * h)

    def to_dict(self) -> dict:
        return {"B": self.B, "kappa": self.kappa, "gamma": self.gamma,
                "deltaB": self.delta, "symbol": self.sym.to_dict()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def build_modulus(sym: DissipationSymbol, kappa: float, gamma: float,
                  B: float) -> ModulusMember:
    """Construct a family member and verify its built-in invariants.

    Fails loudly, naming the violated inequality, if the smallness
    conditions do not hold or if the constructed slope dips below B/2
    before the crossover scale.
    """
    if not B >= 1.0:
        raise ModulusConstructionError(f"requires B >= 1, got B = {B}")
    if not gamma > 0.0:
        raise ModulusConstructionError(f"requires gamma > 0, got {gamma}")
    if not 2.0 * gamma <= kappa:
        raise ModulusConstructionError(
            f"requires 2*gamma <= kappa, got gamma = {gamma}, kappa = {kappa}")
    bound = sym.r0 / (4.0 * sym.C0)
    if not 0.0 < kappa < bound:
        raise ModulusConstructionError(
            f"requires kappa < r0/(4*C0) = {bound:.6g}, got kappa = {kappa}")

    delta = delta_of_B(sym, kappa, B)
    if not delta > 1e-300:
        raise ModulusConstructionError(
            f"crossover scale m(delta) = B/kappa underflowed float64 at "
            f"B = {B:.6g}; no representable member this high on the ladder")
    alpha = sym.alpha
    C_alpha = (1.0 + 3.0 * alpha) / alpha ** 2
    slope_factor = B / (2.0 * C_alpha * kappa)
    low = _CumulativeMoments(sym, delta, scale=B)

    m0_d, m1_d = low.moments(delta)
    slope_left = B - slope_factor * m0_d
    if slope_left < 0.5 * B * (1.0 - 1e-8):
        raise ModulusConstructionError(
            f"slope at the crossover came out {slope_left:.6g} < B/2 = "
            f"{0.5 * B:.6g}; the curvature integral ate more than half the "
            "initial slope")
    omega_delta = B * delta - slope_factor * (delta * m0_d - m1_d)

    slope_right = gamma * float(sym.envelope(2.0 * delta))
    if slope_right > slope_left * (1.0 + 1e-10):
        raise ModulusConstructionError(
            f"joint not concave: slope jumps {slope_left:.6g} -> "
            f"{slope_right:.6g} at delta(B)")

    high = _EnvelopeIntegral(sym, 2.0 * delta, max(16.0, 32.0 * delta))
    return ModulusMember(
        sym=sym, B=float(B), kappa=kappa, gamma=gamma, delta=delta,
        C_alpha=C_alpha, doubling_bound=1.0 + 1.5 ** (-alpha),
        slope_at_delta_left=slope_left, omega_at_delta=omega_delta,
        _slope_factor=slope_factor, _low=low, _high=high)


def eval_modulus(mem: ModulusMember, xi: float) -> tuple[float, float, float]:
    """(omega, omega', omega'') at xi > 0."""
    return mem.evaluate(xi)


def modulus_from_dict(doc: dict) -> ModulusMember:
    sym = symbol_from_json(doc["symbol"])
    mem = build_modulus(sym, doc["kappa"], doc["gamma"], doc["B"])
    if abs(mem.delta - doc["deltaB"]) > 1e-9 * doc["deltaB"]:
        raise ModulusConstructionError(
            f"stored crossover {doc['deltaB']:.12g} disagrees with the "
            f"reconstruction {mem.delta:.12g}")
    return mem


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    margin: float            # raw worst margin; >= 0 means satisfied
    scale: float             # size against which the tolerance was applied
    at: float | None = None  # xi where the worst margin occurred
    note: str = ""


@dataclass
class ValidationReport:
    label: str
    checks: list[CheckResult]
    grid: np.ndarray = field(repr=False, default=None)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            state = "ok" if c.passed else "FAIL"
            loc = "" if c.at is None else f" at xi={c.at:.3e}"
            out.append(f"{state:4s} {c.name}: margin {c.margin:+.3e}"
                       f" (scale {c.scale:.3e}){loc} {c.note}".rstrip())
        return out


def _sampled_second(omega: Callable[[float], float], xi: float,
                    h_rel: float = 3e-2) -> float:
    # wide relative step: the curvature varies logarithmically, and a narrow
    # one runs into cancellation noise for members with tiny crossover scales
    h = h_rel * xi
    return (omega(xi + h) - 2.0 * omega(xi) + omega(xi - h)) / h ** 2


def validate_modulus(mem, xi_grid: np.ndarray | None = None,
                     tol: float = 1e-8) -> ValidationReport:
    """Check every property the preservation argument asks of a modulus.

    ``mem`` is a constructed member, or any callable omega(xi) (adversarial
    inputs); for callables the construction-specific checks are skipped and
    derivatives come from sampled differences. Failures are report entries,
    never exceptions.
    """
    is_member = isinstance(mem, ModulusMember)
    if is_member:
        omega = mem._omega_scalar
        delta = mem.delta
        B = mem.B
        label = (f"B={mem.B:g} kappa={mem.kappa:g} gamma={mem.gamma:g} "
                 f"on {mem.sym.label}")
    else:
        omega = mem
        delta = 1e-3
        B = None
        label = getattr(mem, "__name__", "callable")
    if xi_grid is None:
        lo = 1e-6 * delta
        n = int(math.ceil(24 * math.log10(1e3 / lo))) + 1
        xi_grid = np.geomspace(lo, 1e3, n)
    xi = np.asarray(xi_grid, dtype=float)

    w = np.array([omega(float(v)) for v in xi])
    checks: list[CheckResult] = []

    if B is None:
        B = omega(xi[0] * 1e-2) / (xi[0] * 1e-2)  # sampled initial slope

    # vanishing at 0 and monotonicity
    checks.append(CheckResult(
        "vanishes_at_zero", w[0] <= max(2.0 * B * xi[0], tol), float(w[0]),
        B * xi[0], at=float(xi[0])))
    slopes = np.diff(w) / np.diff(xi)
    i = int(np.argmin(slopes))
    checks.append(CheckResult(
        "non_decreasing", bool(slopes[i] >= -tol * B),
        float(slopes[i]), B, at=float(xi[i])))

    # concavity via chord slopes (robust on an uneven grid)
    dec = slopes[:-1] - slopes[1:]
    j = int(np.argmin(dec))
    checks.append(CheckResult(
        "concave", bool(dec[j] >= -tol * B), float(dec[j]), B,
        at=float(xi[j + 1])))

    # initial slope and curvature blow-up from sampled differences
    xi_a = xi[0]
    slope0 = (omega(xi_a * (1.0 + 1e-4)) - omega(xi_a)) / (xi_a * 1e-4)
    checks.append(CheckResult(
        "initial_slope", abs(slope0 - B) <= 1e-3 * B, float(B - abs(slope0 - B)),
        B, at=float(xi_a), note=f"omega'(0+) ~ {slope0:.6g} vs B = {B:.6g}"))
    d2_small = _sampled_second(omega, min(1e-6 * delta, xi[0] * 10.0))
    d2_mid = _sampled_second(omega, 1e-2 * delta)
    diverges = d2_small < 0.0 and d2_mid < 0.0 and d2_small <= 2.0 * d2_mid
    checks.append(CheckResult(
        "curvature_blows_up", bool(diverges), float(d2_mid - d2_small),
        max(abs(d2_mid), tol),
        note=f"omega'' sampled {d2_small:.4g} (small xi) vs {d2_mid:.4g}"))

    # linear-cap, crossover and doubling checks need the construction
    if is_member:
        below = xi[xi <= delta]
        if below.size:
            gap = B * below - np.array([omega(float(v)) for v in below])
            k = int(np.argmin(gap))
            checks.append(CheckResult(
                "below_B_xi", bool(gap[k] >= -tol * B * delta), float(gap[k]),
                B * delta, at=float(below[k])))
        checks.append(CheckResult(
            "slope_at_crossover", mem.slope_at_delta_left >= 0.5 * B * (1.0 - tol),
            float(mem.slope_at_delta_left - 0.5 * B), B, at=float(delta)))
        checks.append(CheckResult(
            "value_at_crossover", mem.omega_at_delta >= 0.5 * delta * B * (1.0 - tol),
            float(mem.omega_at_delta - 0.5 * delta * B), delta * B,
            at=float(delta)))
        above = xi[xi >= delta]
        wa = np.array([omega(float(v)) for v in above])
        w2 = np.array([omega(float(2.0 * v)) for v in above])
        dmarg = mem.doubling_bound * wa - w2
        k = int(np.argmin(dmarg / wa))
        checks.append(CheckResult(
            "doubling", bool(dmarg[k] >= -tol * wa[k]), float(dmarg[k]),
            float(wa[k]), at=float(above[k]),
            note=f"bound {mem.doubling_bound:.6g}"))

    return ValidationReport(label=label, checks=checks, grid=xi)


# ---------------------------------------------------------------------------
# obedience
# ---------------------------------------------------------------------------

@dataclass
class StratumRow:
    separation: float
    omega: float
    worst_increment: float
    margin: float
    x: tuple = ()
    y: tuple = ()


@dataclass
class ObedienceReport:
    margin: float
    worst_pair: tuple          # ((x...), (y...)) coordinates of the arg-min
    worst_separation: float
    worst_increment: float
    rows: list[StratumRow]
    refined: bool = False

    @property
    def obeys(self) -> bool:
        return self.margin > 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("xi,omega,worst_increment,margin\n")
        for r in self.rows:
            buf.write(f"{r.separation!r},{r.omega!r},"
                      f"{r.worst_increment!r},{r.margin!r}\n")
        return buf.getvalue()


def _omega_of(mem) -> Callable[[float], float]:
    if isinstance(mem, ModulusMember):
        return mem._omega_scalar
    return mem


def check_obeys(fld, mem, directions: int = 64,
                separations_per_decade: int = 12,
                refine: bool = True) -> ObedienceReport:
    """Breakthrough margin of a field against a modulus.

    ``mem`` may be a ModulusMember or a plain callable omega(xi).
    """
    if isinstance(fld, ScalarField1D):
        return _check_obeys_1d(fld, mem)
    if isinstance(fld, ScalarField2D):
        search = StratifiedPairSearch(
            fld.N, _omega_of(mem), directions=directions,
            separations_per_decade=separations_per_decade)
        return search.run(fld, refine=refine)
    raise TypeError(f"unsupported field type: {type(fld).__name__}")


def _check_obeys_1d(fld: ScalarField1D, mem) -> ObedienceReport:
    omega = _omega_of(mem)
    v = fld.values
    N = fld.N
    h = TWO_PI / N
    rows: list[StratumRow] = []
    worst = (math.inf, 0, 0)  # (margin, lag, base index)
    for lag in range(1, N // 2 + 1):
        diff = np.abs(v - np.roll(v, -lag))
        j = int(np.argmax(diff))
        inc = float(diff[j])
        sep = lag * h
        om = float(omega(sep))
        margin = om - inc
        rows.append(StratumRow(sep, om, inc, margin,
                               x=(j * h,), y=(((j + lag) % N) * h,)))
        if margin < worst[0]:
            worst = (margin, lag, j)
    margin, lag, j = worst
    return ObedienceReport(
        margin=float(margin),
        worst_pair=((j * h,), (((j + lag) % N) * h,)),
        worst_separation=lag * h,
        worst_increment=float(omega(lag * h) - margin),
        rows=rows)


class StratifiedPairSearch:
    """Reusable 2-D pair search over lattice offsets.

    Offsets are the distinct lattice roundings of ``directions`` angles times
    log-spaced radii (torus metric, |v| up to pi*sqrt(2)); omega is evaluated
    once per distinct separation and cached, so repeated runs over an
    evolving field only pay for the increment scans. ``run`` can sweep a
    subset of strata (for cheap in-loop monitoring with a warm start) and
    refines the worst pair continuously off-lattice.
    """

    def __init__(self, N: int, omega: Callable[[float], float],
                 directions: int = 64, separations_per_decade: int = 12):
        self.N = N
        self.omega = omega
        h = TWO_PI / N
        smax = math.pi * math.sqrt(2.0)
        n_sep = max(2, int(math.ceil(
            separations_per_decade * math.log10(smax / h))) + 1)
        radii = np.geomspace(h, smax, n_sep)
        angles = np.pi * np.arange(directions) / directions
        seen = {}
        for s in radii:
            for phi in angles:
                dx = int(round(s * math.cos(phi) / h))
                dy = int(round(s * math.sin(phi) / h))
                if dx == 0 and dy == 0:
                    continue
                dx = (dx + N // 2) % N - N // 2
                dy = (dy + N // 2) % N - N // 2
                seen[(dx, dy)] = True
        offs = np.array(sorted(seen))
        sep = h * np.hypot(np.minimum(np.abs(offs[:, 0]), N - np.abs(offs[:, 0])),
                           np.minimum(np.abs(offs[:, 1]), N - np.abs(offs[:, 1])))
        order = np.argsort(sep)
        self.offsets = offs[order]
        self.separations = sep[order]
        self.omegas = np.array([omega(float(s)) for s in self.separations])

    def run(self, fld: ScalarField2D, subset: np.ndarray | None = None,
            refine: bool = True) -> ObedienceReport:
        if fld.N != self.N:
            raise ValueError("field resolution does not match the search grid")
        v = fld.values
        h = TWO_PI / self.N
        idx = np.arange(len(self.offsets)) if subset is None else subset
        rows: list[StratumRow] = []
        worst = (math.inf, -1, -1)
        for i in idx:
            dx, dy = int(self.offsets[i, 0]), int(self.offsets[i, 1])
            diff = np.abs(v - np.roll(v, (-dx, -dy), axis=(0, 1)))
            j = int(np.argmax(diff))
            inc = float(diff.flat[j])
            margin = float(self.omegas[i]) - inc
            jx, jy = divmod(j, self.N)
            rows.append(StratumRow(
                float(self.separations[i]), float(self.omegas[i]), inc, margin,
                x=(jx * h, jy * h),
                y=(((jx + dx) % self.N) * h, ((jy + dy) % self.N) * h)))
            if margin < worst[0]:
                worst = (margin, i, j)
        margin, i, j = worst
        dx, dy = self.offsets[i]
        jx, jy = divmod(j, self.N)
        pair = (np.array([jx * h, jy * h]),
                np.array([jx * h + dx * h, jy * h + dy * h]))
        sep = float(self.separations[i])
        inc = float(self.omegas[i] - margin)
        refined = False
        if refine:
            margin, pair, sep, inc = self._refine(fld, pair, margin, sep, inc)
            refined = True
        return ObedienceReport(
            margin=float(margin), worst_pair=(tuple(pair[0]), tuple(pair[1])),
            worst_separation=sep, worst_increment=inc, rows=rows,
            refined=refined)

    def _refine(self, fld, pair, margin, sep, inc):
        # continuous descent of omega(|v|) - |theta(x+v) - theta(x)| around
        # the worst lattice pair; 5^4 local grid shrinking by 4 per round
        h = TWO_PI / self.N
        x = np.asarray(pair[0], dtype=float)
        vvec = np.asarray(pair[1], dtype=float) - x
        span = h
        steps = np.linspace(-1.0, 1.0, 5)
        for _ in range(3):
            dxs = span * steps
            cand_x = x[None, :] + np.stack(
                np.meshgrid(dxs, dxs), axis=-1).reshape(-1, 2)
            cand_v = vvec[None, :] + np.stack(
                np.meshgrid(dxs, dxs), axis=-1).reshape(-1, 2)
            X = np.repeat(cand_x, len(cand_v), axis=0)
            V = np.tile(cand_v, (len(cand_x), 1))
            norms = np.hypot(V[:, 0], V[:, 1])
            keep = norms > h / 8.0  # below grid scale the slope check owns it
            X, V, norms = X[keep], V[keep], norms[keep]
            if norms.size == 0:
                break
            th_x = fld.evaluate_at(X)
            th_y = fld.evaluate_at(X + V)
            incs = np.abs(th_y - th_x)
            oms = np.array([self.omega(float(s)) for s in norms])
            margins = oms - incs
            k = int(np.argmin(margins))
            if margins[k] < margin:
                margin = float(margins[k])
                x, vvec = X[k], V[k]
                sep = float(norms[k])
                inc = float(incs[k])
            span /= 4.0
        return margin, (x, x + vvec), sep, inc


# ---------------------------------------------------------------------------
# fitting a modulus to data
# ---------------------------------------------------------------------------

# doubling-ladder ceiling: keeps delta(B) = O(kappa / B) clear of the
# subnormal range, where the moment quadrature grid would underflow
_LADDER_CAP = 1000


def find_B_for_data(fld, sym: DissipationSymbol,
                    kappa: float = DEFAULT_KAPPA,
                    gamma: float = DEFAULT_GAMMA,
                    max_doublings: int = _LADDER_CAP) -> float:
    """Smallest B in a doubling ladder whose modulus the field obeys.

    The candidate must cover the data (omega_B(a) >= 2*sup|theta| at
    a = 2*sup|theta| / sup|grad theta|, with a past the crossover) and is
    then certified by check_obeys before being returned.

    Coverage of the tail grows like (gamma/2) times the envelope integral,
    which for the critical symbol means logarithmically in B: certified
    values are astronomically large yet exactly representable. Data whose
    sup norm exceeds roughly gamma/4 times the float64 exponent range has
    no representable certificate at all; raising gamma (admissible up to
    kappa/2) is the only way to certify more data per rung.
    """
    unorm = fld.linf()
    gnorm = fld.grad_linf()
    if unorm == 0.0 or gnorm == 0.0:
        # constant fields have no increments; the base member certifies
        return 1.0
    a = 2.0 * unorm / gnorm
    B = 1.0
    best_cover = -math.inf
    rungs = min(max_doublings, _LADDER_CAP)
    for _ in range(rungs):
        try:
            mem = build_modulus(sym, kappa, gamma, B)
        except ModulusConstructionError as err:
            raise ModulusSearchError(
                f"ladder stopped at B = {B:.6g} without a certificate "
                f"(best coverage margin {best_cover:.6g}): {err}") from err
        cover = mem.omega(max(a, mem.delta * (1.0 + 1e-12))) - 2.0 * unorm
        best_cover = max(best_cover, cover)
        if a > mem.delta and cover >= 0.0:
            if check_obeys(fld, mem).margin > 0.0:
                return B
        B *= 2.0
    if sym.sqg_admissible:
        hint = (" (coverage grows slowly for admissible symbols; gamma up "
                "to kappa/2 certifies more data per rung)")
    else:
        hint = (" (symbol is not sqg_admissible: omega_B(a) saturates at a "
                "finite supremum, so large data can be uncoverable)")
    raise ModulusSearchError(
        f"no certified B up to 2^{rungs}; best coverage margin "
        f"{best_cover:.6g}{hint}")
