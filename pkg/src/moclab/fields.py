"""Periodic scalar fields on uniform grids, 1-D and 2-D.

Fields pair grid values with their FFT and are treated as immutable:
operations hand back new instances. Wavenumbers are integers (domain is the
2 pi torus), so band-limited fields are evaluated exactly at arbitrary
points through their trigonometric interpolant.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

TWO_PI = 2.0 * math.pi


def dealias_cutoff(N: int) -> int:
    """Largest retained wavenumber under the 2/3 rule."""
    return N // 3


class ScalarField1D:
    """Real scalar on x_j = 2 pi j / N, j = 0..N-1."""

    def __init__(self, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size < 4 or values.size % 2:
            raise ValueError("need a 1-D array of even length >= 4")
        self.values = values
        self.N = values.size
        self._spec: np.ndarray | None = None

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_function(cls, N: int, fn: Callable) -> "ScalarField1D":
        return cls(fn(cls.grid_of(N)))

    @classmethod
    def from_spectrum(cls, spec: np.ndarray, N: int) -> "ScalarField1D":
        fld = cls(np.fft.irfft(spec, n=N))
        fld._spec = np.asarray(spec, dtype=complex)
        return fld

    @classmethod
    def random_band_limited(cls, N: int, kmax: int, amplitude: float,
                            seed: int, odd: bool = False) -> "ScalarField1D":
        """Zero-mean random field with modes 1..kmax, scaled to the requested
        sup norm. odd=True builds a pure sine series."""
        rng = np.random.default_rng(seed)
        kmax = min(kmax, dealias_cutoff(N))
        x = cls.grid_of(N)
        v = np.zeros(N)
        for k in range(1, kmax + 1):
            b = rng.standard_normal() / k
            v += b * np.sin(k * x)
            if not odd:
                v += (rng.standard_normal() / k) * np.cos(k * x)
        sup = np.max(np.abs(v))
        if sup == 0.0:
            raise ValueError("degenerate random draw")
        return cls(v * (amplitude / sup))

    @staticmethod
    def grid_of(N: int) -> np.ndarray:
        return TWO_PI * np.arange(N) / N

    # -- spectral access ---------------------------------------------------

    @property
    def grid(self) -> np.ndarray:
        return self.grid_of(self.N)

    @property
    def spec(self) -> np.ndarray:
        """Unnormalized rfft of the values."""
        if self._spec is None:
            self._spec = np.fft.rfft(self.values)
        return self._spec

    def coeffs(self) -> np.ndarray:
        """Normalized coefficients c_k = rfft/N, k = 0..N/2."""
        return self.spec / self.N

    def wavenumbers(self) -> np.ndarray:
        return np.arange(self.N // 2 + 1, dtype=float)

    # -- operations --------------------------------------------------------

    def apply_multiplier(self, P) -> "ScalarField1D":
        newspec = self.spec * P(self.wavenumbers())
        return ScalarField1D.from_spectrum(newspec, self.N)

    def derivative(self) -> "ScalarField1D":
        k = self.wavenumbers()
        return ScalarField1D.from_spectrum(1j * k * self.spec, self.N)

    def evaluate_at(self, points) -> np.ndarray:
        """Trigonometric interpolant at arbitrary points (exact for
        band-limited data; the Nyquist mode is read as a cosine)."""
        pts = np.atleast_1d(np.asarray(points, dtype=float))
        c = self.coeffs()
        w = np.full(c.size, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        k = self.wavenumbers()
        phase = np.exp(1j * pts[:, None] * k[None, :])
        return np.real(phase @ (w * c))

    # -- diagnostics -------------------------------------------------------

    def mean(self) -> float:
        return float(np.mean(self.values))

    def linf(self) -> float:
        return float(np.max(np.abs(self.values)))

    def l2(self) -> float:
        return float(math.sqrt(TWO_PI * np.mean(self.values ** 2)))

    def grad_linf(self) -> float:
        return self.derivative().linf()

    def is_odd(self, tol: float = 1e-10) -> bool:
        v = self.values
        mirrored = np.concatenate(([v[0]], v[-1:0:-1]))
        return bool(np.max(np.abs(v + mirrored)) <= tol * max(1.0, self.linf()))

    def spectral_tail_fraction(self) -> float:
        """Enstrophy fraction carried by the top 1/8 of the active band."""
        k = self.wavenumbers()
        kcut = dealias_cutoff(self.N)
        ens = k ** 2 * np.abs(self.spec) ** 2
        active = ens[(k >= 1) & (k <= kcut)].sum()
        shell = ens[(k >= 0.875 * kcut) & (k <= kcut)].sum()
        return float(shell / active) if active > 0.0 else 0.0


class ScalarField2D:
    """Real scalar on the N x N grid of the 2 pi x 2 pi torus."""

    def __init__(self, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1] \
                or values.shape[0] % 2:
            raise ValueError("need a square array of even size")
        self.values = values
        self.N = values.shape[0]
        self._spec: np.ndarray | None = None

    @classmethod
    def from_function(cls, N: int, fn: Callable) -> "ScalarField2D":
        x = ScalarField1D.grid_of(N)
        X, Y = np.meshgrid(x, x, indexing="ij")
        return cls(fn(X, Y))

    @classmethod
    def from_spectrum(cls, spec: np.ndarray, N: int) -> "ScalarField2D":
        fld = cls(np.fft.irfft2(spec, s=(N, N)))
        fld._spec = np.asarray(spec, dtype=complex)
        return fld

    @classmethod
    def random_band_limited(cls, N: int, kmax: int, amplitude: float,
                            seed: int) -> "ScalarField2D":
        rng = np.random.default_rng(seed)
        kmax = min(kmax, dealias_cutoff(N))
        spec = np.zeros((N, N // 2 + 1), dtype=complex)
        kx = np.fft.fftfreq(N, d=1.0 / N)
        for i in range(N):
            for ky in range(0, kmax + 1):
                kmag2 = kx[i] ** 2 + ky ** 2
                if 1.0 <= kmag2 <= kmax ** 2:
                    amp = rng.standard_normal(2) / kmag2 ** 0.5
                    spec[i, ky] = amp[0] + 1j * amp[1]
        vals = np.fft.irfft2(spec, s=(N, N))
        sup = np.max(np.abs(vals))
        if sup == 0.0:
            raise ValueError("degenerate random draw")
        return cls(vals * (amplitude / sup))

    # -- spectral access ---------------------------------------------------

    @property
    def spec(self) -> np.ndarray:
        if self._spec is None:
            self._spec = np.fft.rfft2(self.values)
        return self._spec

    def wavenumber_grids(self) -> tuple[np.ndarray, np.ndarray]:
        kx = np.fft.fftfreq(self.N, d=1.0 / self.N)[:, None]
        ky = np.arange(self.N // 2 + 1, dtype=float)[None, :]
        return kx, ky

    def wavenumber_modulus(self) -> np.ndarray:
        kx, ky = self.wavenumber_grids()
        return np.hypot(kx, ky)

    # -- operations --------------------------------------------------------

    def apply_multiplier(self, P) -> "ScalarField2D":
        newspec = self.spec * P(self.wavenumber_modulus())
        return ScalarField2D.from_spectrum(newspec, self.N)

    def gradient(self) -> tuple["ScalarField2D", "ScalarField2D"]:
        kx, ky = self.wavenumber_grids()
        gx = ScalarField2D.from_spectrum(1j * kx * self.spec, self.N)
        gy = ScalarField2D.from_spectrum(1j * ky * self.spec, self.N)
        return gx, gy

    def evaluate_at(self, points: np.ndarray) -> np.ndarray:
        """Interpolant at an (M, 2) array of points; cost O(M N^2)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        c = np.fft.fft2(self.values) / self.N ** 2
        k1 = np.fft.fftfreq(self.N, d=1.0 / self.N)
        phase_x = np.exp(1j * pts[:, 0][:, None] * k1[None, :])
        phase_y = np.exp(1j * pts[:, 1][:, None] * k1[None, :])
        # theta(p) = sum_{a,b} c[a,b] e^{i a x} e^{i b y}
        return np.real(np.einsum("ma,ab,mb->m", phase_x, c, phase_y,
                                 optimize=True))

    # -- diagnostics -------------------------------------------------------

    def mean(self) -> float:
        return float(np.mean(self.values))

    def linf(self) -> float:
        return float(np.max(np.abs(self.values)))

    def l2(self) -> float:
        return float(math.sqrt(TWO_PI ** 2 * np.mean(self.values ** 2)))

    def grad_linf(self) -> float:
        gx, gy = self.gradient()
        return float(np.max(np.hypot(gx.values, gy.values)))

    def spectral_tail_fraction(self) -> float:
        kmod = self.wavenumber_modulus()
        kcut = dealias_cutoff(self.N)
        weight = np.full(kmod.shape, 2.0)
        weight[:, 0] = 1.0
        if self.N % 2 == 0:
            weight[:, -1] = 1.0
        ens = weight * kmod ** 2 * np.abs(self.spec) ** 2
        active = ens[(kmod >= 1.0) & (kmod <= kcut)].sum()
        shell = ens[(kmod >= 0.875 * kcut) & (kmod <= kcut)].sum()
        return float(shell / active) if active > 0.0 else 0.0
