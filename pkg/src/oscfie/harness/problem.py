"""Benchmark problem, sampling grids and error metrics."""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial import polynomial as P

from ..quadrature import PolyExpTerm, eval_polyexp, polyexp_integral, rhs_f
from ..system import SystemParams

__all__ = [
    "DEFAULT_LAMBDA",
    "benchmark_terms",
    "benchmark_oscillatory_sum",
    "analytic_l2_norm",
    "gen_training_grid",
    "gen_validation_grid",
    "relative_L2_error",
    "fft_relative_error",
    "FFTError",
]

DEFAULT_LAMBDA = 0.2
L2_PANELS = 20_000
FFT_POINTS = 20_001
VALIDATION_POINTS = 512

# y(s) = s + (3s^2 + 2s + 1) e^{i kappa s} + (s + 2) e^{-i kappa s}
_BENCHMARK = (((0.0, 1.0), 0.0), ((1.0, 2.0, 3.0), 1.0), ((2.0, 1.0), -1.0))


def benchmark_terms(kappa: float) -> list[PolyExpTerm]:
    return [PolyExpTerm(np.array(c, dtype=complex), 1j * a * kappa) for c, a in _BENCHMARK]


def benchmark_oscillatory_sum(kappa: float, m: int = 2, Gamma: float = 2.0):
    from ..quadrature import OscillatorySum

    return OscillatorySum([np.array(c, dtype=complex) for c, _ in _BENCHMARK],
                          [a for _, a in _BENCHMARK], kappa, m=m, Gamma=Gamma)


def analytic_l2_norm(terms) -> float:
    """||y||_2 on [-1, 1] from exact integrals of p_j conj(p_k) e^{(b_j + conj b_k) t}."""
    total = 0.0 + 0.0j
    for tj in terms:
        for tk in terms:
            prod = P.polymul(tj.coeffs, np.conj(tk.coeffs))
            total += polyexp_integral(prod, tj.rate + np.conj(tk.rate), -1.0, 1.0)
    return math.sqrt(max(total.real, 0.0))


def gen_training_grid(params: SystemParams, solution_terms, lam=None):
    """Collocation nodes x_j and exact right-hand side values f(x_j)."""
    lam = params.lam if lam is None else lam
    x = params.nodes
    return x, rhs_f(solution_terms, lam, params.kappa, x)


def gen_validation_grid(solution_terms, lam, kappa, n: int = VALIDATION_POINTS, rng=None):
    """Midpoints -1 + 2(j - 1/2)/n, or n sorted uniform draws when ``rng`` is given."""
    if rng is None:
        x = -1.0 + 2.0 * (np.arange(1, n + 1) - 0.5) / n
    else:
        x = np.sort(rng.uniform(-1.0, 1.0, n))
    return x, rhs_f(solution_terms, lam, kappa, x)


def _evaluate(Y, s) -> np.ndarray:
    return np.asarray(Y(s), dtype=complex).reshape(s.shape)


def relative_L2_error(Y, solution_terms, kappa=None, panels: int = L2_PANELS) -> float:
    s = np.linspace(-1.0, 1.0, panels + 1)
    d2 = np.abs(eval_polyexp(solution_terms, s) - _evaluate(Y, s)) ** 2
    num = math.sqrt(np.trapezoid(d2, s))
    return num / analytic_l2_norm(solution_terms)


class FFTError:
    """Per-frequency relative error with the frequency axis z = 0.5 k."""

    def __init__(self, z, rel_err, flagged):
        self.z, self.rel_err, self.flagged = z, rel_err, flagged

    def band_mean(self, lo: float, hi: float) -> float:
        sel = (np.abs(self.z) >= lo) & (np.abs(self.z) <= hi) & ~self.flagged
        return float(np.mean(self.rel_err[sel])) if np.any(sel) else float("nan")


def fft_relative_error(Y, solution_terms, kappa=None, n: int = FFT_POINTS, guard: float = 1e-12) -> FFTError:
    s = np.linspace(-1.0, 1.0, n)
    Fy = np.fft.fftshift(np.fft.fft(eval_polyexp(solution_terms, s)))
    FY = np.fft.fftshift(np.fft.fft(_evaluate(Y, s)))
    k = np.arange(n) - n // 2
    z = 0.5 * k
    mag = np.abs(Fy)
    flagged = mag < guard * mag.max()
    rel = np.full(n, np.nan)
    ok = ~flagged
    rel[ok] = np.abs(Fy[ok] - FY[ok]) / mag[ok]
    return FFTError(z, rel, flagged)
