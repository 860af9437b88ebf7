"""Trapezoidal discretisation of the oscillatory operator

    (K F)(s) = int_{-1}^{1} F(t) exp(i kappa |s - t|) dt

together with closed-form and adaptive reference evaluations of K and the
a-priori error bounds used to pick the number of quadrature panels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

__all__ = [
    "PolyExpTerm",
    "OscillatorySum",
    "QuadratureSpec",
    "ConvergenceError",
    "p_kappa",
    "polyexp_integral",
    "apply_Kp",
    "apply_Kp_grid",
    "exact_K_polyexp",
    "eval_polyexp",
    "rhs_f",
    "reference_K",
    "sup_quad_error",
    "quad_error_bound",
    "delta_sequence",
    "derivative_sup",
]

Evaluator = Callable[[np.ndarray], np.ndarray]

# Taylor branch of the moment integrals is used while |c| * length <= this.
_TAYLOR_RADIUS = 2.0
_TAYLOR_TERMS = 48


class ConvergenceError(RuntimeError):
    """Adaptive reference quadrature did not reach the requested tolerance."""


@dataclass(frozen=True)
class PolyExpTerm:
    """One term p(t) * exp(rate * t), with p given by ascending coefficients."""

    coeffs: np.ndarray
    rate: complex = 0.0

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=complex))
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coeffs must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(c)):
            raise ValueError("coeffs must be finite")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "rate", complex(self.rate))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return P.polyval(t, self.coeffs) * np.exp(self.rate * t)


def eval_polyexp(terms: Sequence[PolyExpTerm], t) -> np.ndarray:
    """Evaluate sum(p_j(t) exp(b_j t)) at real points ``t``."""
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape, dtype=complex)
    for term in terms:
        out += term(t)
    return out


def derivative_sup(coeffs, m: int, n_grid: int = 10_000) -> float:
    """max_{0<=l<=m} sup_{[-1,1]} |w^(l)| for a polynomial weight ``w``.

    Derivatives come from the coefficient recursion; the sup is taken on a
    dense grid that includes both endpoints.
    """
    grid = np.linspace(-1.0, 1.0, n_grid)
    c = np.asarray(coeffs, dtype=complex)
    best = 0.0
    for _ in range(m + 1):
        best = max(best, float(np.max(np.abs(P.polyval(grid, c)))))
        c = P.polyder(c) if c.size > 1 else np.zeros(1, dtype=complex)
    return best


@dataclass
class OscillatorySum:
    """chi(s) = sum_j w_j(s) exp(i alpha_j kappa s).

    ``weights`` holds either ascending polynomial coefficients or vectorised
    callables.  ``tau`` is computed from polynomial weights when omitted.
    """

    weights: list
    alphas: list
    kappa: float
    m: int = 2
    Gamma: float = 0.0
    tau: float | None = None

    def __post_init__(self):
        if len(self.weights) != len(self.alphas):
            raise ValueError("one alpha per weight is required")
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.Gamma < 0:
            raise ValueError("Gamma must be >= 0")
        for a in self.alphas:
            if abs(a) > 1 + self.Gamma + 1e-12:
                raise ValueError(f"|alpha|={abs(a)} exceeds 1 + Gamma={1 + self.Gamma}")
        if self.polynomial:
            self.weights = [np.asarray(w, dtype=complex) for w in self.weights]
            measured = max((derivative_sup(w, self.m) for w in self.weights), default=0.0)
            if self.tau is None:
                self.tau = measured
            elif measured > self.tau * (1 + 1e-12):
                raise ValueError(f"weights violate the derivative bound: {measured} > tau={self.tau}")
        elif self.tau is None:
            raise ValueError("tau must be given for non-polynomial weights")

    @property
    def r(self) -> int:
        return len(self.weights)

    @property
    def polynomial(self) -> bool:
        return all(not callable(w) for w in self.weights)

    def terms(self) -> list[PolyExpTerm]:
        if not self.polynomial:
            raise TypeError("only polynomial weights have a closed form")
        return [PolyExpTerm(w, 1j * a * self.kappa) for w, a in zip(self.weights, self.alphas)]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        for w, a in zip(self.weights, self.alphas):
            wt = w(t) if callable(w) else P.polyval(t, w)
            out += wt * np.exp(1j * a * self.kappa * t)
        return out


def p_kappa(gamma: float, beta: float, kappa: float) -> int:
    """Number of trapezoid panels ceil(gamma * kappa**beta)."""
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    if beta < 1:
        raise ValueError("beta must be >= 1")
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    x = gamma * kappa**beta
    # guard against 600.0000000001 style round-off above an exact integer
    nearest = round(x)
    if abs(x - nearest) <= 8 * np.finfo(float).eps * max(1.0, abs(x)):
        return int(nearest)
    return int(math.ceil(x))


@dataclass(frozen=True)
class QuadratureSpec:
    gamma: float
    beta: float
    kappa: float
    p: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "p", p_kappa(self.gamma, self.beta, self.kappa))

    @classmethod
    def with_panels(cls, p: int, kappa: float) -> "QuadratureSpec":
        """Spec with an explicit panel count (used for refinement studies)."""
        spec = cls(gamma=1.0, beta=1.0, kappa=kappa)
        object.__setattr__(spec, "p", int(p))
        object.__setattr__(spec, "gamma", p / kappa)
        return spec

    @property
    def h(self) -> float:
        return 2.0 / self.p

    @property
    def nodes(self) -> np.ndarray:
        return -1.0 + self.h * np.arange(self.p + 1)

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.p + 1, self.h)
        w[0] = w[-1] = self.h / 2
        return w

    def validate(self, chi: OscillatorySum) -> None:
        if self.beta < 1 or self.gamma < chi.Gamma + 3:
            raise ValueError(
                f"parameter rule violated: need beta>=1 and gamma>=Gamma+3 "
                f"(beta={self.beta}, gamma={self.gamma}, Gamma={chi.Gamma})"
            )


def apply_Kp_grid(F_samples, spec: QuadratureSpec, targets, chunk: int = 4096) -> np.ndarray:
    """K_p applied to node samples, evaluated at every point of ``targets``."""
    F = np.asarray(F_samples, dtype=complex)
    if F.shape != (spec.p + 1,):
        raise ValueError(f"expected {spec.p + 1} samples, got {F.shape}")
    t = np.atleast_1d(np.asarray(targets, dtype=float))
    if np.any(t < -1 - 1e-12) or np.any(t > 1 + 1e-12):
        raise ValueError("targets must lie in [-1, 1]")
    wf = spec.weights * F
    s = spec.nodes
    out = np.empty(t.shape, dtype=complex)
    for i in range(0, t.size, chunk):
        tt = t[i : i + chunk]
        out[i : i + chunk] = np.exp(1j * spec.kappa * np.abs(tt[:, None] - s[None, :])) @ wf
    return out


def apply_Kp(F: Evaluator, spec: QuadratureSpec, s):
    """Compound trapezoidal approximation of (K F)(s); ``s`` may be an array."""
    vals = np.asarray(F(spec.nodes), dtype=complex) * np.ones(spec.p + 1)
    out = apply_Kp_grid(vals, spec, np.atleast_1d(s))
    return out[0] if np.ndim(s) == 0 else out.reshape(np.shape(s))


def _moments_local(coeffs, c: complex, H) -> np.ndarray:
    """int_0^H q(u) exp(c u) du for each length in ``H`` (q ascending coeffs)."""
    H = np.asarray(H, dtype=float)
    q = np.asarray(coeffs, dtype=complex)
    K = q.size
    out = np.zeros(H.shape, dtype=complex)
    if H.size == 0:
        return out
    small = np.abs(c) * H <= _TAYLOR_RADIUS
    if np.any(small):
        Hs = H[small]
        acc = np.zeros(Hs.shape, dtype=complex)
        # sum_n c^n/n! sum_k q_k H^(k+n+1)/(k+n+1)
        cn = 1.0 + 0j
        for n in range(_TAYLOR_TERMS):
            inner = np.zeros(Hs.shape, dtype=complex)
            for k in range(K):
                inner += q[k] * Hs ** (k + n + 1) / (k + n + 1)
            acc += cn * inner
            cn = cn * c / (n + 1)
        out[small] = acc
    if not np.all(small):
        Hb = H[~small]
        # int_0^H u^k e^{cu} du = [e^{cu} sum_j (-1)^j k!/(k-j)! u^(k-j) / c^(j+1)]_0^H
        acc = np.zeros(Hb.shape, dtype=complex)
        eH = np.exp(c * Hb)
        for k in range(K):
            if q[k] == 0:
                continue
            upper = np.zeros(Hb.shape, dtype=complex)
            lower = 0j
            fall = 1.0
            for j in range(k + 1):
                coef = (-1) ** j * fall / c ** (j + 1)
                upper += coef * Hb ** (k - j)
                if k - j == 0:
                    lower = coef
                fall *= k - j
            acc += q[k] * (eH * upper - lower)
        out[~small] = acc
    return out


def polyexp_integral(coeffs, c: complex, a, b) -> np.ndarray:
    """int_a^b p(t) exp(c t) dt in closed form, vectorised over ``a`` and ``b``.

    The polynomial is re-expanded about ``a`` so the moment recursion works on
    [0, b - a]; short intervals relative to 1/|c| fall back to a Taylor series
    in c, which removes the c -> 0 singularity of the antiderivative.
    """
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    coeffs = np.asarray(coeffs, dtype=complex)
    out = np.zeros(a.shape, dtype=complex)
    flat_a, flat_b, flat_out = a.ravel(), b.ravel(), out.ravel()
    # group by left end so the polynomial shift is done once per distinct a
    for a0 in np.unique(flat_a):
        sel = flat_a == a0
        shifted = _shift_poly(coeffs, a0)
        flat_out[sel] = np.exp(c * a0) * _moments_local(shifted, c, flat_b[sel] - a0)
    return flat_out.reshape(a.shape)


def _shift_poly(coeffs, a0: float) -> np.ndarray:
    """Coefficients of p(a0 + u) in u."""
    c = np.asarray(coeffs, dtype=complex)
    out = np.zeros_like(c)
    for k in range(c.size):
        # (a0 + u)^k = sum_j C(k,j) a0^(k-j) u^j
        for j in range(k + 1):
            out[j] += c[k] * math.comb(k, j) * a0 ** (k - j)
    return out


def exact_K_polyexp(terms: Sequence[PolyExpTerm], kappa: float, s):
    """Closed-form (K F)(s) for F = sum p_j(t) exp(b_j t).

    The kernel is split at t = s: on [-1, s] it equals exp(i kappa s) exp(-i kappa t),
    on [s, 1] it equals exp(-i kappa s) exp(i kappa t); each exponential is folded
    into the term's rate before integrating.
    """
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(np.abs(s_arr) > 1 + 1e-12):
        raise ValueError("s must lie in [-1, 1]")
    s_arr = np.clip(s_arr, -1.0, 1.0)
    out = np.zeros(s_arr.shape, dtype=complex)
    ones = np.ones_like(s_arr)
    for term in terms:
        left = polyexp_integral(term.coeffs, term.rate - 1j * kappa, -ones, s_arr)
        right = _integral_to_one(term.coeffs, term.rate + 1j * kappa, s_arr)
        out += np.exp(1j * kappa * s_arr) * left + np.exp(-1j * kappa * s_arr) * right
    return out[0] if np.ndim(s) == 0 else out.reshape(np.shape(s))


def _integral_to_one(coeffs, c: complex, s: np.ndarray) -> np.ndarray:
    # int_s^1 p(t) e^{ct} dt = int_0^{1-s} p(1 - v) e^{c(1-v)} dv, shared left end
    flipped = _shift_poly(coeffs, 1.0) * (-1.0) ** np.arange(np.size(coeffs))
    return np.exp(c) * _moments_local(flipped, -c, 1.0 - s)


def rhs_f(solution_terms: Sequence[PolyExpTerm], lam: complex, kappa: float, s):
    """Right-hand side f = y - lam * K y for a closed-form solution y."""
    y = eval_polyexp(solution_terms, s)
    if len(solution_terms) == 0:
        return y[()] if np.ndim(s) == 0 else y
    out = y - lam * exact_K_polyexp(solution_terms, kappa, s)
    return out


def _gauss_panels(a: float, b: float, n_panels: int, x: np.ndarray, w: np.ndarray):
    edges = np.linspace(a, b, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def reference_K(F: Evaluator, kappa: float, s: float, tol: float = 1e-12,
                order: int = 10, max_doublings: int = 14) -> complex:
    """Adaptive composite Gauss-Legendre value of (K F)(s).

    Panels are split at t = s so the kernel is smooth on each; the initial
    panel length is one kernel wavelength (``order`` nodes per wavelength) and
    the panel count doubles until two successive estimates agree to ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    s = float(s)
    x, w = np.polynomial.legendre.leggauss(order)
    wavelength = 2 * np.pi / kappa

    def estimate(scale: int) -> complex:
        total = 0j
        for a, b in ((-1.0, s), (s, 1.0)):
            if b - a <= 0:
                continue
            n = scale * max(1, int(math.ceil((b - a) / wavelength)))
            t, wt = _gauss_panels(a, b, n, x, w)
            total += np.sum(wt * np.asarray(F(t), dtype=complex) * np.exp(1j * kappa * np.abs(s - t)))
        return complex(total)

    prev = estimate(1)
    for d in range(1, max_doublings + 1):
        cur = estimate(2**d)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    raise ConvergenceError(f"reference_K did not converge: last estimates {prev!r}, {cur!r}")


def sup_quad_error(chi: OscillatorySum, spec: QuadratureSpec, probe_grid=None) -> float:
    """max over probes of |(K chi)(s) - (K_p chi)(s)|."""
    if probe_grid is None:
        probe_grid = np.linspace(-1.0, 1.0, 201)
    probes = np.atleast_1d(np.asarray(probe_grid, dtype=float))
    if probes.size == 0:
        raise ValueError("probe grid must be non-empty")
    if np.any(np.abs(probes) > 1):
        raise ValueError("probe grid must lie in [-1, 1]")
    approx = apply_Kp(chi, spec, probes)
    if chi.polynomial:
        exact = exact_K_polyexp(chi.terms(), chi.kappa, probes)
    else:
        exact = np.array([reference_K(chi, chi.kappa, s, tol=1e-12) for s in probes])
    return float(np.max(np.abs(exact - approx)))


def quad_error_bound(r: int, tau: float, Gamma: float, m: int,
                     gamma: float, beta: float, kappa: float) -> float:
    """A-priori bound on sup|K chi - K_p chi| for p = ceil(gamma kappa^beta)."""
    if beta < 1:
        raise ValueError("parameter rule violated: beta >= 1")
    if gamma < Gamma + 3:
        raise ValueError(f"parameter rule violated: gamma >= Gamma + 3 ({gamma} < {Gamma + 3})")
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    first = 44 * r * tau / (5 * gamma * kappa**beta)
    second = 27 * r * tau * (Gamma + 3) ** m / (5 * gamma**m * kappa ** (m * (beta - 1)))
    return first + second


def delta_sequence(L: int, exact: bool = False):
    """eta_l, delta_l for l = 1..L and sum_l 4^l |delta_l|.

    eta_l = 2l / (4^l (2l+1)!),  delta_l = eta_l - sum_{b<l} eta_{l-b} delta_b / (2l - 2b).
    Everything is done in rationals; floats are returned unless ``exact``.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    eta = [Fraction(2 * l, 4**l * math.factorial(2 * l + 1)) for l in range(1, L + 1)]
    delta: list[Fraction] = []
    for l in range(1, L + 1):
        acc = eta[l - 1]
        for b in range(1, l):
            acc -= eta[l - b - 1] * delta[b - 1] / (2 * l - 2 * b)
        delta.append(acc)
    weighted = sum((4**l * abs(d) for l, d in enumerate(delta, start=1)), Fraction(0))
    if exact:
        return eta, delta, weighted
    return [float(e) for e in eta], [float(d) for d in delta], float(weighted)
