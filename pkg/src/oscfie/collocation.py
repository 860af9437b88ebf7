"""Continuous piecewise-linear / piecewise-quadratic collocation (CM1 / CM2).

The oscillatory moments in the collocation matrix are integrated exactly
element by element, so the only error left is the approximation error of
the piecewise-polynomial space.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from numpy.polynomial import polynomial as P

from .quadrature import polyexp_integral

__all__ = [
    "PiecewiseBasis",
    "CollocationSolution",
    "SingularSystemError",
    "basis_eval",
    "assemble_G",
    "solve_collocation",
    "eval_collocation",
]


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class PiecewiseBasis:
    """Nodal Lagrange basis of degree 1 or 2 on N equispaced nodes of [-1, 1].

    Basis functions are indexed 0..N-1; element e spans nodes e*d .. e*d + d.
    """

    degree: int
    N: int
    local: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.degree not in (1, 2):
            raise ValueError("degree must be 1 or 2")
        if self.N < self.degree + 1 or (self.N - 1) % self.degree:
            raise ValueError(f"N - 1 = {self.N - 1} must be a positive multiple of degree {self.degree}")
        d = self.degree
        # local basis on the reference element [0, d] in units of the node spacing
        ref = np.arange(d + 1, dtype=float)
        coeffs = np.zeros((d + 1, d + 1))
        for i in range(d + 1):
            others = np.delete(ref, i)
            c = P.polyfromroots(others)
            coeffs[i] = c / P.polyval(ref[i], c)
        object.__setattr__(self, "local", coeffs)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.N)

    @property
    def spacing(self) -> float:
        return 2.0 / (self.N - 1)

    @property
    def n_elements(self) -> int:
        return (self.N - 1) // self.degree

    def locate(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Element index and local coordinate (in node spacings) of each point."""
        t = np.asarray(t, dtype=float)
        xi = (t + 1.0) / self.spacing
        e = np.clip(np.floor(xi / self.degree).astype(int), 0, self.n_elements - 1)
        return e, xi - e * self.degree


def basis_eval(basis: PiecewiseBasis, l: int, t):
    """Value of the l-th nodal basis function (0-based) at ``t``."""
    if not 0 <= l < basis.N:
        raise IndexError(f"basis index {l} out of range for N={basis.N}")
    t = np.asarray(t, dtype=float)
    e, u = basis.locate(t)
    i = l - e * basis.degree
    valid = (i >= 0) & (i <= basis.degree)
    out = np.zeros(t.shape)
    if np.any(valid):
        out[valid] = np.array([P.polyval(uu, basis.local[ii]) for uu, ii in zip(u[valid], i[valid])])
    return out[()] if out.ndim == 0 else out


def _local_moments(basis: PiecewiseBasis, kappa: float):
    """Exact oscillatory moments of the local basis on one element.

    Returns (plus, minus, split) where plus[i] = int_0^H phi_i(u) e^{i kappa u} du,
    minus[i] the same with e^{-i kappa u}, and split[i, k] the integral of
    phi_i(u) e^{i kappa |u - k dx|} du for an interior node k (0 < k < d).
    """
    d, dx = basis.degree, basis.spacing
    H = d * dx
    # rescale local coefficients from node-spacing units to physical u
    phys = basis.local / dx ** np.arange(d + 1)[None, :]
    plus = np.array([polyexp_integral(c, 1j * kappa, 0.0, H) for c in phys])
    minus = np.array([polyexp_integral(c, -1j * kappa, 0.0, H) for c in phys])
    split = np.zeros((d + 1, d + 1), dtype=complex)
    for k in range(1, d):
        us = k * dx
        for i, c in enumerate(phys):
            left = np.exp(1j * kappa * us) * polyexp_integral(c, -1j * kappa, 0.0, us)
            right = np.exp(-1j * kappa * us) * polyexp_integral(c, 1j * kappa, us, H)
            split[i, k] = left + right
    return plus, minus, split


def assemble_G(basis: PiecewiseBasis, lam: complex, kappa: float, chunk: int = 1024) -> np.ndarray:
    """G_{jl} = phi_l(x_j) - lam int phi_l(t) e^{i kappa |x_j - t|} dt."""
    d, dx, N, ne = basis.degree, basis.spacing, basis.N, basis.n_elements
    plus, minus, split = _local_moments(basis, kappa)
    G = np.zeros((N, N), dtype=complex)
    starts = np.arange(ne) * d
    for r0 in range(0, N, chunk):
        rows = np.arange(r0, min(N, r0 + chunk))
        k = rows[:, None] - starts[None, :]  # offset of x_j from the element's left node
        phase = np.exp(1j * kappa * dx * np.abs(k))
        left_of = k <= 0
        right_of = k >= d
        for i in range(d + 1):
            block = np.where(left_of, phase * plus[i], 0j)
            block = np.where(right_of, phase * minus[i], block)
            for kk in range(1, d):
                block = np.where(k == kk, split[i, kk], block)
            G[r0 : r0 + rows.size, i : i + d * ne : d] += block
    G *= -lam
    G[np.diag_indices(N)] += 1.0
    return G


@dataclass(frozen=True)
class CollocationSolution:
    basis: PiecewiseBasis
    coeffs: np.ndarray

    def __call__(self, t):
        return eval_collocation(self, t)


def solve_collocation(basis: PiecewiseBasis, lam: complex, kappa: float, f_values,
                      G: np.ndarray | None = None) -> CollocationSolution:
    f = np.asarray(f_values, dtype=complex)
    if f.shape != (basis.N,):
        raise ValueError(f"expected {basis.N} right-hand side values, got {f.shape}")
    if G is None:
        G = assemble_G(basis, lam, kappa)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(G, check_finite=False, overwrite_a=False)
    diag = np.abs(np.diag(lu))
    if diag.min() <= np.finfo(float).eps * diag.max():
        anorm = np.linalg.norm(G, 1)
        rcond, _ = sla.lapack.zgecon(lu, anorm)
        cond = np.inf if rcond == 0 else 1 / rcond
        raise SingularSystemError(f"collocation matrix is singular (condition estimate {cond:.3e})")
    t = sla.lu_solve((lu, piv), f, check_finite=False)
    return CollocationSolution(basis, t)


def eval_collocation(sol: CollocationSolution, t):
    """Evaluate sum_j t_j phi_j(t) using only the supporting element."""
    basis = sol.basis
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    e, u = basis.locate(t_arr)
    d = basis.degree
    out = np.zeros(t_arr.shape, dtype=complex)
    for i in range(d + 1):
        out += sol.coeffs[e * d + i] * P.polyval(u, basis.local[i])
    return out[0] if np.ndim(t) == 0 else out.reshape(np.shape(t))
