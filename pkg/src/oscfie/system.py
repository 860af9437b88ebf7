"""Matrix form M = I - (lam/p) B of the discretised operator on collocation nodes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, eigsh

from .quadrature import QuadratureSpec, apply_Kp_grid, p_kappa

__all__ = [
    "SystemParams",
    "SystemMatrix",
    "SingularMatrixError",
    "ParameterRuleError",
    "build_B",
    "build_M",
    "apply_discrete_operator",
    "seminorm",
    "inv_norm",
    "eta_bound",
    "inv_norm_sweep",
    "InvNormRecord",
]

# Dense SVD below this size; LU + Lanczos on (M^H M)^{-1} above it.
SVD_MAX_N = 1200


class SingularMatrixError(np.linalg.LinAlgError):
    pass


class ParameterRuleError(ValueError):
    pass


@dataclass(frozen=True)
class SystemParams:
    lam: complex
    kappa: float
    gamma: float = 6.0
    beta: float = 1.0
    q: int = 1

    def __post_init__(self):
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if int(self.q) != self.q or self.q < 1:
            raise ValueError("q must be a positive integer")
        object.__setattr__(self, "lam", complex(self.lam))
        object.__setattr__(self, "q", int(self.q))

    @property
    def p(self) -> int:
        return p_kappa(self.gamma, self.beta, self.kappa)

    @property
    def N(self) -> int:
        return self.q * self.p + 1

    @property
    def omega(self) -> complex:
        return complex(np.exp(1j * 2 * self.kappa / (self.q * self.p)))

    @property
    def nodes(self) -> np.ndarray:
        """Collocation nodes x_j, j = 0..N-1 (0-based)."""
        return np.linspace(-1.0, 1.0, self.N)

    @property
    def quad_index(self) -> np.ndarray:
        """Positions of the quadrature nodes s_l inside ``nodes``."""
        return np.arange(0, self.N, self.q)

    @property
    def spec(self) -> QuadratureSpec:
        return QuadratureSpec(self.gamma, self.beta, self.kappa)


def _column_weights(params: SystemParams) -> np.ndarray:
    w = np.zeros(params.N)
    w[params.quad_index] = 2.0
    w[0] = w[-1] = 1.0
    return w


def build_B(params: SystemParams) -> np.ndarray:
    """b_{jl} = c_l omega^{|j-l|} with c = 1 at the ends, 2 at interior quadrature
    columns and 0 on every other column."""
    N = params.N
    try:
        idx = np.arange(N)
        dist = np.abs(idx[:, None] - idx[None, :])
        phase = (2 * params.kappa / (params.q * params.p)) * dist
        B = np.exp(1j * phase)
    except MemoryError as exc:  # pragma: no cover
        raise MemoryError(f"cannot allocate {N}x{N} complex matrix") from exc
    B *= _column_weights(params)[None, :]
    return B


@dataclass(frozen=True)
class SystemMatrix:
    params: SystemParams
    entries: np.ndarray = field(repr=False)

    def __matmul__(self, v):
        return self.entries @ v

    @property
    def shape(self):
        return self.entries.shape


def build_M(params: SystemParams) -> SystemMatrix:
    M = -(params.lam / params.p) * build_B(params)
    M[np.diag_indices_from(M)] += 1.0
    M.setflags(write=False)
    return SystemMatrix(params, M)


def apply_discrete_operator(h_samples, params: SystemParams) -> np.ndarray:
    """((I - lam K_p) h)(x_j) straight from the trapezoid rule on the embedded
    quadrature nodes."""
    h = np.asarray(h_samples, dtype=complex)
    if h.shape != (params.N,):
        raise ValueError(f"expected {params.N} samples, got {h.shape}")
    if params.lam == 0:
        return h.copy()
    Kh = apply_Kp_grid(h[params.quad_index], params.spec, params.nodes)
    return h - params.lam * Kh


def seminorm(values) -> float:
    """Discrete RMS seminorm ||.||_N from node values."""
    v = np.asarray(values)
    return float(np.linalg.norm(v) / math.sqrt(v.size))


def _sigma_extremes_iterative(A: np.ndarray, tol: float) -> tuple[float, float]:
    n = A.shape[0]
    lu = sla.lu_factor(A, check_finite=False)

    # (A^H A)^{-1} x = A^{-1} (A^H)^{-1} x
    def matvec(x):
        x = np.asarray(x, dtype=complex).ravel()
        y = sla.lu_solve(lu, x, trans=2, check_finite=False)
        return sla.lu_solve(lu, y, check_finite=False)

    op = LinearOperator((n, n), matvec=matvec, dtype=complex)
    lam_max_inv = eigsh(op, k=1, which="LM", tol=tol, return_eigenvectors=False)[0]
    gram = LinearOperator((n, n), matvec=lambda x: A.conj().T @ (A @ x), dtype=complex)
    lam_max = eigsh(gram, k=1, which="LM", tol=tol, return_eigenvectors=False)[0]
    return 1.0 / math.sqrt(lam_max_inv.real), math.sqrt(lam_max.real)


def inv_norm(M, tol: float = 1e-10, svd_max_n: int = SVD_MAX_N) -> float:
    """||M^{-1}||_2 = 1 / sigma_min(M).

    Raises SingularMatrixError when sigma_min < 1e-13 sigma_max.
    """
    A = M.entries if isinstance(M, SystemMatrix) else np.asarray(M)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    n = A.shape[0]
    if n <= svd_max_n:
        sv = sla.svdvals(A)
        smin, smax = sv[-1], sv[0]
    else:
        try:
            smin, smax = _sigma_extremes_iterative(A, tol)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SingularMatrixError(str(exc)) from exc
    if not np.isfinite(smin) or smin < 1e-13 * smax:
        raise SingularMatrixError(f"sigma_min={smin:.3e} below 1e-13 * sigma_max={smax:.3e}")
    return float(1.0 / smin)


def eta_bound(lam: complex, q: int, gamma: float, Gamma: float = 0.0) -> float:
    """eta = 2|lam| sqrt(q + 1/ceil(gamma)), after checking the parameter rule
    under which ||M^{-1}||_2 <= 1/(1 - eta)."""
    a = abs(lam)
    if not 0 < a < 0.5:
        raise ParameterRuleError(f"|lambda| must lie in (0, 1/2), got {a}")
    g_min = max(Gamma + 3, 4 * a**2 / (1 - 4 * a**2))
    if not gamma > g_min:
        raise ParameterRuleError(f"gamma > max(Gamma+3, 4|lam|^2/(1-4|lam|^2)) = {g_min} violated by gamma={gamma}")
    q_max = 1 / (4 * a**2) - 1 / math.ceil(gamma)
    if not (1 <= q < q_max):
        raise ParameterRuleError(f"q in [1, 1/(4|lam|^2) - 1/ceil(gamma)) = [1, {q_max:.6g}) violated by q={q}")
    return 2 * a * math.sqrt(q + 1 / math.ceil(gamma))


@dataclass(frozen=True)
class InvNormRecord:
    kappa: float
    N: int
    inv_norm: float
    singular: bool = False


def inv_norm_sweep(lam: complex, gamma: float, beta: float, q: int, kappas,
                   svd_max_n: int = SVD_MAX_N) -> list[InvNormRecord]:
    kappas = list(kappas)
    if any(b < a for a, b in zip(kappas, kappas[1:])):
        raise ValueError("kappas must be sorted ascending")
    out = []
    for k in kappas:
        params = SystemParams(lam, k, gamma, beta, q)
        try:
            val = inv_norm(build_M(params), svd_max_n=svd_max_n)
            out.append(InvNormRecord(k, params.N, val, False))
        except SingularMatrixError:
            out.append(InvNormRecord(k, params.N, float("inf"), True))
    return out
