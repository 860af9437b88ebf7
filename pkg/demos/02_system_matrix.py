# %% [markdown]
# The collocation matrix and its inverse norm
#
# On N = q p + 1 equispaced nodes the discrete equation becomes M v = f with
# M = I - (lam / p) B.  For small |lam| the inverse norm stays below
# 1 / (1 - eta) uniformly in kappa.  For larger lam it can grow.

# %%
import numpy as np

from oscfie import SystemParams, apply_discrete_operator, build_M, eta_bound, inv_norm, inv_norm_sweep

# %%
pr = SystemParams(lam=0.2, kappa=30)
M = build_M(pr)
v = np.random.default_rng(0).normal(size=pr.N) + 0j
print("N =", pr.N, " |M v - (I - lam K_p) v| =", np.abs(M @ v - apply_discrete_operator(v, pr)).max())

# %%
eta = eta_bound(0.2, 1, 6)
print(f"eta = {eta:.6f}, uniform bound 1/(1-eta) = {1 / (1 - eta):.6f}")
for kappa in (1, 10, 50, 100):
    print(f"  kappa={kappa:4d}  ||M^-1|| = {inv_norm(build_M(SystemParams(0.2, kappa))):.4f}")

# %% [markdown]
# Outside the small-lam regime there is no uniform bound.

# %%
for lam in (1.0, 4.0):
    recs = inv_norm_sweep(lam, 6, 1, 1, [10, 50, 100, 150])
    print(f"lam={lam}: " + ", ".join(f"k={r.kappa:g}: {r.inv_norm:.2f}" for r in recs))
