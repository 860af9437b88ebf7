# %% [markdown]
# Trapezoid rule for the oscillatory kernel
#
# K y(s) is the integral of exp(i kappa |s - t|) y(t) over [-1, 1].  The
# discrete operator K_p replaces it by the compound trapezoid rule on
# p = ceil(gamma kappa^beta) panels.  We compare it with the closed form
# available for polynomial-times-exponential functions.

# %%
import numpy as np

from oscfie import QuadratureSpec, quad_error_bound, sup_quad_error
from oscfie.harness.problem import benchmark_oscillatory_sum

# %%
for kappa in (10, 50, 100):
    chi = benchmark_oscillatory_sum(kappa, m=2, Gamma=2.0)
    spec = QuadratureSpec(gamma=6, beta=1, kappa=kappa)
    err = sup_quad_error(chi, spec)
    bound = quad_error_bound(chi.r, chi.tau, 2.0, 2, 6, 1, kappa)
    print(f"kappa={kappa:4d}  p={spec.p:4d}  sup error {err:.3e}   a-priori bound {bound:.3e}")

# %% [markdown]
# The bound is loose by four orders of magnitude.  Refining p shows the
# observed convergence order.

# %%
chi = benchmark_oscillatory_sum(50, m=2, Gamma=2.0)
ps = [300, 600, 1200, 2400]
errs = [sup_quad_error(chi, QuadratureSpec.with_panels(p, 50)) for p in ps]
for p, e in zip(ps, errs):
    print(f"p={p:5d}  error {e:.3e}")
print("fitted log-log slope:", round(np.polyfit(np.log(ps), np.log(errs), 1)[0], 3))
