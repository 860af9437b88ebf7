# %% [markdown]
# Single-grade against multi-grade training
#
# A sin-activated network is trained so that M applied to its node values
# matches f.  The multi-grade model trains small networks one after
# another, each on the residual left by the previous grades and on top of
# their frozen features.  This run is kept small so it finishes in about a
# couple of minutes; the desk presets in the harness are larger.

# %%
from oscfie import GradeSpec, SystemParams, TrainConfig, build_M, init_he, train_multi_grade, train_single_grade
from oscfie.harness.problem import benchmark_terms, gen_training_grid, relative_L2_error
from oscfie.single_grade import net_evaluator
from oscfie.multi_grade import compose_solution

kappa = 20
pr = SystemParams(0.2, kappa)
terms = benchmark_terms(kappa)
_, f = gen_training_grid(pr, terms)
M = build_M(pr)

# %%
net, hist = train_single_grade(init_he([1, 64, 64, 32, 32, 16, 16, 2], 0), M, f,
                               TrainConfig(epochs=3500, batch_size=128, mu=1e-4))
print(f"single grade: final loss {hist.train_loss[-1]:.2e}, "
      f"relative L2 {relative_L2_error(net_evaluator(net), terms):.3e}")

# %%
spec = GradeSpec([[64, 64], [32, 32], [16, 16]], epochs=(500, 1000, 2000))
stack, hists = train_multi_grade(spec, M, f, TrainConfig(epochs=1, mu=1e-6), seed=0)
print("residual norm after each grade:", [f"{r:.2e}" for r in stack.residual_norms()])
print(f"multi grade: relative L2 {relative_L2_error(lambda t: compose_solution(stack, t), terms):.3e}")
