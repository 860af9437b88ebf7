# %% [markdown]
# Experiment harness
#
# Every run writes metrics.csv, manifest.json and traces under its output
# directory.  The same runs are available from the shell as
# ``oscfie solve cm1``, ``oscfie train mgdl --preset desk-mgdl`` and
# ``oscfie bound-suite``.

# %%
import json
import tempfile
from pathlib import Path

from oscfie.harness.experiments import bound_suite, config_from_dict, run_experiment

out = Path(tempfile.mkdtemp())
records, manifest = run_experiment(config_from_dict({"preset": "cm2", "kappa": 50, "out_dir": str(out)}))
print((out / "metrics.csv").read_text())
print(json.dumps(manifest["runs"][0]["error_decomposition"], indent=1))

# %%
for row in bound_suite(kappas_quad=(10,), kappas_inv=(10, 50), kappas_decomp=(10,)):
    print(f"{row['suite']:20s} {row['case']:16s} {row['measured']:.3e} <= {row['bound']:.3e}  {row['passed']}")
