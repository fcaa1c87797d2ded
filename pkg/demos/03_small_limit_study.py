"""A reduced convergence study that finishes in well under a minute.

Run with ``python demos/03_small_limit_study.py``.  The full benchmark is
``diraclimit limit-study config.toml`` with an empty config file.
"""
# %%
import tempfile

from diraclimit import harness

cfg = harness.config_from_dict({
    "grid": {"n": 512},
    "run": {"epsilons": [0.4, 0.2, 0.1], "T": 0.5},
    "initial": {"members": 128},
    "vlasov": {"particles": 16384},
    "residual": {"enabled": False},
}, echo=False)

with tempfile.TemporaryDirectory() as out:
    res = harness.run_limit_study(cfg, output_dir=out)

# %% observable errors against the Vlasov reference
names = [tf.name for tf in cfg.test_functions]
print("eps    " + "  ".join(f"{n:>9}" for n in names) + "   constraint")
for r in res.rows:
    print(f"{r.epsilon:<5}  " + "  ".join(f"{r.errors[n]:.3e}" for n in names) + f"   {r.constraint_norm:.3e}")
print("Monte-Carlo floor of the reference: "
      + ", ".join(f"{k}={v:.1e}" for k, v in res.vlasov_floor.items()))
