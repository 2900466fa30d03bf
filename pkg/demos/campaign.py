"""A short seeded campaign written to ``results/demo``.

The same run is available from the command line as
``mimopilot run --config configs/desk.toml --drops 20 --out results/demo``.
"""

from pathlib import Path

from mimopilot.harness import ExperimentConfig, emit_outputs, run_campaign

config = ExperimentConfig.load(Path(__file__).resolve().parent.parent / "configs" / "desk.toml")
config.n_drops = 20
result = run_campaign(config)
for path in emit_outputs(result, "results/demo"):
    print("wrote", path)

for name in config.assigners:
    print(f"{name:8s} fixed {result.mean_min_f(name, False):.4f}  "
          f"power control {result.mean_min_f(name, True):.4f}")
