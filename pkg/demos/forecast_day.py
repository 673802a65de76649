"""Run the full forecasting chain on a small synthetic dataset.

Generates synthetic weather/PV days, identifies per-hour SDE parameters
from the PV samples, trains the bagged ELM weather-to-parameter model,
simulates forecast fans for held-out days, and prints the evaluation
summary. Artifacts land in ./demo_run.
"""

import json

from pvsde import RunConfig
from pvsde.pipeline import cmd_e2e, cmd_synth


def main():
    cfg = RunConfig(n_days=60, m=6, start_hour=9, n_members=40,
                    hidden_size=40, n_paths=300, seed=7)
    cmd_synth(cfg, "demo_run/dataset")
    res = cmd_e2e(cfg, "demo_run/dataset", "demo_run/out")
    print(json.dumps(res, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
