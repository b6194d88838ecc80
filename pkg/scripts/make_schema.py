"""Regenerate src/covertime_lab/schema.json from the experiment registry."""

import json
from pathlib import Path

from covertime_lab.experiments import EXPERIMENTS, THRESHOLD_CONVENTION

OUT = Path(__file__).resolve().parents[1] / "src" / "covertime_lab" / "schema.json"


def build() -> dict:
    return {
        "format": "CSV; '#'-prefixed key=value metadata lines, then header "
                  "'experiment,replicate,<columns>,seed_used'",
        "seed_mixing": "seed_i = splitmix64(master_seed + (i+1)*0x9E3779B97F4A7C15) mod 2^64",
        "thresholds": THRESHOLD_CONVENTION,
        "experiments": {
            name: {"description": e.description, "columns": list(e.columns),
                   "defaults": e.defaults}
            for name, e in EXPERIMENTS.items()
        },
    }


if __name__ == "__main__":
    OUT.write_text(json.dumps(build(), indent=2) + "\n")
    print(f"wrote {OUT}")
