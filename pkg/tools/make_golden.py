#!/usr/bin/env python3
"""Regenerate the bundled synthetic dataset and its golden pipeline output.

Run from the repository root after any intentional change to the pipeline's
numerics or artifact formats:

    python tools/make_golden.py

The golden report and artifact manifest pin bit-level determinism; the test
suite fails if a run stops reproducing them.
"""

import hashlib
import json
import os
import shutil
import subprocess
import sys
import tempfile

DATA_DIR = os.path.join(os.path.dirname(__file__), "..", "tests", "data")

CONFIG = {
    "flows_csv": "flows_synth.csv",
    "prices_csv": "prices_synth.csv",
    "seed": 2024,
    "dfa": {
        "detrend_order": 2,
        "n_min": 5,
        "n_max_fraction": 0.25,
        "n_scales": 20,
        "min_blocks": 4,
        "include_order1": True,
    },
    "rolling": {"window": 250, "step": 5},
    "surrogates": {"kinds": ["shuffle", "phase_randomize"], "count": 10},
    "tails": {"tail_fraction": 0.05, "net_side": "absolute"},
    "regimes": [
        {"label": "mid", "start_date": "2015-12-01", "end_date": "2016-05-31"},
        {"label": "late", "start_date": "2016-06-01", "end_date": "2016-08-22"},
        {"label": "never", "start_date": "2030-01-01", "end_date": "2030-12-31"},
    ],
    "regression": {"fill_policy": "forward_fill", "robust_se": True, "lag_k": 0},
}


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def main():
    data_dir = os.path.abspath(DATA_DIR)
    os.makedirs(data_dir, exist_ok=True)

    subprocess.run(
        [
            sys.executable, "-m", "flowmem.cli", "synth", "flows",
            "--group", "retail=fgn:0.8",
            "--group", "institutional=fgn:0.65",
            "--group", "foreign=fgn:0.55",
            "-n", "600", "--seed", "42",
            "--out", os.path.join(data_dir, "flows_synth.csv"),
        ],
        check=True,
    )
    subprocess.run(
        [
            sys.executable, "-m", "flowmem.cli", "synth", "prices",
            "-n", "600", "--seed", "43",
            "--out", os.path.join(data_dir, "prices_synth.csv"),
        ],
        check=True,
    )

    from flowmem.pipeline import config_from_json_dict

    config = config_from_json_dict(CONFIG, base_dir=data_dir)
    with open(os.path.join(data_dir, "run_config.json"), "w", encoding="utf-8") as fh:
        fh.write(config.canonical_json())

    golden_dir = os.path.join(data_dir, "golden")
    shutil.rmtree(golden_dir, ignore_errors=True)
    os.makedirs(golden_dir)

    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [
                sys.executable, "-m", "flowmem.cli", "run",
                "--config", os.path.join(data_dir, "run_config.json"),
                "--out", tmp,
            ],
            check=True,
        )
        manifest = {
            name: sha256_file(os.path.join(tmp, name))
            for name in sorted(os.listdir(tmp))
        }
        shutil.copy(os.path.join(tmp, "report.json"), os.path.join(golden_dir, "report.json"))
    with open(os.path.join(golden_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"golden artifacts pinned: {len(manifest)} files")


if __name__ == "__main__":
    main()
