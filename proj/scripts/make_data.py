#!/usr/bin/env python3
# Apache License, Version 2.0, refer to LICENSE.txt
"""Writes the JSON data files of the bundled corpus (models/*.data.json)."""

import json
import pathlib

import numpy as np

MODELS = pathlib.Path(__file__).resolve().parent.parent / "models"


def dump(name, data):
    (MODELS / f"{name}.data.json").write_text(json.dumps(data, indent=1) + "\n")


def main():
    dump("multimodal", {})
    dump("eight_schools", {
        "J": 8,
        "y": [28, 8, -3, 7, -1, 1, 18, 12],
        "sigma": [15, 10, 16, 11, 9, 11, 10, 18],
    })

    rng = np.random.default_rng(20240601)
    n, k = 50, 3
    x = rng.normal(size=(n, k))
    beta = np.array([1.0, -0.5, 2.0])
    y = 0.7 + x @ beta + rng.normal(scale=0.8, size=n)
    dump("linear_regression", {
        "N": n, "K": k,
        "x": np.round(x, 4).tolist(),
        "y": np.round(y, 4).tolist(),
    })

    z = rng.random(60) < 0.35
    y = np.where(z, rng.normal(-2.0, 0.7, 60), rng.normal(2.0, 0.7, 60))
    dump("mixture", {"N": 60, "y": np.round(y, 4).tolist()})


if __name__ == "__main__":
    main()
