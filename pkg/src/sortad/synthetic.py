"""Deterministic synthetic benchmarks used by the test suite and CLI demos.

The generators return labeled Datasets whose anomalies sit off the normal
manifold but inside float range, so detector quality is measurable without
shipping any external data.  ``thyroid_like`` mirrors the shape of the ODDS
Thyroid table (3772 rows, 6 features, 93 anomalies); it is a stand-in, not
the real data.
"""

import argparse

import numpy as np
import pandas as pd

from .data import Dataset


def gaussian_with_outliers(n_normal=1000, n_anomaly=30, dim=6, seed=0, shift=4.0,
                           correlation=0.0):
    """Gaussian inliers plus anomalies displaced along random directions.

    ``correlation`` mixes in a shared latent factor (equicorrelated features,
    unit marginals); at 0 the inliers are isotropic standard normal.
    """
    if n_normal < 1 or n_anomaly < 0:
        raise ValueError("need n_normal >= 1 and n_anomaly >= 0")
    if not 0.0 <= correlation < 1.0:
        raise ValueError("correlation must lie in [0, 1)")
    rng = np.random.default_rng([seed, 11])
    latent = rng.normal(size=(n_normal, 1))
    normal = np.sqrt(correlation) * latent + np.sqrt(1.0 - correlation) * rng.normal(
        size=(n_normal, dim)
    )
    directions = rng.normal(size=(n_anomaly, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radius = shift + rng.exponential(0.5, size=(n_anomaly, 1))
    anomaly = directions * radius + 0.6 * rng.normal(size=(n_anomaly, dim))
    features = np.vstack([normal, anomaly])
    labels = np.concatenate([np.zeros(n_normal, int), np.ones(n_anomaly, int)])
    order = rng.permutation(features.shape[0])
    return Dataset(
        features=features[order], labels=labels[order], name="gaussian-with-outliers"
    )


def thyroid_like(seed=1929):
    """3772 x 6 hormone-panel-shaped table with 93 anomalous rows.

    Normal rows follow one latent physiological factor with feature-specific
    scales and noise; anomalous rows push a coherent subset of features far
    outside the interquartile bulk, mimicking hyper/hypo readings.
    """
    n_total, n_anomaly = 3772, 93
    n_normal = n_total - n_anomaly
    rng = np.random.default_rng([seed, 23])

    def normal_rows(count):
        t = rng.normal(size=count)
        tsh = np.exp(-0.55 * t + 0.35 * rng.normal(size=count)) * 1.7
        t3 = 1.9 + 0.32 * t + 0.2 * rng.normal(size=count)
        tt4 = 104.0 + 21.0 * t + 9.0 * rng.normal(size=count)
        t4u = 0.97 + 0.05 * t + 0.1 * rng.normal(size=count)
        fti = tt4 / np.clip(t4u, 0.6, None) + 3.0 * rng.normal(size=count)
        age = rng.uniform(15.0, 95.0, size=count)
        return np.column_stack([tsh, t3, tt4, t4u, fti, age])

    normal = normal_rows(n_normal)
    anomaly = normal_rows(n_anomaly)
    direction = rng.integers(0, 2, size=n_anomaly)  # 0 hypo, 1 hyper
    severity = 4.0 + rng.exponential(1.5, size=n_anomaly)
    hypo = direction == 0
    # hypo: TSH explodes, T3/TT4/FTI collapse; hyper: TSH collapses while
    # T3/TT4/FTI rise and binding protein shifts.  Shifts are several IQRs on
    # multiple axes so the anomalies sit clearly off the normal manifold.
    anomaly[hypo, 0] *= np.exp(0.8 * severity[hypo])
    anomaly[hypo, 1] -= 0.5 * severity[hypo]
    anomaly[hypo, 2] -= 30.0 * severity[hypo]
    anomaly[hypo, 4] -= 34.0 * severity[hypo]
    hyper = ~hypo
    anomaly[hyper, 0] *= np.exp(-0.9 * severity[hyper])
    anomaly[hyper, 1] += 0.55 * severity[hyper]
    anomaly[hyper, 2] += 30.0 * severity[hyper]
    anomaly[hyper, 3] += 0.12 * severity[hyper]
    anomaly[hyper, 4] += 34.0 * severity[hyper]

    features = np.vstack([normal, anomaly])
    labels = np.concatenate([np.zeros(n_normal, int), np.ones(n_anomaly, int)])
    order = rng.permutation(n_total)
    return Dataset(features=features[order], labels=labels[order], name="thyroid-like")


def to_csv(dataset, path, label_col="label"):
    """Write a Dataset as a headered CSV (features f0.. plus the label column)."""
    columns = {f"f{i}": dataset.features[:, i] for i in range(dataset.features.shape[1])}
    if dataset.labels is not None:
        columns[label_col] = dataset.labels
    # %.17g keeps every float64 bit so a load sees the exact generated values
    pd.DataFrame(columns).to_csv(path, index=False, float_format="%.17g")


GENERATORS = {
    "thyroid-like": thyroid_like,
    "gaussian-with-outliers": gaussian_with_outliers,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="python -m sortad.synthetic",
        description="Write a synthetic benchmark dataset to CSV.",
    )
    parser.add_argument("--dataset", choices=sorted(GENERATORS), default="thyroid-like")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", required=True, help="output CSV path")
    args = parser.parse_args(argv)
    kwargs = {} if args.seed is None else {"seed": args.seed}
    dataset = GENERATORS[args.dataset](**kwargs)
    to_csv(dataset, args.out)
    print(f"wrote {len(dataset)} rows to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
