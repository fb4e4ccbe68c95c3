"""Regenerate the shipped DAC conformance vectors.

    python tools/gen_dac_vectors.py [--n 10000] [--seed 20240607]
"""
import argparse
import csv
import random
from pathlib import Path

from dac_oracle import reference_p_set

COLUMNS = ["omega", "p_inv", "q_inv", "p_set_star", "omega0", "m_p", "w_min", "w_max", "alpha", "q", "p_set_min",
           "p_set"]


def sample(rng):
    omega0 = 60.0
    half = rng.choice([0.1, 0.1, 0.05, 0.2, 0.5])
    w_min, w_max = omega0 - half, omega0 + half
    # a third in band, the rest spread over +-1.5 Hz
    if rng.random() < 1 / 3:
        omega = rng.uniform(w_min, w_max)
    else:
        omega = rng.uniform(omega0 - 1.5, omega0 + 1.5)
    return {
        "omega": omega,
        "p_inv": rng.uniform(-0.5, 1.5),
        "q_inv": rng.uniform(-1.0, 1.0),
        "p_set_star": rng.uniform(-0.5, 1.5),
        "omega0": omega0,
        "m_p": rng.uniform(0.2, 5.0),
        "w_min": w_min,
        "w_max": w_max,
        "alpha": rng.uniform(1e-6, 10.0),
        "q": rng.choice([1, 3, 5]),
        "p_set_min": rng.choice([0.0, 0.0, 0.1]),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=10000)
    ap.add_argument("--seed", type=int, default=20240607)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "src/gfmdac/data/dac_vectors.csv"))
    args = ap.parse_args()
    rng = random.Random(args.seed)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for _ in range(args.n):
            s = sample(rng)
            s["p_set"] = reference_p_set(**s)
            w.writerow([repr(s[c]) if c != "q" else s[c] for c in COLUMNS])


if __name__ == "__main__":
    main()
