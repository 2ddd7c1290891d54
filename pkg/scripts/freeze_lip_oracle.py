"""Freeze brute-force oracle values for the distance-to-Lipschitz-cone corpus.

Run from the repository root:

    python3 scripts/freeze_lip_oracle.py

Regenerates tests/data/lip_oracle_frozen.json: a fixed corpus of small
random instances (m <= 5 grid points, K = 1) with the pixel-mask
brute-force distance for each, computed at pitch 1e-3.  The test suite
compares the fast reachability algorithm against these frozen values, so
the file must only ever be regenerated by rerunning this script.

The script also self-calibrates the oracle on collinear instances where
the exact answer is known in closed form, and refuses to freeze if the
oracle is off by more than the advertised pitch-level error.
"""

from __future__ import annotations

import json
import pathlib
import sys
import time

import numpy as np

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "tests"))
from oracles import brute_force_dist_to_lip, random_lip_instances  # noqa: E402

SEED = 20260822
N_INSTANCES = 50
PITCH = 1e-3
TOL = 4e-4


def exact_1d(times, values, K):
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    anchor = float(np.max(np.abs(v) - K * t))
    pair = float(np.max(np.abs(v[:, None] - v[None, :]) - K * np.abs(t[:, None] - t[None, :]))) / 2.0
    return max(0.0, anchor, pair)


def calibrate() -> float:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(SEED + 1)))
    worst = 0.0
    for _ in range(8):
        m = int(rng.integers(2, 6))
        interior = np.sort(rng.uniform(0.05, 0.95, size=m - 2))
        times = np.concatenate([[0.0], interior, [1.0]])
        c = rng.uniform(-0.3, 0.3, size=m)
        phi = rng.uniform(0.0, 2.0 * np.pi)
        u = np.array([np.cos(phi), np.sin(phi)])
        values = c[:, None] * u
        got = brute_force_dist_to_lip(times, values, 1.0, pitch=PITCH, tol=TOL)
        want = exact_1d(times, c, 1.0)
        worst = max(worst, abs(got - want))
    return worst


def main():
    t0 = time.time()
    drift = calibrate()
    print(f"oracle calibration vs exact collinear closed form: worst |error| = {drift:.2e}")
    if drift > 1.5e-3:
        raise SystemExit("oracle disagrees with the exact collinear closed form; not freezing")
    records = []
    for idx, (times, values, K) in enumerate(random_lip_instances(N_INSTANCES, SEED)):
        val = brute_force_dist_to_lip(times, values, K, pitch=PITCH, tol=TOL)
        records.append({
            "times": list(map(float, times)),
            "values": [list(map(float, row)) for row in values],
            "K": float(K),
            "oracle": float(val),
        })
        print(f"  instance {idx:02d}: m={len(times)} oracle={val:.6f}")
    out = {
        "seed": SEED,
        "pitch": PITCH,
        "bisect_tol": TOL,
        "calibration_worst_error": drift,
        "instances": records,
    }
    dest = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data"
    dest.mkdir(parents=True, exist_ok=True)
    path = dest / "lip_oracle_frozen.json"
    path.write_text(json.dumps(out, indent=1))
    print(f"froze {len(records)} instances to {path} in {time.time() - t0:.1f} s")


if __name__ == "__main__":
    main()
