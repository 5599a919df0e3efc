"""Time the hot kernels with numba and with the pure-numpy fallback.

Each backend runs in its own subprocess because the backend is chosen
at import time from ``DCST_NO_NUMBA``.

    python3 benchmarks/bench_kernels.py [--repeats 5]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from dcst import kernels
from dcst.decode import decode_mst

reps = int(sys.argv[1])
rng = np.random.default_rng(0)

def best(fn):
    fn()  # warm-up (and JIT compile)
    ts = []
    for _ in range(reps):
        t = time.perf_counter(); fn(); ts.append(time.perf_counter() - t)
    return min(ts)

T, B, H = 20, 16, 128
xw = rng.normal(size=(T, B, 4 * H)); wh = rng.normal(size=(H, 4 * H)) * 0.1
fwd = kernels.lstm_forward_compiled if kernels.USE_NUMBA else kernels.lstm_forward_py
hs, cs, acts = kernels.lstm_forward(xw, wh)
dhs = rng.normal(size=hs.shape)
scores = [rng.normal(size=(m, m + 1)) for m in rng.integers(5, 40, size=64)]
out = {
    "numba": kernels.USE_NUMBA,
    "lstm_forward T=20 B=16 H=128": best(lambda: fwd(xw, wh)),
    "lstm_backward T=20 B=16 H=128": best(lambda: kernels.lstm_backward(dhs, hs, cs, acts, wh)),
    "mst decode 64 sentences m<40": best(lambda: [decode_mst(s) for s in scores]),
}
print(json.dumps(out))
"""


def run(no_numba: bool, repeats: int) -> dict:
    env = dict(os.environ, DCST_NO_NUMBA="1" if no_numba else "0")
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeats)], env=env, capture_output=True,
                         text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    fast, slow = run(False, args.repeats), run(True, args.repeats)
    if not fast.pop("numba"):
        print("numba unavailable; both columns use the numpy path")
    slow.pop("numba")
    print(f"{'kernel':<32} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}")
    for k in fast:
        print(f"{k:<32} {1e3 * fast[k]:10.2f} {1e3 * slow[k]:10.2f} {slow[k] / fast[k]:8.1f}")
    print("(training uses the numpy lstm_forward under both settings; see dcst/kernels.py)")


if __name__ == "__main__":
    main()
