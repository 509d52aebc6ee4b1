"""Timing comparison of the compiled kernels against the NumPy fallback.

Run after building the extension:

    python benchmarks/bench_backends.py

Covers the two hot paths (red-black relaxation sweeps and pairwise kernel
blocks) plus an end-to-end linear solve and a short fixed-point run. Forcing
RINGLAB_BACKEND=python in a subprocess keeps the comparison honest without
re-importing tricks.
"""

import json
import math
import os
import subprocess
import sys
import time

import numpy as np

BODY = r"""
import json, math, sys, time
import numpy as np
import ringlab as rl
from ringlab import backend
from ringlab.solver import SolverContext

results = {"backend": backend.backend_name()}

g = rl.build_grid(rl.MeridionalDomain(rl.DomainKind.HALF_PLANE),
                  rl.TruncationBox(1.0, 1.0), 384, 768)
ctx = SolverContext(g)
lev = ctx.fine
rng = np.random.default_rng(0)
rhs = np.where(lev.interior, rng.random(g.shape), 0.0)
psi = np.zeros(g.shape)

t0 = time.perf_counter()
for _ in range(50):
    lev.smooth(psi, rhs, 1)
results["smooth_50_sweeps_s"] = time.perf_counter() - t0

t0 = time.perf_counter()
for _ in range(50):
    lev.apply(psi)
results["apply_50_s"] = time.perf_counter() - t0

rt = rng.uniform(0.1, 1.0, 1500)
zt = rng.uniform(-1.0, 1.0, 1500)
out = np.empty((1500, 1500))
t0 = time.perf_counter()
backend.green_block(rt, zt, rt, zt, out)
results["green_block_1500sq_s"] = time.perf_counter() - t0

zeta = np.where(np.hypot(g.R - 0.5, g.Z) < 0.05, 200.0, 0.0)
t0 = time.perf_counter()
rl.solve_K(zeta, g, tol=1e-9)
results["solve_384x768_s"] = time.perf_counter() - t0

r_s = 0.18
p = rl.RunParams(domain=rl.MeridionalDomain(rl.DomainKind.HALF_PLANE),
                 lam=150.0, W=1 / (16 * math.pi**2 * r_s), n_r=128, n_z=256,
                 box=rl.TruncationBox(3 * r_s, 3 * r_s))
t0 = time.perf_counter()
rl.solve_fixed_point(p)
results["fixed_point_128x256_s"] = time.perf_counter() - t0

print(json.dumps(results))
"""


def run(backend_choice: str) -> dict:
    env = dict(os.environ, RINGLAB_BACKEND=backend_choice)
    out = subprocess.run([sys.executable, "-c", BODY], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    rows = []
    for choice in ("cython", "python"):
        try:
            rows.append(run(choice))
        except subprocess.CalledProcessError as err:
            print(f"backend {choice} unavailable: {err.stderr.strip()[-200:]}")
    if len(rows) == 2:
        fast, slow = rows
        print(f"{'kernel':28s} {'cython':>10s} {'python':>10s} {'speedup':>8s}")
        for key in fast:
            if key == "backend":
                continue
            ratio = slow[key] / fast[key]
            print(f"{key:28s} {fast[key]:10.4f} {slow[key]:10.4f} {ratio:7.1f}x")
    elif rows:
        print(json.dumps(rows[0], indent=2))


if __name__ == "__main__":
    main()
