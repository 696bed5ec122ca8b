#!/usr/bin/env python3
"""Benchmark the compiled factor kernels against the NumPy fallback.

Run from the repository root:

    python benchmarks/bench_factors.py

The script re-executes itself once per available backend (backend choice
happens at import time, via STUDYMAP_FACTOR_BACKEND) and prints a table of
micro-kernel times plus the end-to-end posterior computation on the shipped
57-concept demo map with 50 answers.
"""

from __future__ import annotations

import json
import os
import random
import subprocess
import sys
import time
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def timeit(fn, min_seconds: float = 0.4) -> float:
    """Mean seconds per call, measured over at least min_seconds."""
    fn()  # warm-up
    calls = 0
    start = time.perf_counter()
    while True:
        fn()
        calls += 1
        elapsed = time.perf_counter() - start
        if elapsed >= min_seconds:
            return elapsed / calls


def worker() -> None:
    import numpy as np

    from studymap import factors as fk
    from studymap.concepts import load_concept_map
    from studymap.network import build_network, posteriors
    from studymap.templates import generate_bank, load_templates_dir

    results: dict[str, float] = {}

    rng = np.random.default_rng(12345)
    for k in (6, 10, 14):
        vars_a = tuple(range(0, k, 2))
        vars_b = tuple(range(1, k, 2)) + (0,)
        vars_b = tuple(sorted(set(vars_b)))
        vars_out = tuple(range(k))
        table_a = rng.random(1 << len(vars_a))
        table_b = rng.random(1 << len(vars_b))
        results[f"product k={k}"] = timeit(
            lambda: fk.product(vars_a, table_a, vars_b, table_b, vars_out)
        )
        table = rng.random(1 << k)
        results[f"marginalize k={k}"] = timeit(lambda: fk.marginalize(vars_out, table, k // 2))

    cmap = load_concept_map(str(REPO / "src/studymap/data/demo_map.json"))
    bank = generate_bank(
        load_templates_dir(str(REPO / "src/studymap/data/templates")), per_template=10
    ).instances
    pick = random.Random(7)
    answered = [(inst.meta, pick.randint(0, 1)) for inst in pick.sample(bank, 50)]
    net = build_network(cmap, answered)
    results["posteriors demo+50"] = timeit(lambda: posteriors(net))

    print(json.dumps({"backend": fk.BACKEND, "results": results}))


def main() -> None:
    rows = []
    for backend in ("compiled", "python"):
        env = dict(os.environ, STUDYMAP_FACTOR_BACKEND=backend)
        proc = subprocess.run(
            [sys.executable, __file__, "--worker"],
            env=env,
            capture_output=True,
            text=True,
        )
        if proc.returncode != 0:
            if backend == "compiled":
                print("compiled backend unavailable (build it with "
                      "`python setup.py build_ext --inplace`); skipping")
                continue
            print(proc.stderr, file=sys.stderr)
            raise SystemExit(proc.returncode)
        rows.append(json.loads(proc.stdout.strip().splitlines()[-1]))

    if not rows:
        return
    names = list(rows[0]["results"])
    width = max(len(n) for n in names)
    header = f"{'benchmark':<{width}}" + "".join(f"  {row['backend']:>12}" for row in rows)
    if len(rows) == 2:
        header += f"  {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name in names:
        line = f"{name:<{width}}"
        for row in rows:
            line += f"  {row['results'][name] * 1e6:>10.1f}us"
        if len(rows) == 2:
            ratio = rows[1]["results"][name] / rows[0]["results"][name]
            line += f"  {ratio:>8.1f}x"
        print(line)


if __name__ == "__main__":
    if "--worker" in sys.argv:
        worker()
    else:
        main()
