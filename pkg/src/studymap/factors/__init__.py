"""Factor-table kernels with a compiled core and a pure-NumPy fallback.

Variable elimination spends essentially all of its time multiplying factor
tables and summing out binary variables.  Those two kernels exist twice:

  studymap.factors._core    Cython extension (built by setup.py)
  studymap.factors.core_py  NumPy broadcasting fallback

The fallback is selected automatically when the extension is missing, or
explicitly with STUDYMAP_FACTOR_BACKEND=python|compiled.  Both backends
compute every output element with the identical single expression
(``a[i]*b[j]`` for products, ``t[i0]+t[i1]`` for marginalization), so their
results are bit-for-bit equal; benchmarks/bench_factors.py compares their
speed.

Table layout shared by both: a factor over k binary variables (given as a
strictly increasing tuple of integer indices) is a flat float64 array of
2**k entries in binary-counting order with the LAST variable as the least
significant bit.
"""

from __future__ import annotations

import os

from studymap.factors import core_py

_requested = os.environ.get("STUDYMAP_FACTOR_BACKEND", "").strip().lower()

_core_compiled = None
if _requested != "python":
    try:
        from studymap.factors import _core as _core_compiled  # type: ignore[attr-defined]
    except ImportError:
        _core_compiled = None
        if _requested == "compiled":
            raise ImportError(
                "STUDYMAP_FACTOR_BACKEND=compiled but the extension is not built; "
                "run `python setup.py build_ext --inplace`"
            )

if _core_compiled is not None:
    BACKEND = "compiled"
    product = _core_compiled.product
    marginalize = _core_compiled.marginalize
else:
    BACKEND = "python"
    product = core_py.product
    marginalize = core_py.marginalize


def available_backends() -> list[str]:
    names = ["python"]
    if _core_compiled is not None:
        names.insert(0, "compiled")
    return names


def get_backend(name: str):
    """Return the module implementing *name* ("python" or "compiled")."""
    if name == "python":
        return core_py
    if name == "compiled":
        if _core_compiled is None:
            raise ImportError("compiled backend not built")
        return _core_compiled
    raise ValueError(f"unknown backend {name!r}")
