"""NumPy fallback for the factor kernels.

Products reshape each input so its axes line up with the output variable
set and let broadcasting do the elementwise multiply; marginalization adds
the two strided halves of the eliminated axis.  Every output element is a
single multiply or a single add of two float64 values, matching the
compiled kernel exactly.
"""

from __future__ import annotations

import numpy as np


def product(
    vars_a: tuple[int, ...],
    table_a: np.ndarray,
    vars_b: tuple[int, ...],
    table_b: np.ndarray,
    vars_out: tuple[int, ...],
) -> np.ndarray:
    """Pointwise product of two factors over the union scope *vars_out*.

    vars_a and vars_b must be subsequences of vars_out (all sorted).
    """
    shape_a = tuple(2 if v in vars_a else 1 for v in vars_out)
    shape_b = tuple(2 if v in vars_b else 1 for v in vars_out)
    a = table_a.reshape(shape_a)
    b = table_b.reshape(shape_b)
    return np.ascontiguousarray((a * b).reshape(-1))


def marginalize(vars_in: tuple[int, ...], table: np.ndarray, position: int) -> np.ndarray:
    """Sum out the variable at *position* (index into vars_in)."""
    k = len(vars_in)
    shaped = table.reshape((2,) * k)
    idx0 = tuple(0 if i == position else slice(None) for i in range(k))
    idx1 = tuple(1 if i == position else slice(None) for i in range(k))
    return np.ascontiguousarray((shaped[idx0] + shaped[idx1]).reshape(-1))
