import math
from typing import Iterable

import numpy as np

from bicomb.custom_types import PExponent, PSpecial, Vector
from bicomb.exceptions import MalformedInputError

P_INF = PSpecial.INF


def parse_p(value: PExponent | str | int) -> PExponent:
    """Accepts 1, 2, 2.5, "inf" or "∞"; p below 1 is rejected."""
    if isinstance(value, PSpecial):
        return value
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "infinity", "∞"):
            return P_INF
        try:
            value = float(text)
        except ValueError as e:
            raise MalformedInputError(f"cannot read {value!r} as an exponent p") from e
    p = float(value)
    if math.isinf(p) and p > 0:
        return P_INF
    if math.isnan(p) or p < 1:
        raise MalformedInputError(f"exponent p must lie in [1, inf], got {value!r}")
    return p


def is_inf(p: PExponent) -> bool:
    return p == P_INF


def numpy_ord(p: PExponent) -> float:
    return np.inf if is_inf(p) else float(p)


def p_label(p: PExponent) -> str:
    if is_inf(p):
        return "inf"
    return f"{float(p):g}"


def lp_dual(p: PExponent) -> PExponent:
    if is_inf(p):
        return 1.0
    if p == 1:
        return P_INF
    return p / (p - 1.0)


def as_coord_vec(entries: Iterable[float], dim: int | None = None) -> Vector:
    vec = np.asarray(list(entries), dtype=float)
    if vec.ndim != 1 or vec.size == 0:
        raise MalformedInputError("coordinate vectors must be non-empty and one-dimensional")
    if not np.all(np.isfinite(vec)):
        raise MalformedInputError(f"coordinate vector {vec.tolist()} has non-finite entries")
    if dim is not None and vec.size != dim:
        raise MalformedInputError(f"expected {dim} coordinates, got {vec.size}")
    return vec


def lp_norm(v: Vector | Iterable[float], p: PExponent) -> float:
    arr = np.asarray(v, dtype=float)
    if arr.size == 0:
        return 0.0
    return float(np.linalg.norm(arr, ord=numpy_ord(p)))


def lp_norms(rows: Vector, p: PExponent) -> Vector:
    """Row-wise norms of a 2-d array."""
    return np.linalg.norm(np.atleast_2d(rows), ord=numpy_ord(p), axis=1)


def lp_distance(a: Vector, b: Vector, p: PExponent) -> float:
    return lp_norm(np.asarray(b, dtype=float) - np.asarray(a, dtype=float), p)


def lerp(a: Vector, b: Vector, t: float) -> Vector:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise MalformedInputError(f"cannot interpolate between dimensions {a.size} and {b.size}")
    if t == 0:
        return a.copy()
    if t == 1:
        return b.copy()
    return (1.0 - t) * a + t * b


def chamfer_distortion(p: PExponent, dim: int) -> float:
    """Worst ratio of king-move lattice length to true l^p length in dim dimensions.

    A displacement with sorted magnitudes a_1 >= ... >= a_d costs sum_k a_k w_k on the
    king-move lattice, with w_k = k^(1/p) - (k-1)^(1/p), so the worst case is the dual
    norm of w.
    """
    if dim < 1:
        raise MalformedInputError("dimension must be positive")
    inv = 0.0 if is_inf(p) else 1.0 / float(p)
    weights = np.array(
        [k**inv - ((k - 1) ** inv if k > 1 else 0.0) for k in range(1, dim + 1)], dtype=float
    )
    return lp_norm(weights, lp_dual(p))
