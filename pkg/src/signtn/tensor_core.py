"""Dense tensor primitives: pairwise contraction, truncated SVD splits, moduli.

Tensors are plain :class:`numpy.ndarray` objects (row-major, real or complex).
Mixing a real and a complex operand promotes the result to complex.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ArgumentError, ContractError

__all__ = [
    "SvdSplit",
    "contract_pair",
    "svd_split",
    "truncation_rank",
    "elementwise_abs",
    "assert_finite",
]


@dataclass(frozen=True)
class SvdSplit:
    """Result of :func:`svd_split`.

    ``left`` carries the left legs plus a new trailing bond leg, ``right``
    carries a new leading bond leg plus the remaining legs. The kept singular
    values are absorbed into ``right``.
    """

    left: np.ndarray
    right: np.ndarray
    kept_spectrum: np.ndarray
    discarded_weight: float


def _check_legs(legs: Sequence[int], ndim: int, name: str) -> list[int]:
    legs = [int(x) for x in legs]
    if len(set(legs)) != len(legs):
        raise ArgumentError(f"{name} contains duplicate legs: {legs}")
    for leg in legs:
        if not -ndim <= leg < ndim:
            raise ArgumentError(f"{name} leg {leg} out of range for rank {ndim}")
    return [leg % ndim for leg in legs]


def contract_pair(a, legs_a: Sequence[int], b, legs_b: Sequence[int]) -> np.ndarray:
    """Sum over paired legs of ``a`` and ``b``.

    The result carries the unpaired legs of ``a`` (in order) followed by the
    unpaired legs of ``b``.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    la = _check_legs(legs_a, a.ndim, "legs_a")
    lb = _check_legs(legs_b, b.ndim, "legs_b")
    if len(la) != len(lb):
        raise ArgumentError("legs_a and legs_b must pair up one-to-one")
    for i, j in zip(la, lb):
        if a.shape[i] != b.shape[j]:
            raise ContractError(
                f"leg {i} of a has dimension {a.shape[i]}, leg {j} of b has {b.shape[j]}"
            )
    return np.tensordot(a, b, axes=(la, lb))


def truncation_rank(spectrum: np.ndarray, chi: int, rel_tol: float = 0.0) -> int:
    """Number of singular values kept under the (chi, rel_tol) rule.

    Keeps ``min(chi, #{k : s_k**2 > rel_tol * sum(s**2)})`` values, always at
    least one. ``spectrum`` must be sorted non-increasing.
    """
    weights = np.abs(spectrum) ** 2
    total = weights.sum()
    if total == 0.0:
        return 1
    significant = int(np.count_nonzero(weights > rel_tol * total))
    return max(1, min(int(chi), significant))


def svd_split(t, left_legs: Sequence[int], chi: int, rel_tol: float = 0.0) -> SvdSplit:
    """Split ``t`` across a bipartition of its legs with a truncated SVD.

    Singular values beyond ``chi`` (or below ``rel_tol`` of the total squared
    weight) are dropped and their squared sum is reported as
    ``discarded_weight``. Ties are broken by keeping the earlier index, which
    is what LAPACK's sorted output gives for free. Values below the
    numerical-rank floor ``s_max * max(shape) * eps`` are always dropped.
    """
    if chi < 1:
        raise ArgumentError(f"chi must be >= 1, got {chi}")
    t = np.asarray(t)
    left = _check_legs(left_legs, t.ndim, "left_legs")
    if not left or len(left) == t.ndim:
        raise ArgumentError("left_legs must be a nonempty proper subset of the legs")
    right = [i for i in range(t.ndim) if i not in left]
    lshape = [t.shape[i] for i in left]
    rshape = [t.shape[i] for i in right]
    mat = np.transpose(t, left + right).reshape(int(np.prod(lshape)), int(np.prod(rshape)))
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    numerical_rank = max(1, int(np.count_nonzero(s > s[0] * max(mat.shape) * np.finfo(float).eps)))
    k = truncation_rank(s, min(chi, numerical_rank), rel_tol)
    discarded = float(np.sum(s[k:] ** 2))
    return SvdSplit(
        left=u[:, :k].reshape(lshape + [k]),
        right=(s[:k, None] * vh[:k]).reshape([k] + rshape),
        kept_spectrum=s[:k].copy(),
        discarded_weight=discarded,
    )


def elementwise_abs(t) -> np.ndarray:
    """Entrywise modulus; the result is always real."""
    return np.abs(np.asarray(t)).astype(float)


def assert_finite(t, what: str = "tensor") -> None:
    if not np.all(np.isfinite(t)):
        raise FloatingPointError(f"{what} has non-finite entries")
