"""Random tensor ensembles.

Site tensors are ``scale * U + lam * S`` where ``U`` is Haar-random (a
normalised Gaussian vector reshaped onto the legs) or Gaussian, and ``S`` is an
interpolation target. Legs are named ``l, r, u, d``; sites on an open boundary
simply omit the legs that would point off the lattice.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ArgumentError

__all__ = [
    "Field",
    "Kind",
    "Target",
    "EnsembleSpec",
    "PepsSpec",
    "LEG_NAMES",
    "make_rng",
    "sample_haar_vector",
    "target_tensor",
    "make_site_tensor",
    "make_peps_tensor",
]

LEG_NAMES = "lrud"


class Field(str, enum.Enum):
    REAL = "real"
    COMPLEX = "complex"


class Kind(str, enum.Enum):
    HAAR_ORTHOGONAL = "orthogonal"
    HAAR_UNITARY = "unitary"
    GAUSSIAN_REAL = "gaussian_real"
    GAUSSIAN_COMPLEX = "gaussian_complex"

    @property
    def field(self) -> Field:
        if self in (Kind.HAAR_ORTHOGONAL, Kind.GAUSSIAN_REAL):
            return Field.REAL
        return Field.COMPLEX

    @property
    def is_haar(self) -> bool:
        return self in (Kind.HAAR_ORTHOGONAL, Kind.HAAR_UNITARY)


class Target(str, enum.Enum):
    """Tensor ``S`` that the shift ``lam`` interpolates towards."""

    ALL_ONES = "ones"
    RANK1_SIGNED = "rank1_signed"
    RANK1_HAAR = "rank1_haar"
    POSITIVE_RANDOM = "positive_random"


@dataclass(frozen=True)
class EnsembleSpec:
    kind: Kind = Kind.HAAR_ORTHOGONAL
    D: int = 2
    lam: float = 0.0
    target: Target = Target.ALL_ONES
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "target", Target(self.target))
        if self.D < 1:
            raise ArgumentError(f"bond dimension D must be >= 1, got {self.D}")
        if self.lam < 0:
            raise ArgumentError(f"shift lam must be >= 0, got {self.lam}")


@dataclass(frozen=True)
class PepsSpec:
    D: int = 2
    d: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.D < 1 or self.d < 1:
            raise ArgumentError(f"need D >= 1 and d >= 1, got D={self.D}, d={self.d}")


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent PCG64 stream for ``(seed, *keys)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def sample_haar_vector(n: int, field: Field | str, rng: np.random.Generator) -> np.ndarray:
    """First column of a Haar orthogonal (real) or unitary (complex) matrix."""
    if n < 1:
        raise ArgumentError(f"vector length must be >= 1, got {n}")
    if Field(field) is Field.REAL:
        v = rng.standard_normal(n)
    else:
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def _check_legs(legs: str) -> str:
    if len(set(legs)) != len(legs) or any(c not in LEG_NAMES for c in legs):
        raise ArgumentError(f"legs must be distinct letters from 'lrud', got {legs!r}")
    return "".join(c for c in LEG_NAMES if c in legs)


def _balanced_signs(D: int) -> np.ndarray:
    v = -np.ones(D)
    v[: (D + 1) // 2] = 1.0
    return v


@lru_cache(maxsize=64)
def _positive_random_full(D: int, seed: int) -> np.ndarray:
    # one tensor shared by every site; drawn from its own stream
    t = make_rng(seed, 0x5EED).uniform(0.0, 2.0, size=(D,) * 4)
    t.setflags(write=False)
    return t


def target_tensor(spec: EnsembleSpec, legs: str, rng: np.random.Generator | None = None) -> np.ndarray:
    """The interpolation target ``S`` restricted to ``legs``.

    ``RANK1_HAAR`` draws fresh vectors from ``rng``; the other targets are
    deterministic given ``spec``.
    """
    legs = _check_legs(legs)
    D = spec.D
    shape = (D,) * len(legs)
    if spec.target is Target.ALL_ONES:
        return np.ones(shape)
    if spec.target is Target.POSITIVE_RANDOM:
        full = _positive_random_full(D, spec.seed)
        index = tuple(slice(None) if c in legs else 0 for c in LEG_NAMES)
        return np.array(full[index])
    if spec.target is Target.RANK1_SIGNED:
        # balanced signs on l and u so that every shared edge sees one balanced factor
        vecs = [_balanced_signs(D) if c in "lu" else np.ones(D) for c in legs]
    else:
        if rng is None:
            raise ArgumentError("RANK1_HAAR target needs a generator")
        vecs = [np.sqrt(D) * sample_haar_vector(D, spec.kind.field, rng) for _ in legs]
    out = np.ones(())
    for v in vecs:
        out = np.multiply.outer(out, v)
    return out


def make_site_tensor(spec: EnsembleSpec, legs: str, rng: np.random.Generator) -> np.ndarray:
    """Draw ``scale * U + lam * S`` on the given legs.

    For Haar kinds ``U`` is a unit vector of length ``D**k`` and the scale is
    ``D**(k/2)`` (``D**2`` for a bulk site), so entries have magnitude ~1.
    Gaussian kinds use unit-variance entries directly.
    """
    legs = _check_legs(legs)
    k = len(legs)
    D = spec.D
    shape = (D,) * k
    n = D**k
    if spec.kind.is_haar:
        noise = D ** (k / 2) * sample_haar_vector(n, spec.kind.field, rng)
    elif spec.kind is Kind.GAUSSIAN_REAL:
        noise = rng.standard_normal(n)
    else:
        noise = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
    noise = noise.reshape(shape)
    if spec.lam == 0 and spec.target is not Target.RANK1_HAAR:
        return noise
    return noise + spec.lam * target_tensor(spec, legs, rng)


def make_peps_tensor(spec: PepsSpec, rng: np.random.Generator, legs: str = LEG_NAMES) -> np.ndarray:
    """Unit-norm complex Haar PEPS tensor with shape ``(d, D, ..., D)``."""
    legs = _check_legs(legs)
    shape = (spec.d,) + (spec.D,) * len(legs)
    return sample_haar_vector(int(np.prod(shape)), Field.COMPLEX, rng).reshape(shape)
