"""Monte Carlo contraction and the sign-problem free-energy gap.

``delta_f`` compares the signed network with its entrywise-modulus
("bosonic") twin: ``exp(-delta_f * N) = |C| / C_b``. On a long cylinder it is
measured from the per-slice growth of two transfer vectors started from the
same positive vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contraction import LatticeNetwork, apply_column, configuration_values, edge_list
from .ensembles import EnsembleSpec, make_site_tensor
from .errors import ArgumentError, SizeError

__all__ = [
    "McEstimate",
    "DeltaFRecord",
    "mc_estimate_value",
    "cylinder_columns",
    "cylinder_delta_f",
    "delta_f_from_columns",
    "closed_delta_f",
    "DELTA_F_LIMIT",
]

DELTA_F_LIMIT = 2**16


@dataclass(frozen=True)
class McEstimate:
    mean: complex
    stderr: float
    samples: int

    @property
    def relative_error(self) -> float:
        return self.stderr / abs(self.mean) if self.mean != 0 else math.inf


@dataclass
class DeltaFRecord:
    W: int
    L: int
    burn_in: int
    delta_f: float
    delta_f_stderr: float
    slice_series: np.ndarray = field(repr=False)
    phase: complex = 1.0


def mc_estimate_value(net: LatticeNetwork, K: int, rng: np.random.Generator) -> McEstimate:
    """Uniform-configuration estimate ``D**#edges * mean(T(x))``."""
    if K < 2:
        raise ArgumentError(f"need at least two samples, got K={K}")
    edges = edge_list(net)
    dims = np.array([net.leg_dim(*a) for a, _ in edges], dtype=np.int64)
    volume = float(np.prod(dims.astype(float)))
    configs = rng.integers(0, dims, size=(K, len(dims))) if len(dims) else np.zeros((K, 0), int)
    terms = volume * configuration_values(net, configs)
    mean = terms.mean()
    stderr = float(np.std(terms, ddof=1) / math.sqrt(K))
    return McEstimate(mean.item(), stderr, K)


def cylinder_columns(spec: EnsembleSpec, W: int, L: int, rng: np.random.Generator):
    """Yield ``L`` columns of ``W`` bulk ``(l, r, u, d)`` tensors, closed into rings."""
    for _ in range(L):
        yield [make_site_tensor(spec, "lrud", rng) for _ in range(W)]


def _batch_stderr(x: np.ndarray, batches: int = 10) -> float:
    if len(x) < 2 * batches:
        return float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0
    means = np.array([b.mean() for b in np.array_split(x, batches)])
    return float(np.std(means, ddof=1) / math.sqrt(batches))


def delta_f_from_columns(columns, W: int, burn_in: int = 0) -> DeltaFRecord:
    """Run the signed and modulus transfers over an explicit column sequence.

    Each slice contributes ``(log g_abs - log g_signed) / W`` where ``g`` is
    the factor by which that slice grows the (renormalised) vector. The phase
    of the signed vector is tracked but does not enter ``delta_f``.
    """
    signed = None
    bosonic = None
    series = []
    for col in columns:
        if signed is None:
            D = col[0].shape[0]
            signed = np.ones((D,) * W)
            bosonic = np.ones((D,) * W)
        signed = apply_column(signed, col, periodic=True)
        bosonic = apply_column(bosonic, [np.abs(t) for t in col], periodic=True)
        ns = np.linalg.norm(signed)
        nb = np.linalg.norm(bosonic)
        if ns == 0:
            raise FloatingPointError("signed transfer vector vanished")
        signed = signed / ns
        bosonic = bosonic / nb
        series.append((math.log(nb) - math.log(ns)) / W)
    series = np.asarray(series)
    L = len(series)
    if burn_in >= L:
        raise ArgumentError(f"burn_in={burn_in} must be smaller than L={L}")
    kept = series[burn_in:]
    flat = signed.ravel()
    k = int(np.argmax(np.abs(flat)))
    phase = flat[k] / abs(flat[k])
    return DeltaFRecord(W, L, burn_in, float(kept.mean()), _batch_stderr(kept), series, complex(phase))


def closed_delta_f(columns, W: int) -> float:
    """``-(1/N) log(|C| / C_b)`` for the finite cylinder with all-ones end vectors.

    Same transfer as :func:`delta_f_from_columns` with ``burn_in=0`` plus the
    closing overlap with the ones vector, so it is the exact free-energy gap
    of that finite network rather than a per-slice growth rate.
    """
    signed = bosonic = None
    log_s = log_b = 0.0
    n = 0
    for col in columns:
        if signed is None:
            D = col[0].shape[0]
            signed = np.ones((D,) * W)
            bosonic = np.ones((D,) * W)
        signed = apply_column(signed, col, periodic=True)
        bosonic = apply_column(bosonic, [np.abs(t) for t in col], periodic=True)
        ns, nb = np.linalg.norm(signed), np.linalg.norm(bosonic)
        signed, bosonic = signed / ns, bosonic / nb
        log_s += math.log(ns)
        log_b += math.log(nb)
        n += W
    close_s = abs(signed.sum())
    if close_s == 0:
        return math.inf
    return (log_b + math.log(bosonic.sum()) - log_s - math.log(close_s)) / n


def cylinder_delta_f(
    spec: EnsembleSpec,
    W: int,
    L: int = 400,
    burn_in: int = 20,
    rng: np.random.Generator | None = None,
    min_kept: int = 50,
) -> DeltaFRecord:
    """Per-site free-energy gap on a cylinder of circumference ``W`` and length ``L``."""
    if spec.D**W > DELTA_F_LIMIT:
        raise SizeError(f"D**W = {spec.D ** W} exceeds the transfer limit {DELTA_F_LIMIT}")
    if L - burn_in < min_kept:
        raise ArgumentError(f"need L - burn_in >= {min_kept}, got L={L}, burn_in={burn_in}")
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    return delta_f_from_columns(cylinder_columns(spec, W, L, rng), W, burn_in)
