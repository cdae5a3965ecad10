"""Rectangular tensor networks and their exact contraction.

Two independent routes are provided: :func:`brute_force_value` enumerates
every edge configuration, :func:`transfer_value` sweeps a boundary vector
column by column (or row by row), absorbing one site at a time.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .ensembles import LEG_NAMES, EnsembleSpec, make_rng, make_site_tensor
from .errors import ArgumentError, ContractError, SizeError
from .tensor_core import elementwise_abs

__all__ = [
    "Geometry",
    "LatticeNetwork",
    "ContractionValue",
    "site_legs",
    "random_network",
    "uniform_network",
    "brute_force_value",
    "transfer_value",
    "abs_network",
    "apply_column",
    "edge_list",
    "configuration_values",
    "save_network",
    "load_network",
    "BRUTE_FORCE_LIMIT",
    "TRANSFER_LIMIT",
]

BRUTE_FORCE_LIMIT = 2**24
TRANSFER_LIMIT = 2**20
_CHUNK = 2**16


class Geometry(str, enum.Enum):
    OPEN = "open"
    CYLINDER_ROWS = "cylinder_rows"  # row 0 'u' leg joined to row H-1 'd' leg


def site_legs(
    r: int, c: int, H: int, W: int, geometry: Geometry = Geometry.OPEN, open_right: bool = False
) -> str:
    """Legs present at site ``(r, c)`` after trimming off-lattice legs."""
    periodic = Geometry(geometry) is Geometry.CYLINDER_ROWS
    legs = ""
    if c > 0:
        legs += "l"
    if c < W - 1 or open_right:
        legs += "r"
    if r > 0 or periodic:
        legs += "u"
    if r < H - 1 or periodic:
        legs += "d"
    return legs


@dataclass
class LatticeNetwork:
    """An ``H x W`` grid of site tensors.

    ``tensors[r][c]`` carries the legs ``legs[r][c]`` (a sub-word of
    ``"lrud"``) in that order. Legs listed in ``open_legs`` as
    ``(r, c, leg)`` stay dangling; all other legs are bonds.
    """

    H: int
    W: int
    tensors: list
    legs: list
    geometry: Geometry = Geometry.OPEN
    open_legs: list = field(default_factory=list)

    def __post_init__(self):
        self.geometry = Geometry(self.geometry)
        if self.H < 1 or self.W < 1:
            raise ArgumentError("lattice must have H, W >= 1")
        if self.geometry is Geometry.CYLINDER_ROWS and self.H < 2:
            raise ArgumentError("a row cylinder needs H >= 2")
        self.open_legs = [tuple(x) for x in self.open_legs]
        for r in range(self.H):
            for c in range(self.W):
                t = np.asarray(self.tensors[r][c])
                if t.ndim != len(self.legs[r][c]):
                    raise ArgumentError(f"site {(r, c)}: rank {t.ndim} vs legs {self.legs[r][c]!r}")
        for (r, c, leg), (r2, c2, leg2) in self._bonds():
            d1 = self.leg_dim(r, c, leg)
            d2 = self.leg_dim(r2, c2, leg2)
            if d1 != d2:
                raise ContractError(f"bond {(r, c, leg)}-{(r2, c2, leg2)}: {d1} != {d2}")

    def leg_dim(self, r: int, c: int, leg: str) -> int:
        legs = self.legs[r][c]
        if leg not in legs:
            return 1
        return np.shape(self.tensors[r][c])[legs.index(leg)]

    def neighbour(self, r: int, c: int, leg: str):
        """The ``(r, c, leg)`` at the other end of a bond, or ``None``."""
        if leg not in self.legs[r][c] or (r, c, leg) in self.open_legs:
            return None
        if leg == "r":
            return (r, c + 1, "l")
        if leg == "l":
            return (r, c - 1, "r")
        if leg == "d":
            return ((r + 1) % self.H, c, "u")
        return ((r - 1) % self.H, c, "d")

    def _bonds(self) -> Iterator[tuple]:
        for r in range(self.H):
            for c in range(self.W):
                for leg in "rd":
                    other = self.neighbour(r, c, leg)
                    if other is not None:
                        yield (r, c, leg), other

    @property
    def is_complex(self) -> bool:
        return any(np.iscomplexobj(t) for row in self.tensors for t in row)

    def padded(self, r: int, c: int) -> np.ndarray:
        """Site tensor with all four legs ``(l, r, u, d)``; absent legs get dimension 1."""
        t = np.asarray(self.tensors[r][c])
        legs = self.legs[r][c]
        shape = [t.shape[legs.index(x)] if x in legs else 1 for x in LEG_NAMES]
        return t.reshape(shape)

    def map_tensors(self, fn) -> "LatticeNetwork":
        return replace(self, tensors=[[fn(t) for t in row] for row in self.tensors])

    def transposed(self) -> "LatticeNetwork":
        """Mirror across the main diagonal: rows become columns, l<->u and r<->d."""
        if self.geometry is not Geometry.OPEN:
            raise ArgumentError("only open lattices can be transposed")
        swap = {"l": "u", "u": "l", "r": "d", "d": "r"}
        tensors, legs = [], []
        for c in range(self.W):
            trow, lrow = [], []
            for r in range(self.H):
                old = self.legs[r][c]
                new = "".join(x for x in LEG_NAMES if swap[x] in old)
                perm = [old.index(swap[x]) for x in new]
                trow.append(np.transpose(self.tensors[r][c], perm))
                lrow.append(new)
            tensors.append(trow)
            legs.append(lrow)
        open_legs = [(c, r, swap[x]) for r, c, x in self.open_legs]
        return LatticeNetwork(self.W, self.H, tensors, legs, Geometry.OPEN, open_legs)


@dataclass(frozen=True)
class ContractionValue:
    """A possibly huge or tiny scalar kept as ``phase * exp(log_magnitude)``."""

    log_magnitude: float
    phase: complex

    @classmethod
    def from_scalar(cls, value) -> "ContractionValue":
        mag = abs(value)
        if mag == 0:
            return cls(-math.inf, 1.0)
        return cls(math.log(mag), value / mag)

    @property
    def value(self):
        mag = math.exp(self.log_magnitude) if self.log_magnitude < 709 else math.inf
        return self.phase * mag

    def relative_deviation(self, other: "ContractionValue") -> float:
        """``|self - other| / |other|`` evaluated in log space."""
        if other.log_magnitude == -math.inf:
            return 0.0 if self.log_magnitude == -math.inf else math.inf
        ratio = math.exp(self.log_magnitude - other.log_magnitude) if self.log_magnitude > -math.inf else 0.0
        return abs(ratio * self.phase - other.phase)


def random_network(
    spec: EnsembleSpec,
    H: int,
    W: int,
    geometry: Geometry = Geometry.OPEN,
    open_right: bool = False,
    seed: int | None = None,
) -> LatticeNetwork:
    """Draw every site independently from ``spec``.

    Site ``(r, c)`` uses the stream ``make_rng(seed, r, c)`` (``seed`` defaults
    to ``spec.seed``), so any sub-lattice can be redrawn identically.
    """
    seed = spec.seed if seed is None else seed
    tensors, legs = [], []
    for r in range(H):
        trow, lrow = [], []
        for c in range(W):
            lg = site_legs(r, c, H, W, geometry, open_right)
            trow.append(make_site_tensor(spec, lg, make_rng(seed, r, c)))
            lrow.append(lg)
        tensors.append(trow)
        legs.append(lrow)
    open_legs = [(r, W - 1, "r") for r in range(H)] if open_right else []
    return LatticeNetwork(H, W, tensors, legs, geometry, open_legs)


def uniform_network(
    A: np.ndarray, H: int, W: int, boundary: dict | None = None, open_right: bool = False
) -> LatticeNetwork:
    """Open lattice built from one bulk tensor ``A[l, r, u, d]``.

    Legs that would leave the lattice are contracted with the boundary vectors
    ``boundary['l' | 'r' | 'u' | 'd']`` (all-ones by default). With
    ``open_right`` the right legs of the last column stay dangling.
    """
    A = np.asarray(A)
    boundary = dict(boundary or {})
    for i, x in enumerate(LEG_NAMES):
        boundary.setdefault(x, np.ones(A.shape[i]))
    tensors, legs = [], []
    for r in range(H):
        trow, lrow = [], []
        for c in range(W):
            lg = site_legs(r, c, H, W, open_right=open_right)
            t = A
            # contract from the last axis so earlier axis numbers stay valid
            for i in reversed(range(4)):
                if LEG_NAMES[i] not in lg:
                    t = np.tensordot(t, boundary[LEG_NAMES[i]], axes=([i], [0]))
            trow.append(t)
            lrow.append(lg)
        tensors.append(trow)
        legs.append(lrow)
    open_legs = [(r, W - 1, "r") for r in range(H)] if open_right else []
    return LatticeNetwork(H, W, tensors, legs, Geometry.OPEN, open_legs)


def edge_list(net: LatticeNetwork) -> list:
    """Bonds in row-major site order, right bond before down bond."""
    return list(net._bonds())


def _require_closed(net: LatticeNetwork) -> None:
    if net.open_legs:
        raise ArgumentError("network has dangling legs; its value is not a scalar")


def configuration_values(net: LatticeNetwork, configs: np.ndarray) -> np.ndarray:
    """``T(x)`` for each row of ``configs`` (shape ``(K, #edges)``)."""
    _require_closed(net)
    edges = edge_list(net)
    index = {}
    for e, (a, b) in enumerate(edges):
        index[a] = e
        index[b] = e
    configs = np.asarray(configs)
    out = None
    for r in range(net.H):
        for c in range(net.W):
            t = np.asarray(net.tensors[r][c])
            flat_index = np.zeros(len(configs), dtype=np.int64)
            for axis, leg in enumerate(net.legs[r][c]):
                flat_index = flat_index * t.shape[axis] + configs[:, index[(r, c, leg)]]
            vals = t.ravel()[flat_index]
            out = vals if out is None else out * vals
    if out is None:
        return np.ones(len(configs))
    return out


def brute_force_value(net: LatticeNetwork) -> ContractionValue:
    """Exact value by summing ``T(x)`` over all ``D**#edges`` configurations."""
    _require_closed(net)
    edges = edge_list(net)
    dims = [net.leg_dim(*a) for a, _ in edges]
    total_configs = math.prod(dims)
    if total_configs > BRUTE_FORCE_LIMIT:
        raise SizeError(f"{total_configs} configurations exceed the brute-force limit {BRUTE_FORCE_LIMIT}")
    if not edges:
        value = np.prod([np.asarray(t).reshape(()) for row in net.tensors for t in row])
        return ContractionValue.from_scalar(value.item())
    # edge 0 is the least significant digit
    radices = np.cumprod([1] + dims[:-1])
    total = 0.0
    for start in range(0, total_configs, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total_configs), dtype=np.int64)
        configs = (idx[:, None] // radices[None, :]) % np.asarray(dims)[None, :]
        total = total + configuration_values(net, configs).sum()
    return ContractionValue.from_scalar(complex(total) if np.iscomplexobj(total) else float(total))


def apply_column(v: np.ndarray, column: Sequence[np.ndarray], periodic: bool = False) -> np.ndarray:
    """Push a boundary vector through one column of padded ``(l, r, u, d)`` tensors.

    ``v`` has one axis per row (the ``l`` legs of the column); the result has
    one axis per row for the ``r`` legs. Sites are absorbed one at a time
    while carrying the vertical bond, plus the first ``u`` bond when the
    column closes into a ring.
    """
    H = len(column)
    if v.ndim != H:
        raise ArgumentError(f"vector has {v.ndim} axes for a column of {H} sites")
    top = column[0].shape[2]
    if not periodic and top != 1:
        raise ArgumentError("open column with a dangling top leg")
    w = v[..., None, None] * np.eye(top)
    for i, A in enumerate(column):
        w = np.tensordot(w, A, axes=([i, H + 1], [0, 2]))
        w = np.moveaxis(w, H, i)
    return np.trace(w, axis1=H, axis2=H + 1)


def transfer_value(net: LatticeNetwork, direction: str = "columns") -> ContractionValue:
    """Exact value by sweeping a boundary vector across the lattice.

    ``direction='rows'`` sweeps top to bottom instead (open lattices only),
    which gives an independent route to the same number.
    """
    _require_closed(net)
    if direction == "rows":
        return transfer_value(net.transposed(), "columns")
    if direction != "columns":
        raise ArgumentError(f"unknown direction {direction!r}")
    periodic = net.geometry is Geometry.CYLINDER_ROWS
    dims = [[net.leg_dim(r, c, "r") for r in range(net.H)] for c in range(net.W)]
    biggest = max(math.prod(col) for col in dims)
    if biggest > TRANSFER_LIMIT:
        raise SizeError(f"boundary vector of size {biggest} exceeds the transfer limit {TRANSFER_LIMIT}")
    v = np.ones((1,) * net.H)
    log_mag = 0.0
    for c in range(net.W):
        v = apply_column(v, [net.padded(r, c) for r in range(net.H)], periodic)
        nrm = np.linalg.norm(v)
        if nrm == 0:
            return ContractionValue(-math.inf, 1.0)
        v = v / nrm
        log_mag += math.log(nrm)
    s = v.reshape(()).item()
    result = ContractionValue.from_scalar(s)
    return ContractionValue(result.log_magnitude + log_mag, result.phase)


def abs_network(net: LatticeNetwork) -> LatticeNetwork:
    """Entrywise-modulus network; its value is ``sum_x |T(x)|``."""
    return net.map_tensors(elementwise_abs)


def _encode(t: np.ndarray) -> dict:
    t = np.asarray(t)
    out = {"shape": list(t.shape), "real": t.real.ravel().tolist()}
    if np.iscomplexobj(t):
        out["imag"] = t.imag.ravel().tolist()
    return out


def _decode(obj: dict) -> np.ndarray:
    t = np.asarray(obj["real"], dtype=float)
    if "imag" in obj:
        t = t + 1j * np.asarray(obj["imag"], dtype=float)
    return t.reshape(obj["shape"])


def save_network(net: LatticeNetwork, path) -> None:
    """Write ``net`` as JSON (shape + flat real/imag entries per site)."""
    doc = {
        "H": net.H,
        "W": net.W,
        "geometry": net.geometry.value,
        "open_legs": [list(x) for x in net.open_legs],
        "legs": net.legs,
        "tensors": [[_encode(t) for t in row] for row in net.tensors],
    }
    Path(path).write_text(json.dumps(doc))


def load_network(path) -> LatticeNetwork:
    doc = json.loads(Path(path).read_text())
    tensors = [[_decode(t) for t in row] for row in doc["tensors"]]
    return LatticeNetwork(doc["H"], doc["W"], tensors, doc["legs"], doc["geometry"], doc["open_legs"])
