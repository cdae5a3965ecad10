"""Boundary states of random blocks and their Renyi entanglement.

A ``W x H`` block (``W`` columns, ``H`` rows) of random tensors with its
right-edge legs left open defines a state ``psi`` on ``H`` sites of dimension
``D``. ``psi`` is built as an MPS by absorbing the columns left to right, or
handled exactly through the two Gram matrices of the halves above and below
a cut, which is what makes the ``D**W ~ 10**3`` blocks tractable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contraction import Geometry, LatticeNetwork, apply_column, random_network
from .ensembles import EnsembleSpec, Kind, Target
from .errors import ArgumentError, SizeError
from .tensor_core import svd_split

__all__ = [
    "BlockSpec",
    "BoundaryMPS",
    "EntropyRecord",
    "block_network",
    "block_dense_state",
    "mps_from_columns",
    "network_columns",
    "block_boundary_state",
    "renyi_entropy",
    "renyi_from_spectrum",
    "dense_cut_entropy",
    "gram_cut_entropy",
    "block_entropy",
    "entropy_trial",
    "entropy_scan",
    "aggregate_scan",
    "half_value_crossover",
    "GRAM_LIMIT",
    "DEFAULT_CHI_CAP",
]

GRAM_LIMIT = 4**5  # largest D**W handled by the exact Gram route
DEFAULT_CHI_CAP = 256
_ISOMETRY_TOL = 1e-10


@dataclass(frozen=True)
class BlockSpec:
    W: int
    H: int | None = None
    ensemble: EnsembleSpec = field(default_factory=EnsembleSpec)
    cut: int | None = None

    def __post_init__(self):
        if self.W < 1:
            raise ArgumentError(f"block width must be >= 1, got W={self.W}")
        H = 4 * self.W if self.H is None else self.H
        if H < 2:
            raise ArgumentError(f"block height must be >= 2, got H={H}")
        cut = H // 2 if self.cut is None else self.cut
        if not 1 <= cut < H:
            raise ArgumentError(f"cut must lie in [1, {H}), got {cut}")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "cut", cut)


@dataclass
class BoundaryMPS:
    """Open-boundary MPS; ``site_tensors[i]`` has legs ``(left, physical, right)``.

    The stored tensors describe ``psi / exp(log_norm)``.
    """

    site_tensors: list
    chi_max: int
    cumulative_truncation: float = 0.0
    canonical_center: int | None = None
    log_norm: float = 0.0

    def __post_init__(self):
        if not self.site_tensors:
            raise ArgumentError("an MPS needs at least one site")
        for i, t in enumerate(self.site_tensors):
            if np.ndim(t) != 3:
                raise ArgumentError(f"site {i} has rank {np.ndim(t)}, expected 3")
        for i in range(len(self.site_tensors) - 1):
            a, b = self.site_tensors[i].shape[2], self.site_tensors[i + 1].shape[0]
            if a != b:
                raise ArgumentError(f"bond {i}: {a} != {b}")
        if self.site_tensors[0].shape[0] != 1 or self.site_tensors[-1].shape[2] != 1:
            raise ArgumentError("outer bonds must have dimension 1")
        if self.cumulative_truncation < 0:
            raise ArgumentError("cumulative_truncation must be >= 0")

    def __len__(self) -> int:
        return len(self.site_tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.site_tensors[:-1]]

    def to_dense(self) -> np.ndarray:
        out = np.ones((1, 1))
        for t in self.site_tensors:
            out = np.tensordot(out, t, axes=([-1], [0]))
        return math.exp(self.log_norm) * out.reshape(out.shape[1:-1])

    def canonicalize(self, center: int) -> "BoundaryMPS":
        """Mixed-canonical copy with orthogonality centre ``center``; no truncation."""
        n = len(self)
        if not 0 <= center < n:
            raise ArgumentError(f"centre {center} outside [0, {n})")
        ts = [np.array(t) for t in self.site_tensors]
        for i in range(center):
            a, p, b = ts[i].shape
            q, r = np.linalg.qr(ts[i].reshape(a * p, b))
            ts[i] = q.reshape(a, p, -1)
            ts[i + 1] = np.tensordot(r, ts[i + 1], axes=([1], [0]))
        for i in range(n - 1, center, -1):
            a, p, b = ts[i].shape
            q, r = np.linalg.qr(ts[i].reshape(a, p * b).T)
            ts[i] = q.T.reshape(-1, p, b)
            ts[i - 1] = np.tensordot(ts[i - 1], r.T, axes=([2], [0]))
        nrm = np.linalg.norm(ts[center])
        ts[center] = ts[center] / nrm
        return BoundaryMPS(ts, self.chi_max, self.cumulative_truncation, center, self.log_norm + math.log(nrm))

    def is_canonical(self, tol: float = _ISOMETRY_TOL) -> bool:
        if self.canonical_center is None:
            return False
        for i, t in enumerate(self.site_tensors):
            a, p, b = t.shape
            if i < self.canonical_center:
                m = t.reshape(a * p, b)
                g = m.conj().T @ m
            elif i > self.canonical_center:
                m = t.reshape(a, p * b)
                g = m @ m.conj().T
            else:
                continue
            if not np.allclose(g, np.eye(g.shape[0]), atol=tol, rtol=0):
                return False
        return True

    def schmidt_values(self, cut: int) -> np.ndarray:
        """Singular values across the bond between sites ``cut-1`` and ``cut``."""
        if not 1 <= cut < len(self):
            raise ArgumentError(f"cut must lie in [1, {len(self)}), got {cut}")
        m = self.canonicalize(cut - 1)
        t = m.site_tensors[cut - 1]
        a, p, b = t.shape
        return np.linalg.svd(t.reshape(a * p, b), compute_uv=False)


@dataclass(frozen=True)
class EntropyRecord:
    s2: float
    schmidt_spectrum: np.ndarray
    alpha: float = 2.0

    @property
    def entropy(self) -> float:
        return self.s2


def block_network(spec: BlockSpec, seed: int | None = None) -> LatticeNetwork:
    """The ``H x W`` block with its right-edge legs open."""
    return random_network(spec.ensemble, spec.H, spec.W, Geometry.OPEN, open_right=True, seed=seed)


def network_columns(net: LatticeNetwork) -> list[list[np.ndarray]]:
    return [[net.padded(r, c) for r in range(net.H)] for c in range(net.W)]


def block_dense_state(net: LatticeNetwork) -> np.ndarray:
    """Direct dense contraction of an open-right block into an ``H``-leg tensor."""
    if net.H > 20 or net.leg_dim(0, net.W - 1, "r") ** net.H > 2**22:
        raise SizeError("dense boundary state too large")
    v = np.ones((1,) * net.H)
    for col in network_columns(net):
        v = apply_column(v, col)
    return v


def _compress(ts: list, chi: int, rel_tol: float) -> tuple[list, float, float]:
    """Left QR sweep then right-to-left truncating SVD sweep.

    Returns the right-canonical tensors (centre 0, unit norm), the log of the
    norm that was divided out, and the summed relative discarded weight.
    """
    n = len(ts)
    ts = list(ts)
    for i in range(n - 1):
        a, p, b = ts[i].shape
        q, r = np.linalg.qr(ts[i].reshape(a * p, b))
        ts[i] = q.reshape(a, p, -1)
        ts[i + 1] = np.tensordot(r, ts[i + 1], axes=([1], [0]))
    nrm = float(np.linalg.norm(ts[-1]))
    if nrm == 0.0:
        raise FloatingPointError("boundary state vanished")
    ts[-1] = ts[-1] / nrm
    discarded = 0.0
    for i in range(n - 1, 0, -1):
        split = svd_split(ts[i], [0], chi, rel_tol)
        discarded += split.discarded_weight
        s = split.kept_spectrum
        keep = float(np.sum(s**2))
        # right factor carries the singular values; peel them off to get an isometry
        safe = np.where(s > 0, s, 1.0)
        iso = split.right / safe[:, None, None]
        ts[i] = iso
        ts[i - 1] = np.tensordot(ts[i - 1], split.left * s, axes=([2], [0]))
        if keep > 0:
            ts[i - 1] = ts[i - 1] / math.sqrt(keep)
            nrm *= math.sqrt(keep)
    return ts, math.log(nrm), discarded


def mps_from_columns(columns, chi: int, rel_tol: float = 0.0) -> BoundaryMPS:
    """Absorb padded ``(l, r, u, d)`` columns left to right into a boundary MPS."""
    columns = list(columns)
    first = columns[0]
    ts = [np.transpose(A[0], (1, 0, 2)) for A in first]  # (u, r, d)
    log_norm = 0.0
    trunc = 0.0
    ts, ln, dw = _compress(ts, chi, rel_tol)
    log_norm += ln
    trunc += dw
    for col in columns[1:]:
        new = []
        for B, A in zip(ts, col):
            x = np.tensordot(B, A, axes=([1], [0]))  # (bl, br, r, u, d)
            a, b, p, u, d = x.shape
            new.append(np.transpose(x, (0, 3, 2, 1, 4)).reshape(a * u, p, b * d))
        ts, ln, dw = _compress(new, chi, rel_tol)
        log_norm += ln
        trunc += dw
    return BoundaryMPS(ts, chi, trunc, 0, log_norm)


def _resolve_seed(rng) -> int:
    if rng is None:
        return 0
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**63 - 1))
    return int(rng)


def block_boundary_state(spec: BlockSpec, chi: int, rng=None, rel_tol: float = 0.0) -> BoundaryMPS:
    """Boundary MPS of a freshly drawn block, truncated at bond dimension ``chi``.

    ``rng`` may be a generator (one network seed is drawn from it) or an int
    seed used directly, so the same block can be rebuilt for exact checks.
    """
    if chi < spec.ensemble.D:
        raise ArgumentError(f"chi must be >= D={spec.ensemble.D}, got {chi}")
    net = block_network(spec, _resolve_seed(rng))
    return mps_from_columns(network_columns(net), chi, rel_tol)


def renyi_from_spectrum(p: np.ndarray, alpha: float = 2.0) -> float:
    """Renyi entropy (nats) of a normalised probability vector."""
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    if alpha < 0:
        raise ArgumentError(f"alpha must be >= 0, got {alpha}")
    if alpha == 0:
        return math.log(len(p))
    if alpha == 1:
        return float(max(0.0, -np.sum(p * np.log(p))))
    if math.isinf(alpha):
        return float(-math.log(p.max()))
    return float(max(0.0, math.log(np.sum(p**alpha)) / (1.0 - alpha)))


def _record(weights: np.ndarray, alpha: float) -> EntropyRecord:
    w = np.sort(np.clip(np.asarray(weights, dtype=float), 0.0, None))[::-1]
    total = w.sum()
    if total <= 0:
        raise FloatingPointError("state has zero norm")
    p = w / total
    # drop numerical dust so alpha=0 counts the true rank
    p = np.where(p > 1e-14, p, 0.0)
    p = p / p.sum()
    return EntropyRecord(renyi_from_spectrum(p, alpha), p, float(alpha))


def renyi_entropy(psi: BoundaryMPS, cut: int, alpha: float = 2.0) -> EntropyRecord:
    """Renyi entropy of ``psi`` across the bond before site ``cut``.

    The state need not be normalised; the Schmidt weights are normalised
    before the entropy is taken.
    """
    s = psi.schmidt_values(cut)
    return _record(s**2, alpha)


def dense_cut_entropy(state: np.ndarray, cut: int, alpha: float = 2.0) -> EntropyRecord:
    """Entropy from the dense reduced density matrix of the first ``cut`` legs."""
    state = np.asarray(state)
    if not 1 <= cut < state.ndim:
        raise ArgumentError(f"cut must lie in [1, {state.ndim}), got {cut}")
    m = state.reshape(int(np.prod(state.shape[:cut])), -1)
    rho = m @ m.conj().T
    return _record(np.linalg.eigvalsh(rho), alpha)


# exact route: Gram matrices of the two halves

def _ket_rows(rows) -> np.ndarray:
    """Contract rows into ``M[p, v_0..v_{W-1}]``; ``p`` merges the open right legs."""
    W = len(rows[0])
    M = np.ones((1,) + (1,) * W)
    for row in rows:
        x = M[..., None]
        for c, A in enumerate(row):
            x = np.tensordot(x, A, axes=([1 + c, x.ndim - 1], [2, 0]))
            x = np.moveaxis(x, -1, 1 + c)
        x = np.moveaxis(x, -1, 1)
        M = x.reshape((-1,) + x.shape[2:])
        M = M / np.linalg.norm(M)
    return M


def _gram_rows(G: np.ndarray, rows) -> np.ndarray:
    """Push ``G[bra v.., ket v..]`` through rows, pairing each row's open leg.

    Ket sites go left to right, leaving the open leg dangling; bra sites then
    go right to left starting from that leg, so only one horizontal bond is
    ever open.
    """
    W = G.ndim // 2
    for row in rows:
        x = G[..., None]
        for c, A in enumerate(row):
            x = np.tensordot(x, A, axes=([W + c, 2 * W], [2, 0]))
            x = np.moveaxis(x, -1, W + c)
        for c in reversed(range(W)):
            x = np.tensordot(x, row[c].conj(), axes=([c, 2 * W], [2, 1]))
            x = np.moveaxis(x, -1, c)
        G = x[..., 0]
        G = G / np.linalg.norm(G)
    return G


def _half_gram(rows) -> np.ndarray:
    """``P^dagger P`` over the ``W`` vertical bonds leaving the last row."""
    W = len(rows[0])
    D = max(A.shape[3] for A in rows[-1])
    # stay in ket form while the open dimension is below the bond dimension
    k = 0
    p = 1
    while k < len(rows) and p * rows[k][-1].shape[1] <= D**W:
        p *= rows[k][-1].shape[1]
        k += 1
    k = max(k, 1)
    M = _ket_rows(rows[:k])
    Mm = M.reshape(M.shape[0], -1)
    G = (Mm.conj().T @ Mm).reshape(M.shape[1:] * 2)
    return _gram_rows(G, rows[k:])


def gram_cut_entropy(net: LatticeNetwork, cut: int, alphas=(2.0,)) -> list[EntropyRecord]:
    """Exact entanglement of an open-right block across row boundary ``cut``.

    Writing ``psi = P Q`` through the ``W`` vertical bonds at the cut, the
    reduced state above the cut has the spectrum of ``sqrt(P'P) QQ' sqrt(P'P)``.
    """
    H, W = net.H, net.W
    if not 1 <= cut < H:
        raise ArgumentError(f"cut must lie in [1, {H}), got {cut}")
    bond = int(np.prod([net.leg_dim(cut - 1, c, "d") for c in range(W)]))
    if bond > GRAM_LIMIT:
        raise SizeError(f"cut bond dimension {bond} exceeds {GRAM_LIMIT}")
    top = [[net.padded(r, c) for c in range(W)] for r in range(cut)]
    bottom = [
        [np.transpose(net.padded(r, c), (0, 1, 3, 2)) for c in range(W)] for r in reversed(range(cut, H))
    ]
    gp = _half_gram(top).reshape(bond, bond)
    gq = _half_gram(bottom).reshape(bond, bond).T
    gp = 0.5 * (gp + gp.conj().T)
    gq = 0.5 * (gq + gq.conj().T)
    e, v = np.linalg.eigh(gp)
    root = (v * np.sqrt(np.clip(e, 0.0, None))) @ v.conj().T
    weights = np.linalg.eigvalsh(root @ gq @ root)
    return [_record(weights, a) for a in alphas]


def entropy_trial(
    kind: Kind | str,
    D: int,
    lam: float,
    W: int,
    seed: int,
    H: int | None = None,
    cut: int | None = None,
    chi: int | None = None,
    target: Target | str = Target.ALL_ONES,
    method: str = "auto",
) -> dict:
    """One disorder realisation: ``s2`` at the cut plus truncation diagnostics.

    ``method`` is ``"gram"`` (exact), ``"mps"`` (truncated at ``chi``, with a
    doubled-``chi`` rerun as convergence check) or ``"auto"`` (exact when the
    cut bond fits under :data:`GRAM_LIMIT`).
    """
    ens = EnsembleSpec(kind, D, lam, target, seed)
    spec = BlockSpec(W, H, ens, cut)
    net = block_network(spec, seed)
    row = dict(kind=ens.kind.value, target=ens.target.value, D=D, W=W, H=spec.H, seed=seed)
    row.update(block_entropy(net, spec.cut, chi, method))
    return row


def block_entropy(
    net: LatticeNetwork, cut: int, chi: int | None = None, method: str = "auto", check: bool = True
) -> dict:
    """``s2`` of an open-right block at ``cut`` with the diagnostics of :func:`entropy_trial`.

    With ``check`` off the doubled-``chi`` rerun is skipped and ``s2_chi2`` is NaN.
    """
    bond = int(np.prod([net.leg_dim(cut - 1, c, "d") for c in range(net.W)]))
    Dmin = max(net.leg_dim(r, net.W - 1, "r") for r in range(net.H))
    if method == "auto":
        method = "gram" if bond <= GRAM_LIMIT else "mps"
    if method == "gram":
        s2 = gram_cut_entropy(net, cut)[0].s2
        return dict(chi=bond, s2=s2, trunc_weight=0.0, s2_chi2=s2, method="gram")
    if method != "mps":
        raise ArgumentError(f"unknown method {method!r}")
    chi = min(bond, DEFAULT_CHI_CAP) if chi is None else chi
    if chi < Dmin:
        raise ArgumentError(f"chi must be >= D={Dmin}, got {chi}")
    cols = network_columns(net)
    psi = mps_from_columns(cols, chi)
    s2 = renyi_entropy(psi, cut).s2
    if psi.cumulative_truncation == 0:
        s2b = s2
    elif check:
        s2b = renyi_entropy(mps_from_columns(cols, 2 * chi), cut).s2
    else:
        s2b = math.nan
    return dict(chi=chi, s2=s2, trunc_weight=psi.cumulative_truncation, s2_chi2=s2b, method="mps")


def _trial_seed(seed: int, D: int, lamD: float, W: int, trial: int) -> int:
    ss = np.random.SeedSequence([int(seed), int(D), int(round(lamD * 1e6)), int(W), int(trial)])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def entropy_scan(
    kind: Kind | str,
    Ds,
    lamDs,
    Ws,
    trials: int,
    chi: int | None = None,
    seed: int = 0,
    target: Target | str = Target.ALL_ONES,
    method: str = "auto",
    mapper=map,
) -> tuple[list[dict], list[dict]]:
    """Sample ``s2`` over a ``(D, lambda*D, W)`` grid with ``H = 4W`` and the central cut.

    Returns the per-trial rows and the per-point aggregates. ``mapper`` can be
    swapped for a pool's ``map``; trial seeds depend only on the grid point.
    """
    if trials < 10:
        raise ArgumentError(f"need trials >= 10, got {trials}")
    jobs = []
    for D in Ds:
        for lamD in lamDs:
            for W in Ws:
                for t in range(trials):
                    jobs.append((D, lamD, W, t, _trial_seed(seed, D, lamD, W, t)))
    results = list(mapper(_run_job, [(kind, target, chi, method, j) for j in jobs]))
    rows = []
    for (D, lamD, W, t, s), res in zip(jobs, results):
        res.update(lam=lamD / D, lambdaD=lamD, trial=t)
        rows.append(res)
    return rows, aggregate_scan(rows)


def _run_job(args) -> dict:
    kind, target, chi, method, (D, lamD, W, t, s) = args
    return entropy_trial(kind, D, lamD / D, W, s, chi=chi, target=target, method=method)


def aggregate_scan(rows: list[dict], rel_tol: float = 0.02) -> list[dict]:
    """Mean, std and stderr of ``s2`` per ``(D, lambdaD, W)``; flags chi convergence."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["D"], r["lambdaD"], r["W"]), []).append(r)
    out = []
    for (D, lamD, W), rs in sorted(groups.items()):
        s = np.array([r["s2"] for r in rs])
        s_b = np.array([r.get("s2_chi2", r["s2"]) for r in rs], dtype=float)
        mean = float(s.mean())
        std = float(s.std(ddof=1)) if len(s) > 1 else 0.0
        checked = ~np.isnan(s_b)
        shift = abs(float(s_b[checked].mean() - s[checked].mean())) if checked.any() else 0.0
        out.append(
            dict(
                D=D,
                lambdaD=lamD,
                W=W,
                n=len(s),
                mean_s2=mean,
                std_s2=std,
                stderr_s2=std / math.sqrt(len(s)),
                mean_s2_per_W=mean / W,
                converged=bool(shift <= rel_tol * max(mean, 1e-12) or shift < 1e-9),
            )
        )
    return out


def half_value_crossover(x, y) -> float:
    """First ``x`` where ``y`` falls to half of its value at the smallest ``x``.

    Linear interpolation between grid points; ``nan`` if it never does.
    """
    order = np.argsort(x)
    x = np.asarray(x, dtype=float)[order]
    y = np.asarray(y, dtype=float)[order]
    half = 0.5 * y[0]
    for i in range(1, len(x)):
        if y[i] <= half:
            y0, y1 = y[i - 1], y[i]
            if y0 == y1:
                return float(x[i])
            return float(x[i - 1] + (half - y0) * (x[i] - x[i - 1]) / (y1 - y0))
    return math.nan
