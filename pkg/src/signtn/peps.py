"""Double-layer PEPS: norm networks, entanglement, positive-sum rewriting, gauges.

A PEPS tensor ``c[i, l, r, u, d]`` and its conjugate, summed over the
physical index ``i``, give the double-layer tensor whose legs are composite
``(ket, bra)`` pairs with index ``ket * D + bra``. Read as a map from the ket
multi-index to the bra multi-index it is positive semidefinite, which is what
the positive-sum rewriting builds on.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .boundary import block_entropy
from .contraction import Geometry, LatticeNetwork, site_legs, transfer_value
from .ensembles import LEG_NAMES, PepsSpec, make_peps_tensor, make_rng
from .errors import ArgumentError
from .sign_mc import McEstimate

__all__ = [
    "Grouping",
    "GaugeMode",
    "DoubleLayerTensor",
    "SeparableDecomposition",
    "SeparabilityFailure",
    "GaugePair",
    "double_layer",
    "peps_site_tensor",
    "peps_network",
    "site_grouping",
    "grouping_dims",
    "rho_from_grouping",
    "padding_cost",
    "separable_decompose",
    "decompose_network",
    "plaquette_values",
    "positive_sum_estimate",
    "peps_entropy_trial",
    "peps_entropy_experiment",
    "fit_decay_exponent",
    "positivity_ratio",
    "antihermitian_fraction",
    "gauge_objective",
    "apply_gauge",
    "gauge_boundary",
    "gauge_optimize",
]


class Grouping(str, enum.Enum):
    """Which pairs of legs form the two halves of a site operator."""

    LD_UR = "ld|ur"
    LU_DR = "lu|dr"

    @property
    def halves(self) -> tuple[str, str]:
        return ("ld", "ur") if self is Grouping.LD_UR else ("lu", "dr")


class GaugeMode(str, enum.Enum):
    POSITIVITY = "positivity"
    HERMITICITY = "hermiticity"
    BOTH = "both"


@dataclass
class DoubleLayerTensor:
    """Composite-leg tensor ``A[l, r, u, d]`` with leg ``x`` of dimension ``ket_dims[x]**2``."""

    A: np.ndarray
    ket_dims: tuple
    source: PepsSpec | None = None

    def __post_init__(self):
        self.ket_dims = tuple(int(x) for x in self.ket_dims)
        if np.ndim(self.A) != 4 or self.A.shape != tuple(x * x for x in self.ket_dims):
            raise ArgumentError(f"composite shape {np.shape(self.A)} does not match ket dims {self.ket_dims}")

    @property
    def split(self) -> np.ndarray:
        """``A`` with legs ``(lk, lb, rk, rb, uk, ub, dk, db)``."""
        return self.A.reshape([x for D in self.ket_dims for x in (D, D)])

    def operator(self) -> np.ndarray:
        """Ket-to-bra matrix ``M[(l r u d)_ket, (l r u d)_bra]``."""
        n = int(np.prod(self.ket_dims))
        return np.transpose(self.split, (0, 2, 4, 6, 1, 3, 5, 7)).reshape(n, n)

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.operator())))

    def min_eigenvalue(self) -> float:
        m = self.operator()
        return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])


def double_layer(c: np.ndarray, source: PepsSpec | None = None) -> DoubleLayerTensor:
    """Contract ``c[i, l, r, u, d]`` with its conjugate over ``i``."""
    c = np.asarray(c)
    if c.ndim != 5:
        raise ArgumentError(f"PEPS tensor must have 5 legs (d, l, r, u, d), got rank {c.ndim}")
    dims = c.shape[1:]
    a = np.tensordot(c, c.conj(), axes=([0], [0]))  # (l r u d)_ket (l r u d)_bra
    a = np.transpose(a, (0, 4, 1, 5, 2, 6, 3, 7)).reshape([x * x for x in dims])
    return DoubleLayerTensor(a, dims, source)


def peps_site_tensor(spec: PepsSpec, r: int, c: int, H: int, W: int, seed: int, open_right: bool = False):
    """PEPS tensor at ``(r, c)`` padded to five legs; trimmed legs have dimension 1."""
    legs = site_legs(r, c, H, W, Geometry.OPEN, open_right)
    t = make_peps_tensor(spec, make_rng(seed, r, c), legs)
    shape = [spec.d] + [spec.D if x in legs else 1 for x in LEG_NAMES]
    return t.reshape(shape)


def peps_network(
    spec: PepsSpec, H: int, W: int, seed: int | None = None, open_right: bool = False
) -> tuple[LatticeNetwork, list]:
    """Double-layer norm network and its per-site :class:`DoubleLayerTensor` grid."""
    seed = spec.seed if seed is None else seed
    tensors, legs, layers = [], [], []
    for r in range(H):
        trow, lrow, arow = [], [], []
        for c in range(W):
            lg = site_legs(r, c, H, W, Geometry.OPEN, open_right)
            a = double_layer(peps_site_tensor(spec, r, c, H, W, seed, open_right), spec)
            trow.append(a.A.reshape([a.A.shape[LEG_NAMES.index(x)] for x in lg]))
            lrow.append(lg)
            arow.append(a)
        tensors.append(trow)
        legs.append(lrow)
        layers.append(arow)
    open_legs = [(r, W - 1, "r") for r in range(H)] if open_right else []
    return LatticeNetwork(H, W, tensors, legs, Geometry.OPEN, open_legs), layers


# bipartite site operators

def site_grouping(r: int, c: int) -> Grouping:
    """Checkerboard pattern; the top-left site is ``LD_UR``."""
    return Grouping.LD_UR if (r + c) % 2 == 0 else Grouping.LU_DR


def grouping_dims(a: DoubleLayerTensor, grouping: Grouping | str) -> tuple[int, int]:
    ga, gb = Grouping(grouping).halves
    dims = dict(zip(LEG_NAMES, a.ket_dims))
    return dims[ga[0]] * dims[ga[1]], dims[gb[0]] * dims[gb[1]]


def rho_from_grouping(a: DoubleLayerTensor, grouping: Grouping | str) -> np.ndarray:
    """Unit-trace bipartite operator ``rho[(kA kB), (bA bB)]`` for the chosen halves.

    Within each half the legs keep the order given by the grouping name, so
    ``LD_UR`` has ``A = (l, d)`` and ``B = (u, r)``.
    """
    ga, gb = Grouping(grouping).halves
    order = [LEG_NAMES.index(x) for x in ga + gb]
    perm = [2 * i for i in order] + [2 * i + 1 for i in order]
    n = int(np.prod(a.ket_dims))
    rho = np.transpose(a.split, perm).reshape(n, n)
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.real(np.trace(rho))


@dataclass
class SeparableDecomposition:
    """``rho = sum_i p_i sigma_A[i] (x) sigma_B[i]`` with unit-trace PSD factors."""

    p: np.ndarray
    sigma_A: np.ndarray
    sigma_B: np.ndarray
    dims: tuple
    grouping: Grouping | None = None
    method: str = "identity_padding"
    recon_error: float = 0.0
    padding_cost: float = math.nan
    success: bool = field(default=True, init=False)

    def __post_init__(self):
        if np.any(self.p <= 0):
            raise ArgumentError("weights must be strictly positive")

    def __len__(self) -> int:
        return len(self.p)

    def reconstruct(self) -> np.ndarray:
        nA, nB = self.dims
        out = np.einsum("k,kab,kcd->acbd", self.p, self.sigma_A, self.sigma_B)
        return out.reshape(nA * nB, nA * nB)

    def min_factor_eigenvalue(self) -> float:
        ea = np.linalg.eigvalsh(self.sigma_A).min()
        eb = np.linalg.eigvalsh(self.sigma_B).min()
        return float(min(ea, eb))


@dataclass
class SeparabilityFailure:
    """Returned when neither construction certifies separability.

    ``padding_cost`` is the identity mass the padding scheme would need (it
    fails above 1); ``residual`` is the Frobenius distance the product-state
    fit could not close.
    """

    dims: tuple
    padding_cost: float
    residual: float
    reason: str
    grouping: Grouping | None = None
    success: bool = field(default=False, init=False)


def _hermitian_part(m):
    return 0.5 * (m + m.conj().T)


def _operator_schmidt(R: np.ndarray, nA: int, nB: int):
    """``R = sum_k s_k X_k (x) Y_k`` with Frobenius-orthonormal Hermitian ``X_k, Y_k``."""
    basisA = _hermitian_basis(nA)
    basisB = _hermitian_basis(nB)
    R4 = R.reshape(nA, nB, nA, nB)
    C = np.real(np.einsum("abcd,xca,ydb->xy", R4, basisA, basisB))
    U, s, Vt = np.linalg.svd(C, full_matrices=False)
    X = np.einsum("xk,xab->kab", U, basisA)
    Y = np.einsum("yk,yab->kab", Vt.T, basisB)
    return s, X, Y


def _hermitian_basis(n: int) -> np.ndarray:
    """Frobenius-orthonormal Hermitian basis of traceless ``n x n`` matrices (generalised Gell-Mann)."""
    out = []
    for j in range(n):
        for k in range(j + 1, n):
            m = np.zeros((n, n), complex)
            m[j, k] = m[k, j] = 1 / math.sqrt(2)
            out.append(m)
            m = np.zeros((n, n), complex)
            m[j, k] = -1j / math.sqrt(2)
            m[k, j] = 1j / math.sqrt(2)
            out.append(m)
    for l in range(1, n):
        diag = np.zeros(n)
        diag[:l] = 1.0
        diag[l] = -l
        out.append(np.diag(diag / math.sqrt(l * (l + 1))).astype(complex))
    return np.array(out).reshape(-1, n, n)


def _opnorm(m) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh(m)))) if m.size else 0.0


def _padding_terms(rho: np.ndarray, nA: int, nB: int):
    """Identity-padding expansion: returns (cost, weights, sigma_A, sigma_B).

    Writing ``N rho = I + a (x) I + I (x) b + sum_k s_k X_k (x) Y_k``, each
    traceless piece is paired with part of the identity so that every factor
    is ``I +- X/||X||``. The pieces consume ``cost`` units of identity; the
    construction is valid when ``cost <= 1``.
    """
    N = nA * nB
    R4 = rho.reshape(nA, nB, nA, nB)
    IA, IB = np.eye(nA), np.eye(nB)
    a = nA * np.einsum("ibjb->ij", R4) - IA
    b = nB * np.einsum("aiaj->ij", R4) - IB
    rest = N * rho - np.kron(IA, IB) - np.kron(a, IB) - np.kron(IA, b)
    s, X, Y = _operator_schmidt(rest, nA, nB) if nA > 1 and nB > 1 else (np.zeros(0), None, None)
    terms = []  # (weight in identity units, factor A, factor B)
    cost = 0.0
    na = _opnorm(a)
    if na > 1e-15:
        terms.append((na, IA + a / na, IB))
        cost += na
    nb = _opnorm(b)
    if nb > 1e-15:
        terms.append((nb, IA, IB + b / nb))
        cost += nb
    for k in range(len(s)):
        if s[k] <= 1e-15:
            continue
        xk, yk = _hermitian_part(X[k]), _hermitian_part(Y[k])
        nx, ny = _opnorm(xk), _opnorm(yk)
        w = s[k] * nx * ny
        xp, yp = xk / nx, yk / ny
        # X'(x)Y' = [(I+X')(x)(I+Y') + (I-X')(x)(I-Y')]/2 - I(x)I
        terms.append((w / 2, IA + xp, IB + yp))
        terms.append((w / 2, IA - xp, IB - yp))
        cost += w
    if cost < 1:
        terms.append((1 - cost, IA, IB))
    weights = np.array([t[0] for t in terms])
    sa = np.array([t[1] for t in terms])
    sb = np.array([t[2] for t in terms])
    # normalise factors to unit trace and move the traces into the weights
    ta = np.real(np.einsum("kii->k", sa))
    tb = np.real(np.einsum("kii->k", sb))
    p = weights * ta * tb / N
    return cost, p, sa / ta[:, None, None], sb / tb[:, None, None]


def padding_cost(rho: np.ndarray, dims: tuple | None = None) -> float:
    """Identity mass the padding construction needs; separability is certified when ``<= 1``."""
    nA, nB = _dims(rho, dims)
    return _padding_terms(np.asarray(rho), nA, nB)[0]


def _dims(rho, dims):
    n = np.shape(rho)[0]
    if dims is None:
        r = int(round(math.sqrt(n)))
        if r * r != n:
            raise ArgumentError("pass dims for a non-square bipartition")
        return r, r
    if dims[0] * dims[1] != n:
        raise ArgumentError(f"dims {dims} do not match operator size {n}")
    return int(dims[0]), int(dims[1])


# product-state column generation

class _RealHermitian:
    """Isometric real coordinates for ``N x N`` Hermitian matrices."""

    def __init__(self, N: int):
        self.N = N
        self.iu = np.triu_indices(N, 1)

    def vec(self, m):
        d = np.real(np.diag(m))
        off = m[self.iu]
        return np.concatenate([d, math.sqrt(2) * off.real, math.sqrt(2) * off.imag])

    def mat(self, v):
        N = self.N
        k = len(self.iu[0])
        m = np.zeros((N, N), complex)
        m[self.iu] = (v[N : N + k] + 1j * v[N + k :]) / math.sqrt(2)
        m = m + m.conj().T
        m[np.diag_indices(N)] = v[:N]
        return m


def _random_unit(n, rng):
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def _best_product(R4, nA, nB, rng, iters: int = 30):
    """Approximately maximise ``<a b|R|a b>`` by alternating eigenvector updates."""
    b = _random_unit(nB, rng)
    a = _random_unit(nA, rng)
    val = -np.inf
    for _ in range(iters):
        Ra = np.einsum("ijkl,j,l->ik", R4, b.conj(), b)
        w, v = np.linalg.eigh(_hermitian_part(Ra))
        a = v[:, -1]
        Rb = np.einsum("ijkl,i,k->jl", R4, a.conj(), a)
        w, v = np.linalg.eigh(_hermitian_part(Rb))
        b = v[:, -1]
        if w[-1] - val < 1e-14:
            break
        val = w[-1]
    return w[-1], a, b


def _column_generation(rho, nA, nB, rng, tol, max_rounds, per_round):
    N = nA * nB
    herm = _RealHermitian(N)
    target = herm.vec(rho)
    vecs = []
    for _ in range(max(4 * N, 50)):
        vecs.append((_random_unit(nA, rng), _random_unit(nB, rng)))

    def column(ab):
        v = np.kron(ab[0], ab[1])
        return herm.vec(np.outer(v, v.conj()))

    cols = [column(ab) for ab in vecs]
    res = math.inf
    w = None
    for _ in range(max_rounds):
        A = np.array(cols).T
        w, _ = nnls(A, target, maxiter=50 * A.shape[1])
        # the solver's own residual can lag the true one near convergence
        res = float(np.linalg.norm(A @ w - target))
        if res < tol:
            break
        keep = w > 0
        vecs = [ab for ab, k in zip(vecs, keep) if k]
        cols = [c for c, k in zip(cols, keep) if k]
        w = w[keep]
        R4 = herm.mat(target - A[:, keep] @ w).reshape(nA, nB, nA, nB)
        for _ in range(per_round):
            _, a, b = _best_product(R4, nA, nB, rng)
            vecs.append((a, b))
            cols.append(column((a, b)))
    keep = w > 0
    vecs = [ab for ab, k in zip(vecs, keep) if k]
    return res, w[keep], vecs


def separable_decompose(
    rho: np.ndarray,
    dims: tuple | None = None,
    grouping: Grouping | None = None,
    rng: np.random.Generator | None = None,
    fallback: bool = True,
    tol: float = 1e-12,
    max_rounds: int = 400,
    per_round: int = 10,
):
    """Write a unit-trace PSD bipartite operator as a positive mixture of product PSD operators.

    Tries identity padding first. If the padding needs more identity than
    ``rho`` has, and ``fallback`` is set, fits ``rho`` with nonnegative
    weights on product pure states found by column generation. Returns a
    :class:`SeparableDecomposition` or a :class:`SeparabilityFailure`.
    """
    rho = _hermitian_part(np.asarray(rho, dtype=complex))
    nA, nB = _dims(rho, dims)
    tr = float(np.real(np.trace(rho)))
    if abs(tr - 1) > 1e-8:
        raise ArgumentError(f"rho must have unit trace, got {tr}")
    if nA == 1 or nB == 1:
        sa = rho.reshape(nA, nB, nA, nB)
        sA = np.einsum("ibjb->ij", sa)
        sB = np.einsum("aiaj->ij", sa)
        # one side is a scalar, so rho already is a product
        return SeparableDecomposition(np.ones(1), sA[None], sB[None], (nA, nB), grouping, "trivial", 0.0, 0.0)
    cost, p, sa, sb = _padding_terms(rho, nA, nB)
    if cost <= 1 + 1e-12:
        dec = SeparableDecomposition(p, sa, sb, (nA, nB), grouping, "identity_padding", padding_cost=cost)
        dec.recon_error = float(np.linalg.norm(dec.reconstruct() - rho))
        return dec
    if not fallback:
        return SeparabilityFailure((nA, nB), cost, math.nan, "identity padding needs more identity than rho has", grouping)
    rng = np.random.default_rng(0) if rng is None else rng
    res, w, vecs = _column_generation(rho, nA, nB, rng, tol, max_rounds, per_round)
    if res >= tol or len(w) == 0:
        return SeparabilityFailure((nA, nB), cost, float(res), "product-state fit did not converge", grouping)
    sA = np.array([np.outer(a, a.conj()) for a, _ in vecs])
    sB = np.array([np.outer(b, b.conj()) for _, b in vecs])
    dec = SeparableDecomposition(w, sA, sB, (nA, nB), grouping, "product_states", padding_cost=cost)
    dec.recon_error = float(np.linalg.norm(dec.reconstruct() - rho))
    return dec


def decompose_network(layers, rng: np.random.Generator | None = None, **kw) -> list:
    """Decompose every site of a double-layer grid in its checkerboard grouping."""
    rng = np.random.default_rng(0) if rng is None else rng
    out = []
    for r, row in enumerate(layers):
        drow = []
        for c, a in enumerate(row):
            g = site_grouping(r, c)
            drow.append(separable_decompose(rho_from_grouping(a, g), grouping_dims(a, g), g, rng, **kw))
        out.append(drow)
    return out


# positive-sum estimation

def _site_factors(dec: SeparableDecomposition, a: DoubleLayerTensor, grouping: Grouping):
    """Per-term factors shaped ``(K, kx, ky, bx, by)`` for the two halves."""
    ga, gb = grouping.halves
    dims = dict(zip(LEG_NAMES, a.ket_dims))
    K = len(dec)
    fa = dec.sigma_A.reshape(K, dims[ga[0]], dims[ga[1]], dims[ga[0]], dims[ga[1]])
    fb = dec.sigma_B.reshape(K, dims[gb[0]], dims[gb[1]], dims[gb[0]], dims[gb[1]])
    return {ga: fa, gb: fb}


def _check_even(H: int, W: int) -> None:
    if H % 2 or W % 2:
        raise ArgumentError(f"positive-sum rewriting needs an even x even lattice, got {H} x {W}")


def plaquette_values(layers, decomps, idx: np.ndarray) -> np.ndarray:
    """Face values for sampled term indices ``idx[k, r, c]``; shape ``(K, n_faces)``.

    Every value is the overlap ``tr(P Q^T)`` of two PSD operators and hence
    nonnegative.
    """
    H, W = len(layers), len(layers[0])
    _check_even(H, W)
    K = idx.shape[0]
    factors = {}
    for r in range(H):
        for c in range(W):
            f = _site_factors(decomps[r][c], layers[r][c], site_grouping(r, c))
            factors[r, c] = {k: v[idx[:, r, c]] for k, v in f.items()}
    ones = np.ones((K, 1, 1, 1, 1))

    def corner(r, c, pair):
        if 0 <= r < H and 0 <= c < W:
            return factors[r, c][pair]
        return ones

    vals = []
    for fr in range(-1, H):
        for fc in range(-1, W):
            if (fr + fc) % 2 == 0:
                continue
            tl = corner(fr, fc, "dr")
            tr = corner(fr, fc + 1, "ld")
            bl = corner(fr + 1, fc, "ur")
            br = corner(fr + 1, fc + 1, "lu")
            # bonds: a = tl.r-tr.l, b = tl.d-bl.u, c = tr.d-br.u, e = bl.r-br.l (upper case: bra)
            v = np.einsum("zbaBA,zacAC,zbeBE,zecEC->z", tl, tr, bl, br, optimize=True)
            vals.append(v)
    return np.array(vals).T


def positive_sum_estimate(
    layers, decomps, K: int, rng: np.random.Generator, return_samples: bool = False
):
    """Unbiased, sign-free Monte Carlo estimate of the norm network.

    Each site's term is drawn with probability ``p_i``; a sample is worth the
    product of its face values times the product of site traces.
    """
    H, W = len(layers), len(layers[0])
    _check_even(H, W)
    if K < 2:
        raise ArgumentError(f"need at least two samples, got K={K}")
    for row in decomps:
        for d in row:
            if not getattr(d, "success", False):
                raise ArgumentError("every site needs a successful decomposition")
    idx = np.empty((K, H, W), dtype=np.int64)
    log_scale = 0.0
    for r in range(H):
        for c in range(W):
            p = decomps[r][c].p
            idx[:, r, c] = rng.choice(len(p), size=K, p=p / p.sum())
            log_scale += math.log(layers[r][c].trace * p.sum())
    faces = plaquette_values(layers, decomps, idx)
    faces = np.real(faces)
    terms = math.exp(log_scale) * np.prod(faces, axis=1)
    est = McEstimate(float(terms.mean()), float(terms.std(ddof=1) / math.sqrt(K)), K)
    if return_samples:
        return est, faces
    return est


# entanglement of the double-layer boundary state

def peps_entropy_trial(
    D: int, d: int, W: int, seed: int, H: int | None = None, chi: int | None = None, check: bool = True
) -> dict:
    """Boundary ``s2`` of one random ``W x 4W`` double-layer block at the central cut."""
    H = 4 * W if H is None else H
    net, _ = peps_network(PepsSpec(D, d, seed), H, W, seed, open_right=True)
    row = dict(D=D, d=d, W=W, H=H, seed=seed)
    row.update(block_entropy(net, H // 2, chi, check=check))
    return row


def fit_decay_exponent(ds, s2s) -> float:
    """``alpha`` in ``s2 ~ d**(-alpha)`` by a log-log least-squares fit."""
    ds = np.asarray(ds, dtype=float)
    s2s = np.asarray(s2s, dtype=float)
    return float(-np.polyfit(np.log(ds), np.log(s2s), 1)[0])


def peps_entropy_experiment(Ds, ds, Ws, trials: int, seed: int = 0, chi=None, mapper=map):
    """Mean boundary ``s2`` per ``(D, d, W)``, slopes in ``W`` and decay exponents in ``d``.

    ``Ws`` and ``chi`` may be dicts keyed by ``D``. Truncated points run the
    doubled-``chi`` check on their first trial only. The exponent for each
    ``D`` is fitted to the ``W``-averaged means.
    """
    jobs = []
    for D in Ds:
        for d in ds:
            for W in Ws[D] if isinstance(Ws, dict) else Ws:
                for t in range(trials):
                    s = int(np.random.SeedSequence([seed, D, d, W, t]).generate_state(1, np.uint64)[0] >> np.uint64(1))
                    jobs.append((D, d, W, t, s))
    results = list(mapper(_peps_job, [(j, chi[j[0]] if isinstance(chi, dict) else chi) for j in jobs]))
    rows = []
    for (D, d, W, t, s), res in zip(jobs, results):
        res["trial"] = t
        rows.append(res)
    means: dict = {}
    for r in rows:
        means.setdefault((r["D"], r["d"], r["W"]), []).append(r["s2"])
    table = [
        dict(D=D, d=d, W=W, mean_s2=float(np.mean(v)), stderr_s2=float(np.std(v, ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0)
        for (D, d, W), v in sorted(means.items())
    ]
    slopes, alphas = {}, {}
    for D in Ds:
        for d in ds:
            pts = [(t["W"], t["mean_s2"]) for t in table if t["D"] == D and t["d"] == d]
            if len(pts) >= 2:
                slopes[D, d] = float(np.polyfit(*zip(*pts), 1)[0])
        per_d = {}
        for t in table:
            if t["D"] == D:
                per_d.setdefault(t["d"], []).append(t["mean_s2"])
        if len(per_d) >= 2:
            dd = sorted(per_d)
            alphas[D] = fit_decay_exponent(dd, [np.mean(per_d[x]) for x in dd])
    return rows, table, slopes, alphas


def _peps_job(args):
    (D, d, W, t, s), chi = args
    return peps_entropy_trial(D, d, W, s, chi=chi, check=t == 0)


# gauge optimisation

@dataclass
class GaugePair:
    X: np.ndarray
    Y: np.ndarray
    objective_trace: list = field(default_factory=list)
    cond_trace: list = field(default_factory=list)

    @property
    def cond_X(self) -> float:
        return float(np.linalg.cond(self.X))

    @property
    def cond_Y(self) -> float:
        return float(np.linalg.cond(self.Y))


def positivity_ratio(A: np.ndarray) -> float:
    """``|sum A| / sum |A|``; 1 exactly when all entries share one phase."""
    s = np.abs(A).sum()
    return float(abs(A.sum()) / s) if s > 0 else 0.0


def _row_transfer(A: np.ndarray) -> np.ndarray:
    return np.einsum("lruu->lr", A)


def antihermitian_fraction(A: np.ndarray) -> float:
    """Anti-Hermitian share of the horizontal transfer matrix ``sum_u A[l, r, u, u]``."""
    T = _row_transfer(A)
    n = np.linalg.norm(T)
    return float(np.linalg.norm(T - T.conj().T) / (2 * n)) if n > 0 else 0.0


def gauge_objective(A: np.ndarray, mode: GaugeMode | str, penalty: float = 0.5) -> float:
    mode = GaugeMode(mode)
    if mode is GaugeMode.POSITIVITY:
        return positivity_ratio(A)
    if mode is GaugeMode.HERMITICITY:
        return 1.0 - antihermitian_fraction(A)
    return positivity_ratio(A) - penalty * antihermitian_fraction(A)


def apply_gauge(A: np.ndarray, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """``A'[l, r, u, d] = X^-1[l, l'] Y^-1[u, u'] A[l', r', u', d'] X[r', r] Y[d', d]``.

    Neighbouring ``X`` and ``X^-1`` cancel on every internal bond, so any
    network of gauged tensors (with :func:`gauge_boundary` vectors) keeps its value.
    """
    Xi = np.linalg.inv(X)
    Yi = np.linalg.inv(Y)
    return np.einsum("al,bu,lrud,rc,de->acbe", Xi, Yi, A, X, Y, optimize=True)


def gauge_boundary(X: np.ndarray, Y: np.ndarray, boundary: dict | None = None, dims=None) -> dict:
    """Boundary vectors that compensate :func:`apply_gauge` on trimmed legs."""
    boundary = dict(boundary or {})
    Dh, Dv = X.shape[0], Y.shape[0]
    bl = boundary.get("l", np.ones(Dh))
    br = boundary.get("r", np.ones(Dh))
    bu = boundary.get("u", np.ones(Dv))
    bd = boundary.get("d", np.ones(Dv))
    return dict(l=X.T @ bl, r=np.linalg.solve(X, br), u=Y.T @ bu, d=np.linalg.solve(Y, bd))


def _composite(x: np.ndarray) -> np.ndarray:
    return np.kron(x, x.conj())


def gauge_optimize(
    a,
    mode: GaugeMode | str = GaugeMode.POSITIVITY,
    iters: int = 200,
    rng: np.random.Generator | None = None,
    step: float = 0.2,
    max_cond: float = 1e6,
    penalty: float = 0.5,
):
    """Randomised accept-if-improved search over bond gauges ``X`` and ``Y``.

    For a :class:`DoubleLayerTensor` the gauges are restricted to ``x (x) conj(x)``
    on composite legs, which keeps the tensor PSD. Returns the
    :class:`GaugePair` (with composite ``X``, ``Y``) and the gauged tensor.
    """
    if iters < 1:
        raise ArgumentError(f"iters must be >= 1, got {iters}")
    rng = np.random.default_rng(0) if rng is None else rng
    mode = GaugeMode(mode)
    layered = isinstance(a, DoubleLayerTensor)
    A = a.A if layered else np.asarray(a)
    if layered:
        Dh, Dv = a.ket_dims[0], a.ket_dims[2]
        if a.ket_dims[1] != Dh or a.ket_dims[3] != Dv:
            raise ArgumentError("opposite legs of a uniform tensor must match")
        lift = _composite
    else:
        Dh, Dv = A.shape[0], A.shape[2]
        if A.shape[1] != Dh or A.shape[3] != Dv:
            raise ArgumentError("opposite legs of a uniform tensor must match")
        lift = lambda m: m  # noqa: E731
    cplx = np.iscomplexobj(A) or layered
    x, y = np.eye(Dh, dtype=complex if cplx else float), np.eye(Dv, dtype=complex if cplx else float)

    def evaluate(xx, yy):
        return gauge_objective(apply_gauge(A, lift(xx), lift(yy)), mode, penalty)

    best = evaluate(x, y)
    pair = GaugePair(lift(x), lift(y), [best], [(1.0, 1.0)])
    for _ in range(iters):
        for which in ("x", "y"):
            base = x if which == "x" else y
            n = base.shape[0]
            g = rng.standard_normal((n, n))
            if cplx:
                g = g + 1j * rng.standard_normal((n, n))
            prop = base @ (np.eye(n) + step * g / math.sqrt(n))
            if np.linalg.cond(prop) > max_cond:
                continue
            prop = prop / abs(np.linalg.det(prop)) ** (1.0 / n)
            val = evaluate(prop, y) if which == "x" else evaluate(x, prop)
            if val > best:
                best = val
                if which == "x":
                    x = prop
                else:
                    y = prop
        pair.objective_trace.append(best)
        pair.cond_trace.append((float(np.linalg.cond(x)), float(np.linalg.cond(y))))
    pair.X, pair.Y = lift(x), lift(y)
    out = apply_gauge(A, pair.X, pair.Y)
    if layered:
        out = DoubleLayerTensor(out, a.ket_dims, a.source)
    return pair, out
