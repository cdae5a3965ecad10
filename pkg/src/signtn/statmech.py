"""Disorder-averaged spin models and their twisted-boundary free energies.

Averaging four copies of a random network turns each site into a spin whose
states label how the four copies are paired. A model is fixed by on-site
weights ``V`` and a symmetric link weight matrix; the Renyi-2 entropy of the
boundary state is predicted from the free-energy cost of twisting the
right-edge boundary condition halfway down the strip.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, SizeError

__all__ = [
    "StatmechModel",
    "TwistedRatio",
    "ORTHOGONAL_LABELS",
    "UNITARY_LABELS",
    "ORTHOGONAL_KTILDE",
    "UNITARY_KTILDE",
    "parse_pairing",
    "pairing_components",
    "ktilde_from_pairings",
    "build_orthogonal_model",
    "build_unitary_model",
    "build_rank1_link_model",
    "rank1_vertex_weights",
    "rank1_ising_tensor",
    "build_s4_model",
    "cycle_count",
    "partition_function",
    "predicted_entropy",
    "phase_scan",
    "line_tension",
    "MODEL_BUILDERS",
    "TRANSFER_GUARD",
]

TRANSFER_GUARD = 200_000

ORTHOGONAL_LABELS = (
    "()",
    "(12)", "(34)", "(13)", "(24)", "(14)", "(23)",
    "(12)(34)", "(13)(24)", "(14)(23)",
)  # fmt: skip

UNITARY_LABELS = ("()", "(12)", "(34)", "(14)", "(23)", "(12)(34)", "(14)(23)")

# link exponents, transcribed as printed for the two pairing bases above
ORTHOGONAL_KTILDE = np.array(
    [
        [0, 1, 1, 1, 1, 1, 1, 2, 2, 2],
        [1, 0, 2, 2, 2, 2, 2, 1, 3, 3],
        [1, 2, 0, 2, 2, 2, 2, 1, 3, 3],
        [1, 2, 2, 0, 2, 2, 2, 3, 1, 3],
        [1, 2, 2, 2, 0, 2, 2, 3, 1, 3],
        [1, 2, 2, 2, 2, 0, 2, 3, 3, 1],
        [1, 2, 2, 2, 2, 2, 0, 3, 3, 1],
        [2, 1, 1, 3, 3, 3, 3, 0, 2, 2],
        [2, 3, 3, 1, 1, 3, 3, 2, 0, 2],
        [2, 3, 3, 3, 3, 1, 1, 2, 2, 0],
    ]
)

UNITARY_KTILDE = np.array(
    [
        [0, 1, 1, 1, 1, 2, 2],
        [1, 0, 2, 2, 2, 1, 3],
        [1, 2, 0, 2, 2, 1, 3],
        [1, 2, 2, 0, 2, 3, 1],
        [1, 2, 2, 2, 0, 3, 1],
        [2, 1, 1, 3, 3, 0, 2],
        [2, 3, 3, 1, 1, 2, 0],
    ]
)


@dataclass
class StatmechModel:
    """Spin model with ``q`` states per site.

    ``boundary`` maps a boundary-condition name to the length-``q`` weight a
    right-edge site picks up from its fixed neighbour in that condition.
    """

    name: str
    q: int
    V: np.ndarray
    Wlink: np.ndarray
    state_labels: tuple
    boundary: dict = field(default_factory=dict)
    boundary_states: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    V_by_links: dict = field(default_factory=dict)

    def __post_init__(self):
        self.V = np.asarray(self.V, dtype=float)
        self.Wlink = np.asarray(self.Wlink, dtype=float)
        if self.V.shape != (self.q,) or self.Wlink.shape != (self.q, self.q):
            raise ArgumentError(f"{self.name}: V and Wlink must have sizes q={self.q} and q x q")
        if not np.allclose(self.Wlink, self.Wlink.T, rtol=1e-12, atol=0):
            raise ArgumentError(f"{self.name}: link weights are not symmetric")
        if len(set(self.state_labels)) != self.q:
            raise ArgumentError(f"{self.name}: state labels must be unique")
        for k, b in self.boundary.items():
            self.boundary[k] = np.asarray(b, dtype=float)
            if self.boundary[k].shape != (self.q,):
                raise ArgumentError(f"{self.name}: boundary {k!r} has the wrong length")

    def onsite(self, links: int | None = None) -> np.ndarray:
        """On-site weights for a site with ``links`` bonds (bulk ``V`` if unknown)."""
        if links is None or links not in self.V_by_links:
            return self.V
        return self.V_by_links[links]

    def index(self, label: str) -> int:
        return self.state_labels.index(label)

    def boundary_vector(self, bc) -> np.ndarray:
        """Coupling vector for a named condition, a state label or ``None`` (free)."""
        if bc is None:
            return np.ones(self.q)
        if isinstance(bc, str) and bc in self.boundary:
            return self.boundary[bc]
        if isinstance(bc, str) and bc in self.state_labels:
            return self.Wlink[:, self.index(bc)]
        if isinstance(bc, (int, np.integer)):
            return self.Wlink[:, int(bc)]
        raise ArgumentError(f"{self.name}: unknown boundary condition {bc!r}")


@dataclass(frozen=True)
class TwistedRatio:
    W: int
    H: int
    log_Z_twisted: float
    log_Z_uniform: float

    @property
    def predicted_s2(self) -> float:
        return -(self.log_Z_twisted - self.log_Z_uniform)


# pairing combinatorics

def parse_pairing(label: str) -> list[tuple[int, ...]]:
    """``"(12)(34)"`` -> ``[(1, 2), (3, 4)]``; ``"()"`` -> ``[]``."""
    parts = label.replace(")", " ").replace("(", " ").split()
    return [tuple(int(ch) for ch in p) for p in parts]


def pairing_components(*labels: str, n: int = 4) -> int:
    """Connected components of ``n`` copies joined by every pair in ``labels``."""
    parent = list(range(n + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for lab in labels:
        for cyc in parse_pairing(lab):
            for a, b in zip(cyc, cyc[1:]):
                parent[find(a)] = find(b)
    return len({find(a) for a in range(1, n + 1)})


def ktilde_from_pairings(labels) -> np.ndarray:
    """Link exponent from loop counting: ``D**(-k/2) = D**comp / sqrt(Q Q')``."""
    n_pairs = [len(parse_pairing(x)) for x in labels]
    out = np.zeros((len(labels), len(labels)), dtype=int)
    for i, a in enumerate(labels):
        for j, b in enumerate(labels):
            out[i, j] = 8 - n_pairs[i] - n_pairs[j] - 2 * pairing_components(a, b)
    return out


def _check_D(D: int) -> None:
    if D < 2:
        raise ArgumentError(f"need D >= 2, got {D}")


def _twist_boundaries(model: StatmechModel, a: str, b: str, c: str | None = None) -> None:
    names = {"A": a, "B": b} | ({"C": c} if c else {})
    for k, lab in names.items():
        model.boundary[k] = model.Wlink[:, model.index(lab)].copy()
        model.boundary_states[k] = lab


def _pairing_onsite(D: int, lam: float, links: int, n_single: int, n_double: int, extra: int) -> np.ndarray:
    # a site with k legs is a Haar vector of length n = D**k scaled by sqrt(n);
    # sqrt(Q) from each of its k links is absorbed and the total divided by n
    n = float(D) ** links
    return np.array([lam**4 * n] + [lam**2 * math.sqrt(n)] * n_single + [n / (n + extra)] * n_double)


def build_orthogonal_model(D: int, lam: float) -> StatmechModel:
    """Ten pairing states of four real copies; weights depend on ``mu = lam * D``."""
    _check_D(D)
    mu = lam * D
    V = np.array([mu**4] + [mu**2] * 6 + [D**4 / (D**4 + 2)] * 3)
    Wl = float(D) ** (-ORTHOGONAL_KTILDE / 2.0)
    by_links = {k: _pairing_onsite(D, lam, k, 6, 3, 2) for k in (1, 2, 3)}
    m = StatmechModel(
        "orthogonal", 10, V, Wl, ORTHOGONAL_LABELS, params=dict(D=D, lam=lam, mu=mu), V_by_links=by_links
    )
    _twist_boundaries(m, "(14)(23)", "(12)(34)", "(13)(24)")
    return m


def build_unitary_model(D: int, lam: float) -> StatmechModel:
    """Seven pairing states compatible with alternating ``U, conj(U)`` copies."""
    _check_D(D)
    mu = lam * D
    V = np.array([mu**4] + [mu**2] * 4 + [D**4 / (D**4 + 1)] * 2)
    Wl = float(D) ** (-UNITARY_KTILDE / 2.0)
    by_links = {k: _pairing_onsite(D, lam, k, 4, 2, 1) for k in (1, 2, 3)}
    m = StatmechModel(
        "unitary", 7, V, Wl, UNITARY_LABELS, params=dict(D=D, lam=lam, mu=mu), V_by_links=by_links
    )
    _twist_boundaries(m, "(14)(23)", "(12)(34)")
    return m


_T_STATES = ("(12)(34)", "(14)(23)")


def _rank1_parts(D: int, lam: float):
    Vt = np.array([lam**4] + [lam**2] * 4 + [D**4 / (D**4 + 1)] * 2)
    # overlap of each vertex pairing with the two link pairings, D per loop
    WY = np.array([[float(D) ** pairing_components(s, t) for t in _T_STATES] for s in UNITARY_LABELS])
    WTT = np.array([[float(D) ** pairing_components(s, t) for t in _T_STATES] for s in _T_STATES])
    Y = np.array([[1.0, -1.0 / D], [-1.0 / D, 1.0]]) / (D**2 - 1)
    # positive square root of [[a, b], [b, a]] in closed form keeps R exactly symmetric
    a, b = Y[0, 0], Y[0, 1]
    rp, rm = math.sqrt(a + b), math.sqrt(a - b)
    R = np.array([[rp + rm, rp - rm], [rp - rm, rp + rm]]) / 2
    return Vt, WY, WTT, Y, R


def build_rank1_link_model(D: int, lam: float) -> StatmechModel:
    """Rank-1 interpolation model in spin form.

    Every link carries ``WY Y WY^T`` (the average over a Haar unitary sitting
    on the link); the Ising-link version is :func:`rank1_ising_tensor`. Link
    weights are divided by ``D**2`` so a bulk vertex is normalised by ``D**4``.
    """
    _check_D(D)
    Vt, WY, WTT, Y, R = _rank1_parts(D, lam)
    L = WY @ Y @ WY.T / D**2
    L = 0.5 * (L + L.T)
    m = StatmechModel("rank1", 7, Vt, L, UNITARY_LABELS, params=dict(D=D, lam=lam, mu=lam * D))
    bvec = WY @ Y @ WTT / D**2
    m.boundary["B"] = bvec[:, 0]
    m.boundary["A"] = bvec[:, 1]
    m.boundary_states.update(A=_T_STATES[1], B=_T_STATES[0])
    m.params["Y"] = Y
    m.params["R"] = R
    return m


def rank1_ising_tensor(D: int, lam: float, legs: int = 4) -> np.ndarray:
    """Vertex tensor ``T[i, j, k, l]`` on Ising link variables, divided by ``D**4``."""
    _check_D(D)
    Vt, WY, WTT, Y, R = _rank1_parts(D, lam)
    half = WY @ R / D  # each of the four half-links carries one factor of D
    T = np.zeros((2,) * legs)
    for s in range(7):
        t = np.array(Vt[s])
        for _ in range(legs):
            t = np.multiply.outer(t, half[s])
        T += t
    return T


def rank1_vertex_weights(D: int, lam: float) -> np.ndarray:
    """``w(n)`` for ``n = 0..4`` ones around a vertex.

    Each state's term multiplies its factors in sorted order and the terms are
    summed with ``math.fsum``, so the ``0 <-> 1`` symmetry ``w(n) = w(4 - n)``
    holds bit for bit.
    """
    _check_D(D)
    Vt, WY, WTT, Y, R = _rank1_parts(D, lam)
    half = np.array([[WY[s, 0] * R[0, j] + WY[s, 1] * R[1, j] for j in range(2)] for s in range(7)]) / D
    out = []
    for n in range(5):
        terms = [math.prod(sorted([Vt[s]] + [half[s, 0]] * (4 - n) + [half[s, 1]] * n)) for s in range(7)]
        out.append(math.fsum(terms))
    return np.array(out)


def cycle_count(perm: tuple) -> int:
    seen = [False] * len(perm)
    c = 0
    for i in range(len(perm)):
        if not seen[i]:
            c += 1
            j = i
            while not seen[j]:
                seen[j] = True
                j = perm[j]
    return c


def _perm_label(p: tuple) -> str:
    seen, out = set(), ""
    for i in range(len(p)):
        if i in seen or p[i] == i:
            seen.add(i)
            continue
        cyc, j = [], i
        while j not in seen:
            seen.add(j)
            cyc.append(str(j + 1))
            j = p[j]
        out += "(" + "".join(cyc) + ")"
    return out or "()"


def build_s4_model(D: int, d: int) -> StatmechModel:
    """Permutation model of a Haar-random PEPS norm, states labelled by ``S_4``."""
    if D < 2 or d < 1:
        raise ArgumentError(f"need D >= 2 and d >= 1, got D={D}, d={d}")
    perms = list(itertools.permutations(range(4)))
    labels = tuple(_perm_label(p) for p in perms)
    V = np.array([float(d) ** cycle_count(p) for p in perms])
    inv = [tuple(np.argsort(p)) for p in perms]
    Wl = np.array(
        [[float(D) ** cycle_count(tuple(p1[j] for j in inv2)) for inv2 in inv] for p1 in perms]
    )
    m = StatmechModel("s4", 24, V, Wl, labels, params=dict(D=D, d=d))
    _twist_boundaries(m, "(14)(23)", "(12)(34)")
    return m


MODEL_BUILDERS = {
    "orthogonal": build_orthogonal_model,
    "unitary": build_unitary_model,
    "rank1": build_rank1_link_model,
}


# transfer matrices

def _row_weight(model: StatmechModel, W: int, right: np.ndarray, links=None) -> np.ndarray:
    q = model.q
    w = np.ones((1,) * W)
    for c in range(W):
        shape = [1] * W
        shape[c] = q
        w = w * model.onsite(None if links is None else links[c]).reshape(shape)
    for c in range(W - 1):
        shape = [1] * W
        shape[c] = q
        shape[c + 1] = q
        w = w * model.Wlink.reshape(shape)
    shape = [1] * W
    shape[W - 1] = q
    return w * right.reshape(shape)


def _row_links(W: int, H: int, r: int) -> list[int]:
    # the right edge always has a link, to the fixed boundary column
    return [(c > 0) + 1 + (r > 0) + (r < H - 1) for c in range(W)]


def partition_function(model: StatmechModel, W: int, H: int, right_bcs, edges: str = "trimmed") -> float:
    """``log Z`` of a ``W``-wide, ``H``-tall patch with open top, bottom and left edges.

    ``right_bcs`` holds one boundary condition per row for the right edge.
    With ``edges="trimmed"`` a site with fewer than four links uses the
    on-site weights of a tensor with that many legs (when the model knows
    them); ``edges="free"`` uses the bulk weights everywhere.
    """
    if edges not in ("trimmed", "free"):
        raise ArgumentError(f"edges must be 'trimmed' or 'free', got {edges!r}")
    if W < 1 or H < 1:
        raise ArgumentError("need W, H >= 1")
    if model.q**W > TRANSFER_GUARD:
        raise SizeError(f"q**W = {model.q ** W} exceeds the transfer guard {TRANSFER_GUARD}")
    right_bcs = list(right_bcs)
    if len(right_bcs) != H:
        raise ArgumentError(f"need {H} right boundary conditions, got {len(right_bcs)}")
    cache: dict = {}

    def row(r):
        bc = right_bcs[r]
        links = tuple(_row_links(W, H, r)) if edges == "trimmed" else None
        key = (bc if isinstance(bc, (str, int, type(None))) else id(bc), links)
        if key not in cache:
            cache[key] = _row_weight(model, W, model.boundary_vector(bc), links)
        return cache[key]

    v = row(0)
    log_z = 0.0
    for r in range(1, H):
        for c in range(W):
            v = np.moveaxis(np.tensordot(v, model.Wlink, axes=([c], [0])), -1, c)
        v = v * row(r)
        s = v.sum()
        if not s > 0:
            raise FloatingPointError("partition function is not positive")
        v = v / s
        log_z += math.log(s)
    return log_z + math.log(v.sum())


def predicted_entropy(
    model: StatmechModel,
    W: int,
    H: int | None = None,
    bc_top="A",
    bc_bottom="B",
    cut: int | None = None,
    edges: str = "trimmed",
) -> TwistedRatio:
    """Free-energy cost of switching the right edge from ``bc_bottom`` to ``bc_top`` above the cut."""
    H = 4 * W if H is None else H
    cut = H // 2 if cut is None else cut
    if not 1 <= cut < H:
        raise ArgumentError(f"cut must lie in [1, {H}), got {cut}")
    tw = partition_function(model, W, H, [bc_top] * cut + [bc_bottom] * (H - cut), edges)
    un = partition_function(model, W, H, [bc_bottom] * H, edges)
    return TwistedRatio(W, H, tw, un)


def line_tension(Ws, s2s) -> float:
    """Least-squares slope of ``s2`` against ``W``."""
    Ws = np.asarray(Ws, dtype=float)
    if len(Ws) < 2:
        raise ArgumentError("need at least two widths for a slope")
    return float(np.polyfit(Ws, np.asarray(s2s, dtype=float), 1)[0])


def phase_scan(builder, Ds, mus, Ws=(2, 3, 4), H_factor: int = 4, edges: str = "trimmed") -> list[dict]:
    """Domain-wall line tension on a ``(D, mu)`` grid for a ``builder(D, lam)``."""
    if isinstance(builder, str):
        builder = MODEL_BUILDERS[builder]
    Ds, mus, Ws = list(Ds), list(mus), list(Ws)
    if not Ds or not mus or not Ws:
        raise ArgumentError("phase_scan grids must be nonempty")
    out = []
    for D in Ds:
        for mu in mus:
            model = builder(D, mu / D)
            s2 = [predicted_entropy(model, W, H_factor * W, edges=edges).predicted_s2 for W in Ws]
            out.append(
                dict(model=model.name, D=D, mu=mu, Ws=Ws, s2=s2, line_tension=line_tension(Ws, s2))
            )
    return out
