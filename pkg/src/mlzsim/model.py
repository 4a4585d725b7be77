"""Hamiltonian builders for linear-in-time level-crossing models.

All models here are of the form ``H(t) = B t + A`` with ``B`` a real
diagonal matrix of pairwise-distinct slopes and ``A`` a Hermitian coupling
matrix with zero diagonal, so that every diabatic level crosses every other
one at ``t = 0``.  Besides the generic builder, the module provides the
named solvable families (bowtie, chain, driven Tavis-Cummings chain, the
constrained four-, five- and six-state models), two-coloring of the
connectivity graph, and the non-Hermitian dual generator
``H'(tau) = -B tau + i A``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegenerateSlopes,
    DiagonalCoupling,
    DuplicateCoupling,
    InvalidParameter,
    NotBipartite,
)

HERMITICITY_TOL = 1e-12
#: Relative slope-gap threshold below which two slopes count as degenerate.
SLOPE_GAP_RTOL = 1e-9


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class MlzModel:
    """A linear-in-time Hamiltonian ``H(t) = diag(beta) t + a``.

    Attributes
    ----------
    beta:
        Real slope vector of length ``n >= 2``, pairwise distinct.
    a:
        Complex Hermitian ``n x n`` coupling matrix with exactly zero
        diagonal.
    labels:
        Optional per-state names (purely cosmetic).
    """

    beta: np.ndarray
    a: np.ndarray
    labels: Optional[tuple] = None

    def __post_init__(self):
        beta = _readonly(np.asarray(self.beta, dtype=float).ravel())
        a = _readonly(np.asarray(self.a, dtype=complex))
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "a", a)
        n = beta.size
        if n < 2:
            raise InvalidParameter(f"need at least 2 states, got {n}")
        if a.shape != (n, n):
            raise InvalidParameter(f"coupling matrix shape {a.shape} != ({n}, {n})")
        if not np.all(np.isfinite(beta)) or not np.all(np.isfinite(a)):
            raise InvalidParameter("non-finite model parameters")
        if np.max(np.abs(a - a.conj().T)) > HERMITICITY_TOL:
            raise InvalidParameter("coupling matrix is not Hermitian")
        if np.any(np.diag(a) != 0):
            raise InvalidParameter("coupling matrix must have exactly zero diagonal")
        gap = np.min(np.abs(beta[:, None] - beta[None, :])[~np.eye(n, dtype=bool)])
        if gap < SLOPE_GAP_RTOL * max(1.0, np.max(np.abs(beta))):
            raise DegenerateSlopes(f"slope gap {gap:g} below tolerance")
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != n:
                raise InvalidParameter("labels length mismatch")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.beta.size

    def h(self, t: float) -> np.ndarray:
        """Hamiltonian matrix at time ``t``."""
        return np.diag(self.beta * t).astype(complex) + self.a

    def edges(self) -> list[tuple[int, int]]:
        """Unordered pairs ``(i, j)``, ``i < j`` (0-based), with nonzero coupling."""
        iu, ju = np.triu_indices(self.n, k=1)
        mask = self.a[iu, ju] != 0
        return list(zip(iu[mask].tolist(), ju[mask].tolist()))


@dataclass(frozen=True)
class BipartiteStructure:
    """Two-coloring of a connectivity graph.

    ``groups[k]`` is 1 or 2; group 1 is the smaller side (ties broken so
    that the group containing state 0 becomes group 1).  ``m`` is the size
    of group 1.
    """

    groups: np.ndarray
    m: int

    def __post_init__(self):
        groups = _readonly(np.asarray(self.groups, dtype=int))
        object.__setattr__(self, "groups", groups)
        if not np.all((groups == 1) | (groups == 2)):
            raise InvalidParameter("group indices must be 1 or 2")
        m = int(np.sum(groups == 1))
        if m != self.m:
            raise InvalidParameter("m does not match the group vector")
        if m > groups.size - m:
            raise InvalidParameter("group 1 must not be larger than group 2")

    @property
    def n(self) -> int:
        return self.groups.size

    def theta_diag(self) -> np.ndarray:
        """Diagonal of the parity operator, ``(-1)**f_k``."""
        return np.where(self.groups == 1, -1.0, 1.0)

    def theta(self) -> np.ndarray:
        return np.diag(self.theta_diag())

    def signature_diag(self) -> np.ndarray:
        """Diagonal of the Bogoliubov signature: -1 on group 1, +1 on group 2."""
        return self.theta_diag()


@dataclass(frozen=True)
class EtaVector:
    """Per-state sums ``eta_n = sum_m |a_nm|^2 / (beta_n - beta_m)``."""

    eta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "eta", _readonly(np.asarray(self.eta, dtype=float)))

    @property
    def n(self) -> int:
        return self.eta.size


@dataclass(frozen=True)
class DualModel:
    """Non-Hermitian dual generator ``H'(tau) = -B tau + i A``.

    Wraps a bipartite base model; ``H'`` drives the Heisenberg dynamics of
    the quadratic bosonic pairing Hamiltonian built on the two groups.
    """

    base: MlzModel
    bipartition: BipartiteStructure

    def __post_init__(self):
        if self.bipartition.n != self.base.n:
            raise InvalidParameter("bipartition size mismatch")
        _check_bipartition_valid(self.base, self.bipartition)

    @property
    def n(self) -> int:
        return self.base.n

    def h_prime(self, tau: float) -> np.ndarray:
        """Dual generator matrix at (real) time ``tau``."""
        return np.diag(-self.base.beta * tau).astype(complex) + 1j * self.base.a


def _check_bipartition_valid(model: MlzModel, bip: BipartiteStructure) -> None:
    for i, j in model.edges():
        if bip.groups[i] == bip.groups[j]:
            raise InvalidParameter(f"coupling ({i + 1},{j + 1}) inside one group")


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def build_generic(beta: Sequence[float],
                  couplings: Sequence[tuple[int, int, complex]]) -> MlzModel:
    """Assemble a model from a slope vector and a coupling list.

    ``couplings`` contains ``(i, j, g)`` triples with 1-based state indices
    ``i != j``; each unordered pair may appear once.  ``a[i, j] = g`` and
    ``a[j, i] = conj(g)``.
    """
    beta = np.asarray(beta, dtype=float).ravel()
    n = beta.size
    a = np.zeros((n, n), dtype=complex)
    seen = set()
    for i, j, g in couplings:
        i, j = int(i), int(j)
        if not (1 <= i <= n and 1 <= j <= n):
            raise InvalidParameter(f"coupling index ({i},{j}) out of range 1..{n}")
        if i == j:
            raise DiagonalCoupling(f"coupling ({i},{j}) is diagonal")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise DuplicateCoupling(f"pair {key} specified twice")
        seen.add(key)
        a[i - 1, j - 1] = g
        a[j - 1, i - 1] = np.conj(g)
    return MlzModel(beta=beta, a=a)


def build_bowtie(beta0: float, others: Sequence[tuple[float, complex]]) -> MlzModel:
    """Star-graph model: one central level coupled to every other level.

    The central level (slope ``beta0``) is state 1; ``others`` supplies
    ``(slope, coupling)`` pairs for the outer levels.
    """
    slopes = np.concatenate(([beta0], [s for s, _ in others]))
    couplings = [(1, k + 2, g) for k, (_, g) in enumerate(others)]
    return build_generic(slopes, couplings)


def build_chain(beta: Sequence[float], g: Sequence[complex]) -> MlzModel:
    """Path-graph model with nearest-neighbor couplings ``a[k, k+1] = g[k]``."""
    beta = np.asarray(beta, dtype=float).ravel()
    g = np.asarray(g).ravel()
    if g.size != beta.size - 1:
        raise InvalidParameter(f"need {beta.size - 1} chain couplings, got {g.size}")
    return build_generic(beta, [(k + 1, k + 2, gk) for k, gk in enumerate(g)])


def dtcm_couplings(n_states: int, g: float, n_b: float) -> np.ndarray:
    """Chain couplings of the driven Tavis-Cummings model.

    With spin ``S = (n_states - 1)/2``, the coupling between chain sites
    ``n`` and ``n+1`` is ``g * sqrt(n_b + n) * sqrt(S(S+1) - (S-n+1)(S-n))``
    for ``n = 1 .. n_states - 1``.
    """
    s = (n_states - 1) / 2.0
    n = np.arange(1, n_states)
    spin = s * (s + 1.0) - (s - n + 1.0) * (s - n)
    return g * np.sqrt(n_b + n) * np.sqrt(spin)


def build_dtcm(n_states: int, g: float, n_b: float, beta_scale: float = 1.0) -> MlzModel:
    """Driven Tavis-Cummings chain: equidistant slopes and spin-boson couplings."""
    if n_states < 2:
        raise InvalidParameter("n_states must be >= 2")
    if not n_b > -1:
        raise InvalidParameter("n_b must exceed -1")
    if beta_scale == 0:
        raise InvalidParameter("beta_scale must be nonzero")
    beta = beta_scale * np.arange(1, n_states + 1, dtype=float)
    return build_chain(beta, dtcm_couplings(n_states, g, n_b))


def build_four_state(beta: float, beta1: float, beta2: float,
                     g1: float, g2: float) -> MlzModel:
    """Constrained four-state model on a 4-cycle connectivity graph.

    Slopes are ``(beta1, beta, -beta2, -beta1)``.  The two coupling scale
    factors are pinned to ``x = sqrt((beta1-beta)/(beta1-beta2))`` and
    ``y = sqrt((beta1+beta)/(beta1+beta2))``; both radicands must be
    positive.
    """
    if beta1 == beta2 or beta1 == -beta2:
        raise InvalidParameter("beta1 must differ from +/-beta2")
    rx = (beta1 - beta) / (beta1 - beta2)
    ry = (beta1 + beta) / (beta1 + beta2)
    if rx <= 0 or ry <= 0:
        raise InvalidParameter(f"nonpositive radicand: x^2={rx:g}, y^2={ry:g}")
    x, y = np.sqrt(rx), np.sqrt(ry)
    slopes = [beta1, beta, -beta2, -beta1]
    couplings = [(1, 2, x * g1), (1, 3, g2), (2, 4, -y * g2), (3, 4, g1)]
    return build_generic(slopes, couplings)


def build_six_state(beta1: float, beta2: float, beta3: float,
                    g12: float, g13: float, g23: float) -> MlzModel:
    """Six-state composite model of three paired fermionic modes.

    Slopes ``(beta1, beta2, beta3, -beta3, -beta2, -beta1)`` with
    ``beta1 > beta2 > beta3 > 0`` and the signed pair-coupling pattern of
    the particle-hole symmetric construction.
    """
    if not (beta1 > beta2 > beta3 > 0):
        raise InvalidParameter("need beta1 > beta2 > beta3 > 0")
    slopes = [beta1, beta2, beta3, -beta3, -beta2, -beta1]
    couplings = [
        (1, 4, g13), (1, 5, g12),
        (2, 4, g23), (2, 6, -g12),
        (3, 5, -g23), (3, 6, -g13),
    ]
    return build_generic(slopes, couplings)


def build_five_state(b: float, b3: float, b4: float, b5: float,
                     g13: float, g14: float,
                     taus: Sequence[int] = (1, 1, 1)) -> MlzModel:
    """Constrained five-state bipartite model.

    States carry slopes ``(b, -b, b3, b4, b5)`` with the ordering
    ``b3 > b4 > b > 0 > -b > b5``.  The third coupling of state 1 follows
    from the solvability constraint
    ``g13^2/(b3-b) + g14^2/(b4-b) + g15^2/(b5-b) = 0`` and the state-2
    couplings are ``g2i = tau_i * g1i * sqrt((b_i+b)/(b_i-b))``.
    """
    if not (b3 > b4 > b > 0 > -b > b5):
        raise InvalidParameter("need b3 > b4 > b > 0 > -b > b5")
    taus = tuple(int(t) for t in taus)
    if len(taus) != 3 or any(t not in (-1, 1) for t in taus):
        raise InvalidParameter("taus must be three signs +/-1")
    g15 = np.sqrt((g13 ** 2 / (b3 - b) + g14 ** 2 / (b4 - b)) * (b - b5))
    g1 = {3: g13, 4: g14, 5: g15}
    bi = {3: b3, 4: b4, 5: b5}
    g2 = {i: taus[i - 3] * g1[i] * np.sqrt((bi[i] + b) / (bi[i] - b)) for i in (3, 4, 5)}
    slopes = [b, -b, b3, b4, b5]
    couplings = [(1, 3, g13), (1, 4, g14), (1, 5, g15),
                 (2, 3, g2[3]), (2, 4, g2[4]), (2, 5, g2[5])]
    return build_generic(slopes, couplings)


# ---------------------------------------------------------------------------
# structure operations
# ---------------------------------------------------------------------------

def detect_bipartition(model: MlzModel) -> BipartiteStructure:
    """Two-color the connectivity graph, or raise :class:`NotBipartite`.

    Deterministic: each connected component is colored by breadth-first
    search seeded at its lowest-index state; the global color class that is
    smaller (ties: the one containing state 0) becomes group 1.  On an odd
    cycle the raised error carries the offending cycle (1-based).
    """
    n = model.n
    adj = [[] for _ in range(n)]
    for i, j in model.edges():
        adj[i].append(j)
        adj[j].append(i)
    color = np.full(n, -1, dtype=int)
    parent = np.full(n, -1, dtype=int)
    for seed in range(n):
        if color[seed] >= 0:
            continue
        color[seed] = 0
        queue = [seed]
        while queue:
            u = queue.pop(0)
            for v in adj[u]:
                if color[v] < 0:
                    color[v] = 1 - color[u]
                    parent[v] = u
                    queue.append(v)
                elif color[v] == color[u]:
                    raise NotBipartite(
                        "connectivity graph has an odd cycle",
                        cycle=_odd_cycle(parent, u, v),
                    )
    n0 = int(np.sum(color == 0))
    # color 0 always contains state 0, so ties resolve to color 0 as group 1
    group1_color = 0 if n0 <= n - n0 else 1
    groups = np.where(color == group1_color, 1, 2)
    return BipartiteStructure(groups=groups, m=int(np.sum(groups == 1)))


def _odd_cycle(parent: np.ndarray, u: int, v: int) -> list[int]:
    path_u, path_v = [u], [v]
    seen = {u}
    x = u
    while parent[x] >= 0:
        x = parent[x]
        path_u.append(x)
        seen.add(x)
    x = v
    while x not in seen:
        x = parent[x]
        path_v.append(x)
    lca = path_v[-1]
    cycle = path_u[: path_u.index(lca) + 1] + path_v[-2::-1]
    return [int(k) + 1 for k in cycle]


def eta(model: MlzModel) -> EtaVector:
    """Slope-weighted coupling sums; antisymmetric by pairs, so they sum to 0."""
    db = model.beta[:, None] - model.beta[None, :]
    np.fill_diagonal(db, 1.0)
    contrib = np.abs(model.a) ** 2 / db
    np.fill_diagonal(contrib, 0.0)
    return EtaVector(eta=contrib.sum(axis=1))


def permute_model(model: MlzModel, perm: Sequence[int]) -> MlzModel:
    """Relabel states so that new state ``k`` is old state ``perm[k]``."""
    perm = np.asarray(perm, dtype=int)
    labels = None if model.labels is None else tuple(model.labels[p] for p in perm)
    return MlzModel(beta=model.beta[perm], a=model.a[np.ix_(perm, perm)], labels=labels)


def sort_by_slope(model: MlzModel) -> tuple[MlzModel, np.ndarray]:
    """Relabel states in slope-descending order.

    Returns the sorted model and the permutation that undoes the sort:
    ``permute_model(sorted_model, perm)`` recovers the input.
    """
    order = np.argsort(-model.beta, kind="stable")
    inverse = np.empty_like(order)
    inverse[order] = np.arange(order.size)
    return permute_model(model, order), inverse


def dual_bosonic(model: MlzModel,
                 bipartition: Optional[BipartiteStructure] = None) -> DualModel:
    """Wrap a bipartite model into its non-Hermitian dual."""
    if bipartition is None:
        bipartition = detect_bipartition(model)
    return DualModel(base=model, bipartition=bipartition)
