"""Closed-form scattering solutions and exact probability identities.

Every function here evaluates an exact expression: survival amplitudes of
extremal-slope levels, determinant identities of leading scattering-matrix
blocks, the algebraic star-graph (bowtie) solution through an orthogonal
symmetric parametrization, the driven Tavis-Cummings 4- and 5-state
matrices, the six-state composite matrix, and the constrained five-state
matrices for the three supported coupling-sign patterns.

Probability matrices are assembled from products of the elementary
quantities ``p_j = exp(-pi g_j^2 / |slope gap|)``, so double stochasticity
and symmetry hold to machine precision by construction; the constructors
assert this.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidParameter, UnsupportedSignPattern
from .model import BipartiteStructure, MlzModel, detect_bipartition

_STOCHASTIC_TOL = 1e-12
_RANGE_SLACK = 1e-14


@dataclass(frozen=True)
class AnalyticSolution:
    """An exact transition-probability matrix, with amplitudes where known.

    ``p`` is doubly stochastic (to 1e-12) with entries in [0, 1]; ``s`` is
    the complex amplitude matrix in the gauge with all removable phases set
    to zero, or None when only probabilities are known.  ``params`` records
    the dimensionless parameters the matrix was built from.
    """

    p: np.ndarray
    s: Optional[np.ndarray] = None
    params: dict = None
    symmetric: bool = True

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "params", dict(self.params or {}))
        if self.s is not None:
            s = np.array(self.s, dtype=complex)
            s.setflags(write=False)
            object.__setattr__(self, "s", s)
        n = p.shape[0]
        if p.shape != (n, n):
            raise InvalidParameter("probability matrix must be square")
        if np.max(np.abs(p.sum(axis=0) - 1)) > _STOCHASTIC_TOL or \
           np.max(np.abs(p.sum(axis=1) - 1)) > _STOCHASTIC_TOL:
            raise InvalidParameter("matrix is not doubly stochastic")
        if np.min(p) < -_RANGE_SLACK or np.max(p) > 1 + _RANGE_SLACK:
            raise InvalidParameter("entries outside [0, 1]")
        if self.symmetric and np.max(np.abs(p - p.T)) > _STOCHASTIC_TOL:
            raise InvalidParameter("matrix is not symmetric")
        if self.s is not None and np.max(np.abs(np.abs(self.s) ** 2 - p)) > 1e-12:
            raise InvalidParameter("|s|^2 inconsistent with p")

    @property
    def n(self) -> int:
        return self.p.shape[0]


# ---------------------------------------------------------------------------
# hierarchy-constraint right-hand sides
# ---------------------------------------------------------------------------

def _require_sorted(model: MlzModel) -> None:
    if np.any(np.diff(model.beta) >= 0):
        raise InvalidParameter("model must be sorted slope-descending")


def be_formula(model: MlzModel, lowest: bool = False) -> float:
    """Survival amplitude of the steepest level (slope-sorted model).

    ``S_11 = exp(-pi sum_k |a_k1|^2 / (beta_1 - beta_k))``; with
    ``lowest=True`` the mirrored variant for the smallest-slope level.
    """
    _require_sorted(model)
    if lowest:
        num = np.abs(model.a[:-1, -1]) ** 2
        return float(np.exp(-np.pi * np.sum(num / (model.beta[:-1] - model.beta[-1]))))
    num = np.abs(model.a[1:, 0]) ** 2
    return float(np.exp(-np.pi * np.sum(num / (model.beta[0] - model.beta[1:]))))


def hc_rhs(model: MlzModel, order: int, lowest: bool = False) -> float:
    """Right-hand side of the order-``m`` hierarchy constraint.

    Equals ``exp(-pi sum_{k>m} sum_{r<=m} |a_kr|^2/(beta_r - beta_k))`` for
    a slope-descending model; ``lowest=True`` gives the mirrored family
    anchored at the smallest slopes.
    """
    _require_sorted(model)
    n = model.n
    if not 1 <= order <= n - 1:
        raise InvalidParameter(f"order must be in 1..{n - 1}")
    if lowest:
        inside = np.arange(n - order, n)
        outside = np.arange(0, n - order)
    else:
        inside = np.arange(0, order)
        outside = np.arange(order, n)
    num = np.abs(model.a[np.ix_(outside, inside)]) ** 2
    gaps = np.abs(model.beta[inside][None, :] - model.beta[outside][:, None])
    return float(np.exp(-np.pi * np.sum(num / gaps)))


def hc2_relation(model: MlzModel, bipartition: Optional[BipartiteStructure],
                 p12: float, mirror: bool = False) -> float:
    """Survival probability of the second level from the top-pair transition.

    For a slope-sorted bipartite model, relates ``P_22`` to ``P_12`` via
    the second-order hierarchy constraint and the reality of diagonal
    amplitudes; ``mirror=True`` gives the ``(N, N-1)`` variant.
    """
    _require_sorted(model)
    if not 0 <= p12 <= 1:
        raise InvalidParameter("p12 must lie in [0, 1]")
    if bipartition is None:
        bipartition = detect_bipartition(model)
    n = model.n
    if mirror:
        i1, i2 = n - 1, n - 2
        sign_gap = -1.0
    else:
        i1, i2 = 0, 1
        sign_gap = 1.0
    e1 = _node_exponent(model, i1, sign_gap)
    e2 = _node_exponent(model, i2, sign_gap)
    parity = (-1.0) ** (bipartition.groups[i1] + bipartition.groups[i2])
    val = np.exp(2 * np.pi * e1) * (parity * p12 + np.exp(-np.pi * (e1 + e2))) ** 2
    return float(val)


def _node_exponent(model: MlzModel, node: int, sign_gap: float) -> float:
    """``sum_{k connected to node} |a_nk|^2 / (beta_n - beta_k)`` (mirrored: sign-flipped)."""
    mask = model.a[node] != 0
    gaps = sign_gap * (model.beta[node] - model.beta[mask])
    return float(np.sum(np.abs(model.a[node, mask]) ** 2 / gaps))


# ---------------------------------------------------------------------------
# bowtie family
# ---------------------------------------------------------------------------

def _bowtie_center(model: MlzModel, center: Optional[int]) -> int:
    """0-based center index: the unique node covering all edges."""
    edges = model.edges()
    if center is not None:
        c = int(center) - 1
        if not 0 <= c < model.n:
            raise InvalidParameter("center index out of range")
        if any(c not in e for e in edges):
            raise InvalidParameter("given center does not cover all couplings")
        return c
    degree = np.zeros(model.n, dtype=int)
    for i, j in edges:
        degree[i] += 1
        degree[j] += 1
    covers = [k for k in range(model.n) if all(k in e for e in edges)]
    if not covers:
        raise InvalidParameter("model is not a star graph")
    covers.sort(key=lambda k: (-degree[k], k))
    return covers[0]


def bowtie_alpha(model: MlzModel, center: Optional[int] = None) -> AnalyticSolution:
    """Algebraic solution of a star-graph model.

    The scattering matrix is parametrized as ``alpha = 1 - 2 v v^T`` with a
    single unit vector ``v`` fixed recursively by the hierarchy
    constraints; amplitudes carry the two-group phase pattern
    ``i**(f_a + f_b)`` in the zero-phase gauge.  Output states are ordered
    slope-descending.  ``center`` (1-based) overrides star-center detection.
    """
    c = _bowtie_center(model, center)
    beta0 = model.beta[c]
    others = [k for k in range(model.n) if k != c]
    # paper-style signed ordering: ascending slope with the center at position m
    others.sort(key=lambda k: model.beta[k])
    below = [k for k in others if model.beta[k] < beta0]
    above = [k for k in others if model.beta[k] > beta0]
    m = len(below)
    order = below + [c] + above  # ascending slope
    p = np.ones(model.n)
    for k in others:
        p[order.index(k)] = np.exp(
            -np.pi * np.abs(model.a[c, k]) ** 2 / np.abs(beta0 - model.beta[k]))

    v2 = np.zeros(model.n)
    for idx in range(m):  # j < 0 block, idx 0 is the lowest slope
        v2[idx] = 0.5 * (1 - p[idx]) * np.prod(p[:idx])
    for idx in range(m + 1, model.n):  # j > 0 block
        v2[idx] = 0.5 * (1 - p[idx]) * np.prod(p[idx + 1:])
    v2[m] = 0.5 * (np.prod(p[m + 1:]) + np.prod(p[:m]))
    v = np.sqrt(v2)

    alpha = np.eye(model.n) - 2 * np.outer(v, v)
    f = np.full(model.n, 2)
    f[m] = 1
    phase = 1j ** (f[:, None] + f[None, :])
    s = alpha * phase
    prob = alpha ** 2

    # re-sort to slope-descending order
    desc = np.argsort(-model.beta[order], kind="stable")
    s = s[np.ix_(desc, desc)]
    prob = prob[np.ix_(desc, desc)]
    params = {
        "p": p[desc].copy(),
        "v_squared": v2[desc].copy(),
        "alpha": alpha[np.ix_(desc, desc)],
        "groups": f[desc].copy(),
        "m_below": m,
        "center_state": int(c + 1),
        "state_order": [int(order[k] + 1) for k in desc],
    }
    return AnalyticSolution(p=prob, s=s, params=params)


def bowtie3_scattering(beta1: float, beta2: float, g1: float, g2: float) -> AnalyticSolution:
    """Explicit 3x3 scattering matrix of the two-outer-level star model.

    States are ordered (slope ``beta1``, slope ``beta2``, center slope 0)
    with ``beta1 > beta2 > 0``; the matrix is unitary to machine precision.
    """
    if not beta1 > beta2 > 0:
        raise InvalidParameter("need beta1 > beta2 > 0")
    p1 = np.exp(-np.pi * abs(g1) ** 2 / beta1)
    p2 = np.exp(-np.pi * abs(g2) ** 2 / beta2)
    s12 = -np.sqrt(p1 * (1 - p1) * (1 - p2))
    s13 = 1j * np.sqrt((1 - p1) * (1 + p1 * p2))
    s23 = 1j * np.sqrt(p1 * (1 - p2) * (1 + p1 * p2))
    s = np.array([
        [p1, s12, s13],
        [np.conj(s12), 1 - p1 + p1 * p2, s23],
        [-np.conj(s13), -np.conj(s23), p1 * p2],
    ])
    return AnalyticSolution(p=np.abs(s) ** 2, s=s, params={"p1": p1, "p2": p2})


# ---------------------------------------------------------------------------
# driven Tavis-Cummings chains
# ---------------------------------------------------------------------------

def _dtcm_x(g: float, beta_scale: float) -> float:
    return float(np.exp(-2 * np.pi * g ** 2 / beta_scale))


def dtcm_extremal(n_states: int, g: float, n_b: float,
                  beta_scale: float = 1.0) -> dict:
    """Extremal-level scattering quantities of the Tavis-Cummings chain.

    Returns the q-deformed-binomial edge probabilities valid for any
    ``n_b > -1`` and, when ``n_b == 0``, the two explicit next-to-edge
    diagonal amplitudes.  Keys: ``p11``, ``p12``, ``p1n``, ``pnn``,
    ``pn_nm1`` (probabilities) plus ``s22`` and ``s_nm1_nm1`` (amplitudes,
    ``n_b = 0`` only).  The ``s_nm1_nm1`` expression is asserted by the
    source only for the sector sizes checked numerically here (n <= 5);
    it is evaluated as printed for larger chains.
    """
    if n_states < 2:
        raise InvalidParameter("n_states must be >= 2")
    if not n_b > -1:
        raise InvalidParameter("n_b must exceed -1")
    two_s = n_states - 1
    s_spin = two_s / 2.0
    x = _dtcm_x(g, beta_scale)
    a = x ** n_b
    p = a * x ** np.arange(1, two_s + 1)  # p_1 .. p_{2S}
    q = 1 - p
    out = {
        "x": x, "a": a, "p": p, "q": q,
        "p11": float(p[0] ** two_s),
        "pnn": float(p[-1] ** two_s),
        "p1n": float(np.prod(q)),
    }
    # q-deformed geometric sums for the first off-diagonal entries
    k = np.arange(two_s)
    out["p12"] = float(q[0] * np.sum(p[0] ** (two_s - 1 - k) *
                                     (p[1] ** k if two_s > 1 else 1.0)))
    if two_s > 1:
        out["pn_nm1"] = float(q[-1] * np.sum(p[-1] ** (two_s - 1 - k) * p[-2] ** k))
    else:
        out["pn_nm1"] = out["p12"]
    if n_b == 0:
        out["s22"] = float(x ** (3 * s_spin - 2) - x ** (s_spin - 1) * (1 - x ** two_s))
        out["s_nm1_nm1"] = float(
            x ** (1 + 2 * s_spin * (s_spin - 2)) *
            (1 - (x ** two_s - 1) ** 2 / (1 - x))) if x != 1 else 1.0
    return out


def dtcm4_probabilities(g: float, beta_scale: float = 1.0) -> AnalyticSolution:
    """Exact 4x4 probability matrix of the spin-3/2 Tavis-Cummings chain.

    The (2, 3) entry is evaluated as ``(1 - x^2)(x^3 + x^2 + x - 1)^2``;
    the sign of its first factor is fixed by nonnegativity and the exact
    row sums (see tests).
    """
    x = _dtcm_x(g, beta_scale)
    p23 = (1 - x ** 2) * (x ** 3 + x ** 2 + x - 1) ** 2
    p = np.array([
        [x ** 3,
         x ** 2 * (1 - x ** 3),
         x * (1 + x) * (1 - x) ** 2 * (1 + x + x ** 2),
         (1 - x) ** 3 * (1 + x) * (1 + x + x ** 2)],
        [x ** 2 * (1 - x ** 3),
         x * (x ** 3 + x ** 2 - 1) ** 2,
         p23,
         x * (1 + x) * (1 - x ** 3) ** 2],
        [x * (1 + x) * (1 - x) ** 2 * (1 + x + x ** 2),
         p23,
         x * (x * (x ** 3 + x ** 2 + x - 1) - 1) ** 2,
         x ** 4 * (1 - x) * (1 + x + x ** 2) ** 2],
        [(1 - x) ** 3 * (1 + x) * (1 + x + x ** 2),
         x * (1 + x) * (1 - x ** 3) ** 2,
         x ** 4 * (1 - x) * (1 + x + x ** 2) ** 2,
         x ** 9],
    ])
    s_diag = [x ** 1.5,
              np.sqrt(x) * (x ** 3 + x ** 2 - 1),
              np.sqrt(x) * (x * (x ** 3 + x ** 2 + x - 1) - 1),
              x ** 4.5]
    return AnalyticSolution(p=p, params={"x": x, "s_diag": np.array(s_diag)})


def dtcm5_probabilities(g: float, beta_scale: float = 1.0) -> AnalyticSolution:
    """Exact 5x5 probability matrix of the spin-2 Tavis-Cummings chain.

    Rows/columns 1 and 5 are the q-deformed binomial edge distributions;
    the interior diagonal amplitudes follow from the second-order
    hierarchy constraints and the group-trace identity, and the remaining
    entries from row-sum completion.
    """
    x = _dtcm_x(g, beta_scale)
    s22 = x * (-1 + x ** 3 + x ** 4)
    s33 = 1 - x - 2 * x ** 2 - x ** 3 + 2 * x ** 5 + x ** 6 + x ** 7
    s44 = x ** 2 * (-1 - x - x ** 2 + x ** 3 + x ** 4 + x ** 5 + x ** 6)
    p12 = x ** 3 * (1 - x ** 4)
    p13 = x ** 2 * (1 - x ** 3) * (1 - x ** 4)
    p14 = x * (1 - x ** 2) * (1 - x ** 3) * (1 - x ** 4)
    p15 = (1 - x) * (1 - x ** 2) * (1 - x ** 3) * (1 - x ** 4)
    p25 = x * (1 - x ** 2) * (1 - x ** 3) * (1 - x ** 4) * (1 + x + x ** 2 + x ** 3)
    p35 = x ** 4 * (1 - x ** 3) * (1 - x ** 4) * (1 + x ** 2) * (1 + x + x ** 2)
    p45 = x ** 9 * (1 - x ** 4) * (1 + x + x ** 2 + x ** 3)
    p23 = (x - 2 * x ** 3 - 3 * x ** 4 - x ** 5 + 4 * x ** 6 + 5 * x ** 7
           + 3 * x ** 8 - x ** 9 - 3 * x ** 10 - 2 * x ** 11 - x ** 12)
    p24 = (1 - 2 * x - 2 * x ** 2 + x ** 3 + 4 * x ** 4 + 6 * x ** 5 - 4 * x ** 7
           - 6 * x ** 8 - 4 * x ** 9 + x ** 10 + 2 * x ** 11 + 2 * x ** 12 + x ** 13)
    p34 = (x + 2 * x ** 2 - 4 * x ** 4 - 7 * x ** 5 - 4 * x ** 6 + 3 * x ** 7
           + 8 * x ** 8 + 9 * x ** 9 + 4 * x ** 10 - x ** 11 - 4 * x ** 12
           - 4 * x ** 13 - 2 * x ** 14 - x ** 15)
    p = np.array([
        [x ** 4, p12, p13, p14, p15],
        [p12, s22 ** 2, p23, p24, p25],
        [p13, p23, s33 ** 2, p34, p35],
        [p14, p24, p34, s44 ** 2, p45],
        [p15, p25, p35, p45, x ** 16],
    ])
    s_diag = np.array([x ** 2, s22, s33, s44, x ** 8])
    return AnalyticSolution(p=p, params={"x": x, "s_diag": s_diag})


# ---------------------------------------------------------------------------
# six-state composite model and its star-graph sector
# ---------------------------------------------------------------------------

def _six_state_ps(beta1, beta2, beta3, g12, g13, g23):
    if not (beta1 > beta2 > beta3 > 0):
        raise InvalidParameter("need beta1 > beta2 > beta3 > 0")
    p1 = np.exp(-np.pi * g12 ** 2 / (beta1 + beta2))
    p2 = np.exp(-np.pi * g13 ** 2 / (beta1 + beta3))
    p3 = np.exp(-np.pi * g23 ** 2 / (beta2 + beta3))
    return p1, p2, p3


def six_state_sector(beta1: float, beta2: float, beta3: float,
                     g12: float, g13: float, g23: float) -> AnalyticSolution:
    """Probability matrix of the vacuum sector: a four-state star model.

    Basis order: (vacuum, pair 1+2, pair 1+3, pair 2+3).  The normalization
    constant is ``p = 1 + p1 p2 p3``, the unique value making the matrix
    doubly stochastic.
    """
    p1, p2, p3 = _six_state_ps(beta1, beta2, beta3, g12, g13, g23)
    q1, q2, q3 = 1 - p1, 1 - p2, 1 - p3
    p = 1 + p1 * p2 * p3
    mat = np.array([
        [(p1 * p2 * p3) ** 2, p * q1, p * p1 * q2, p * p1 * p2 * q3],
        [p * q1, p1 ** 2, p1 * q1 * q2, p1 * p2 * q1 * q3],
        [p * p1 * q2, p1 * q1 * q2, (1 - p1 * q2) ** 2, p1 ** 2 * p2 * q2 * q3],
        [p * p1 * p2 * q3, p1 * p2 * q1 * q3, p1 ** 2 * p2 * q2 * q3,
         (1 - p1 * p2 * q3) ** 2],
    ])
    return AnalyticSolution(p=mat, params={"p1": p1, "p2": p2, "p3": p3, "p": p})


def six_state_probabilities(beta1: float, beta2: float, beta3: float,
                            g12: float, g13: float, g23: float) -> AnalyticSolution:
    """Exact 6x6 probability matrix of the paired three-mode model.

    State order matches the builder: slopes ``(b1, b2, b3, -b3, -b2, -b1)``.
    The antidiagonal vanishes identically (particle-hole selection rule).
    """
    p1, p2, p3 = _six_state_ps(beta1, beta2, beta3, g12, g13, g23)
    q1, q2, q3 = 1 - p1, 1 - p2, 1 - p3
    p = 1 + p1 * p2 * p3
    d1 = p1 ** 2 * p2 ** 2
    d2 = p1 ** 2 * (1 - p2 * q3) ** 2
    d3 = (p - p1) ** 2
    a_ = p1 ** 2 * p2 * q2 * q3
    b_ = p1 * p2 * q1 * q3
    c_ = p * p1 * q2
    d_ = p * q1
    e_ = p1 * q1 * q2
    f_ = p * p1 * p2 * q3
    mat = np.array([
        [d1, a_, b_, c_, d_, 0.0],
        [a_, d2, e_, f_, 0.0, d_],
        [b_, e_, d3, 0.0, f_, c_],
        [c_, f_, 0.0, d3, e_, b_],
        [d_, 0.0, f_, e_, d2, a_],
        [0.0, d_, c_, b_, a_, d1],
    ])
    return AnalyticSolution(p=mat, params={"p1": p1, "p2": p2, "p3": p3, "p": p})


# ---------------------------------------------------------------------------
# constrained five-state model
# ---------------------------------------------------------------------------

def _five_state_matrix(p3: float, p4: float, taus: tuple[int, int, int]) -> np.ndarray:
    q3, q4 = 1 - p3, 1 - p4
    p5 = p3 * p4
    q5 = 1 - p5
    if taus == (1, 1, 1):
        return np.array([
            [p5 ** 2, q5 ** 2, p5 * q3, p3 * p5 * q4, p5 * q5],
            [q5 ** 2, p5 ** 2, p5 * q3, p3 * p5 * q4, p5 * q5],
            [p5 * q3, p5 * q3, p3 ** 2, p3 * q3 * q4, q3 * q5],
            [p3 * p5 * q4, p3 * p5 * q4, p3 * q3 * q4, (p4 + q3 * q4) ** 2, p3 * q4 * q5],
            [p5 * q5, p5 * q5, q3 * q5, p3 * q4 * q5, p5 ** 2],
        ])
    if taus == (1, 1, -1):
        return np.array([
            [p5 ** 2, 0.0, p5 * q3, p3 * p5 * q4, q5],
            [0.0, p5 ** 2, q3, p3 * q4, p5 * q5],
            [p5 * q3, q3, p3 ** 2, p3 * q3 * q4, 0.0],
            [p3 * p5 * q4, p3 * q4, p3 * q3 * q4, (p4 + q3 * q4) ** 2, 0.0],
            [q5, p5 * q5, 0.0, 0.0, p5 ** 2],
        ])
    if taus == (1, -1, -1):
        return np.array([
            [(p5 - q3 * q4) ** 2, p3 * q4 ** 2, p3 * q3, p4 * q4, p4 * q5],
            [p3 * q4 ** 2, p5 ** 2, q3, p5 * q4, p5 * q5],
            [p3 * q3, q3, p3 ** 2, 0.0, 0.0],
            [p4 * q4, p5 * q4, 0.0, p4 ** 2, q4 * q5],
            [p4 * q5, p5 * q5, 0.0, q4 * q5, p5 ** 2],
        ])
    raise UnsupportedSignPattern(f"no closed form for tau pattern {taus}")


def five_state_probabilities(b: float, b3: float, b4: float, b5: float,
                             g13: float, g14: float,
                             taus: Sequence[int] = (1, 1, 1)) -> AnalyticSolution:
    """Exact 5x5 probability matrix of the constrained five-state model.

    State order matches the builder: slopes ``(b, -b, b3, b4, b5)``.  Sign
    patterns are reduced by the global gauge flip ``tau -> -tau``; the
    three reducible-to-printed patterns are supported, anything else
    raises :class:`UnsupportedSignPattern`.  The (3, 3) entry is ``p3**2``
    (the corresponding amplitude is ``p3``), which row-sum closure and the
    mirrored survival formula both force.
    """
    if not (b3 > b4 > b > 0 > -b > b5):
        raise InvalidParameter("need b3 > b4 > b > 0 > -b > b5")
    taus = tuple(int(t) for t in taus)
    if len(taus) != 3 or any(t not in (-1, 1) for t in taus):
        raise InvalidParameter("taus must be three signs +/-1")
    reduced = taus if taus[0] == 1 else tuple(-t for t in taus)
    p3 = np.exp(-2 * np.pi * g13 ** 2 / abs(b - b3))
    p4 = np.exp(-2 * np.pi * g14 ** 2 / abs(b - b4))
    mat = _five_state_matrix(p3, p4, reduced)
    return AnalyticSolution(p=mat, params={
        "p3": p3, "p4": p4, "p5": p3 * p4, "taus": taus, "reduced_taus": reduced,
    })
