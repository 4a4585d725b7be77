"""Machine checks of the exact identities obeyed by two-group models.

Each check returns a :class:`ConstraintReport` carrying the residual, the
tolerance it was judged against, and a per-entry breakdown.  The checks
cover the parity symmetry of the scattering matrix, the group-trace
identity, the determinant (hierarchy) identities, reality of cyclic
amplitude products, and extraction of the real orthogonal symmetric
matrix underlying the removable-phase ansatz.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .analytic import hc_rhs
from .errors import (
    AnsatzViolated,
    DegenerateRealPart,
    DimensionMismatch,
    DisconnectedGauge,
    InvalidParameter,
)
from .model import BipartiteStructure, MlzModel
from .propagate import cyclic_products

_GAUGE_GRAPH_THRESHOLD = 1e-8


@dataclass(frozen=True)
class ConstraintReport:
    """Outcome of a single identity check: ``passed == (residual <= tolerance)``."""

    name: str
    residual: float
    tolerance: float
    passed: bool
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.passed != (self.residual <= self.tolerance):
            raise InvalidParameter("pass flag inconsistent with residual")

    @staticmethod
    def from_residual(name: str, residual: float, tolerance: float,
                      details: Optional[dict] = None) -> "ConstraintReport":
        residual = float(residual)
        return ConstraintReport(name=name, residual=residual, tolerance=tolerance,
                                passed=residual <= tolerance,
                                details=details or {})


@dataclass(frozen=True)
class AlphaMatrix:
    """Real symmetric involution extracted from a scattering matrix.

    Defined only up to conjugation by a diagonal sign matrix; compare
    conjugation invariants (absolute values, cyclic products, spectrum).
    """

    alpha: np.ndarray
    gauge: np.ndarray
    sign_class: str = "defined up to diagonal +/-1 conjugation"

    def __post_init__(self):
        a = np.array(self.alpha, dtype=float)
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)
        g = np.array(self.gauge, dtype=float)
        g.setflags(write=False)
        object.__setattr__(self, "gauge", g)


def _check_square(s: np.ndarray, bip: BipartiteStructure) -> np.ndarray:
    s = np.asarray(s, dtype=complex)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {s.shape}")
    if s.shape[0] != bip.n:
        raise DimensionMismatch(
            f"matrix size {s.shape[0]} != bipartition size {bip.n}")
    return s


def check_bipartite_symmetry(s: np.ndarray, bip: BipartiteStructure,
                             tolerance: float = 1e-10) -> ConstraintReport:
    """Check ``S_nm = (-1)**(f_n + f_m) conj(S_mn)`` and real diagonal."""
    s = _check_square(s, bip)
    sign = (-1.0) ** (bip.groups[:, None] + bip.groups[None, :])
    violation = np.abs(s - sign * s.conj().T)
    diag_imag = np.abs(np.imag(np.diag(s)))
    residual = max(float(np.max(violation)), float(np.max(diag_imag)))
    return ConstraintReport.from_residual(
        "bipartite_symmetry", residual, tolerance,
        {"entry_violation": violation, "diag_imag": diag_imag},
    )


def check_trace_identity(s: np.ndarray, bip: BipartiteStructure,
                         tolerance: float = 1e-10) -> ConstraintReport:
    """Check ``sum_G2 S_nn - sum_G1 S_nn = N - 2M``."""
    s = _check_square(s, bip)
    trace = np.sum(np.diag(s) * bip.theta_diag())
    target = bip.n - 2 * bip.m
    residual = abs(complex(trace) - target)
    return ConstraintReport.from_residual(
        "trace_identity", residual, tolerance,
        {"trace": complex(trace), "target": target},
    )


def check_hierarchy(s: np.ndarray, model: MlzModel,
                    orders: Optional[Sequence[int]] = None,
                    tolerance: float = 1e-10) -> list[ConstraintReport]:
    """Compare leading/trailing principal minors of ``S`` with their exact values.

    The model must be slope-descending and match the basis of ``s``.  One
    report per (order, orientation).
    """
    s = np.asarray(s, dtype=complex)
    if s.shape != (model.n, model.n):
        raise DimensionMismatch("matrix does not match the model size")
    if orders is None:
        orders = range(1, model.n)
    reports = []
    for m in orders:
        for lowest, tag in ((False, "top"), (True, "bottom")):
            block = s[-m:, -m:] if lowest else s[:m, :m]
            det = complex(np.linalg.det(block))
            rhs = hc_rhs(model, m, lowest=lowest)
            residual = abs(det - rhs)
            reports.append(ConstraintReport.from_residual(
                f"hierarchy_m{m}_{tag}", residual, tolerance,
                {"det": det, "rhs": rhs, "order": m, "orientation": tag},
            ))
    return reports


def check_cyclic_reality(u_or_sequence, triple: Sequence[int] = (1, 2, 3),
                         quad: Sequence[int] = (1, 2, 3, 4),
                         threshold: float = 1e-2) -> ConstraintReport:
    """Check that cyclic amplitude products are real.

    Accepts a single matrix or a sequence of ``(T, U(T, -T))`` snapshots.
    For a sequence, the verdict additionally requires both ratio magnitudes
    to be non-increasing over the trailing five checkpoints; the residual
    oscillates on top of its decay, so use sparse geometric schedules that
    stay above the oscillation floor.  Raises :class:`DegenerateRealPart`
    if a real part vanishes at the final checkpoint.
    """
    if isinstance(u_or_sequence, np.ndarray) and u_or_sequence.ndim == 2:
        sequence = [(None, u_or_sequence)]
    else:
        sequence = list(u_or_sequence)
    if not sequence:
        raise InvalidParameter("empty snapshot sequence")
    ratios = []
    for t_k, u in sequence:
        cp = cyclic_products(np.asarray(u), triple, quad)
        ratios.append((t_k, cp))
    final = ratios[-1][1]
    if final.degenerate3 or final.degenerate4:
        raise DegenerateRealPart("cyclic product has vanishing real part")
    residual = max(abs(final.r3), abs(final.r4))
    details = {
        "r3": final.r3, "r4": final.r4,
        "c3": final.c3, "c4": final.c4,
        "history": [(t, cp.r3, cp.r4) for t, cp in ratios],
    }
    if len(ratios) > 1:
        window = [cp for _, cp in ratios][-5:]
        trend3 = all(abs(a.r3) >= abs(b.r3) - 1e-12
                     for a, b in zip(window, window[1:]))
        trend4 = all(abs(a.r4) >= abs(b.r4) - 1e-12
                     for a, b in zip(window, window[1:]))
        details["decreasing"] = trend3 and trend4
        if not (trend3 and trend4):
            # a non-decreasing tail fails the check: report the worst ratio
            # over the window, floored just above the threshold
            window_max = max(max(abs(cp.r3), abs(cp.r4)) for cp in window)
            residual = max(residual, window_max, np.nextafter(threshold, np.inf))
    return ConstraintReport.from_residual("cyclic_reality", residual, threshold,
                                          details)


def extract_alpha(s: np.ndarray, bip: BipartiteStructure,
                  tolerance: float = 1e-8) -> AlphaMatrix:
    """Strip group phases and gauge phases from a scattering matrix.

    Writes ``S_mn = alpha_mn * i**(f_n + f_m) * exp(i(phi_m - phi_n))`` and
    fixes the ``phi`` along a spanning forest of the graph of entries with
    ``|S| > 1e-8`` (roots get ``phi = 0``; each phase is fixed modulo pi,
    so the result is canonical up to diagonal sign conjugation).  Raises
    :class:`AnsatzViolated` when the stripped matrix has imaginary residue
    above ``tolerance``, i.e. the ansatz does not hold for ``s``.
    """
    s = _check_square(s, bip)
    n = s.shape[0]
    ipow = np.array([1, 1j, -1, -1j])
    strip = ipow[(-(bip.groups[:, None] + bip.groups[None, :])) % 4]
    t = s * strip  # Hermitian when the parity symmetry holds: t_mn = alpha e^{i(phi_m - phi_n)}

    phi = np.zeros(n)
    visited = np.zeros(n, dtype=bool)
    graph = np.abs(s) > _GAUGE_GRAPH_THRESHOLD
    np.fill_diagonal(graph, False)
    for root in range(n):
        if visited[root]:
            continue
        visited[root] = True
        queue = [root]
        while queue:
            u = queue.pop(0)
            for v in np.nonzero(graph[u])[0]:
                if not visited[v]:
                    # t_uv = alpha e^{i(phi_u - phi_v)}: pick alpha_uv > 0
                    phi[v] = phi[u] - np.angle(t[u, v])
                    visited[v] = True
                    queue.append(int(v))

    gauge = np.exp(-1j * phi)
    alpha_c = t * gauge[:, None] * np.conj(gauge)[None, :]
    # residual over entries that are large enough to carry phase information
    mask = np.abs(s) > _GAUGE_GRAPH_THRESHOLD
    np.fill_diagonal(mask, True)
    residual = float(np.max(np.abs(np.imag(alpha_c))[mask])) if mask.any() else 0.0
    cross = mask & ~graph
    np.fill_diagonal(cross, False)
    if residual > tolerance:
        comp_ok = _same_component(graph)
        bad_cross = bool(np.max(np.abs(np.imag(alpha_c))[cross], initial=0.0) > tolerance)
        if bad_cross and not comp_ok:
            raise DisconnectedGauge(
                "inconsistent phases across disconnected gauge components")
        raise AnsatzViolated(
            f"imaginary residue {residual:.3e} after gauge stripping",
            residual=residual)
    alpha = np.real(alpha_c)
    sym = float(np.max(np.abs(alpha - alpha.T)))
    invol = float(np.max(np.abs(alpha @ alpha - np.eye(n))))
    if max(sym, invol) > max(tolerance, 1e-6):
        raise AnsatzViolated(
            f"alpha not a symmetric involution (sym {sym:.2e}, alpha^2 {invol:.2e})",
            residual=max(sym, invol))
    return AlphaMatrix(alpha=alpha, gauge=phi)


def _same_component(graph: np.ndarray) -> bool:
    n = graph.shape[0]
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        u = stack.pop()
        for v in np.nonzero(graph[u])[0]:
            if not seen[v]:
                seen[v] = True
                stack.append(int(v))
    return bool(seen.all())
