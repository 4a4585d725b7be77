"""Triangular connection-matrix algebra for single-crossing models.

The scattering matrix of a linear-in-time model factorizes as
``S = S2 S1 exp(pi eta)`` with ``S1`` unit lower-triangular and ``S2`` unit
upper-triangular; for two-group (bipartite) models the remaining two
factors follow by parity mirroring, closing the monodromy identity
``S4 S3 S2 S1 exp(2 pi eta) = 1``.  From the same four factors the
scattering matrix of the dual non-Hermitian evolution is
``S' = exp(pi eta/2) S3 S2 exp(pi eta/2)``, which drives pair production
in the quadratic-boson realization (mode populations below).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .constraints import ConstraintReport
from .errors import (
    DiagonalConditionViolated,
    DimensionMismatch,
    InvalidParameter,
    Singular,
)
from .model import BipartiteStructure, EtaVector, MlzModel, detect_bipartition, eta as model_eta
from .analytic import bowtie3_scattering


@dataclass(frozen=True)
class StokesSet:
    """The four unitriangular transition matrices plus the eta vector.

    ``s1``/``s3`` are unit lower-triangular, ``s2``/``s4`` unit
    upper-triangular; structure is validated exactly at construction.
    Closure of the monodromy identity is checked by
    :func:`check_monodromy`.
    """

    s1: np.ndarray
    s2: np.ndarray
    s3: np.ndarray
    s4: np.ndarray
    eta: EtaVector

    def __post_init__(self):
        mats = {}
        n = self.eta.n
        for name in ("s1", "s2", "s3", "s4"):
            m = np.array(getattr(self, name), dtype=complex)
            if m.shape != (n, n):
                raise DimensionMismatch(f"{name} shape {m.shape} != ({n}, {n})")
            lower = name in ("s1", "s3")
            off = np.triu(m, 1) if lower else np.tril(m, -1)
            if np.any(off != 0):
                raise InvalidParameter(f"{name} is not unit {'lower' if lower else 'upper'} triangular")
            if np.any(np.diag(m) != 1):
                raise InvalidParameter(f"{name} diagonal entries must all be 1")
            m.setflags(write=False)
            mats[name] = m
        for name, m in mats.items():
            object.__setattr__(self, name, m)

    @property
    def n(self) -> int:
        return self.eta.n


@dataclass(frozen=True)
class DualScattering:
    """Scattering matrix of the dual non-Hermitian evolution.

    ``signature`` is the diagonal Bogoliubov metric (+1 on group 2, -1 on
    group 1); ``pseudo_unitarity_residual`` is ``max|S' Sigma S'^dag - Sigma|``
    computed at construction.
    """

    s_prime: np.ndarray
    signature: np.ndarray
    pseudo_unitarity_residual: float = None

    def __post_init__(self):
        s = np.array(self.s_prime, dtype=complex)
        sig = np.asarray(self.signature, dtype=float).ravel()
        if s.shape != (sig.size, sig.size):
            raise DimensionMismatch("signature length does not match matrix")
        if not np.all(np.abs(sig) == 1):
            raise InvalidParameter("signature entries must be +/-1")
        res = float(np.max(np.abs((s * sig) @ s.conj().T - np.diag(sig))))
        s.setflags(write=False)
        sig.setflags(write=False)
        object.__setattr__(self, "s_prime", s)
        object.__setattr__(self, "signature", sig)
        object.__setattr__(self, "pseudo_unitarity_residual", res)

    @property
    def n(self) -> int:
        return self.signature.size


def factor_scattering(s: np.ndarray, eta_vec: EtaVector,
                      tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Factor ``S = S2 S1 exp(pi eta)`` by the outside-in shell recursion.

    The input must be in slope-descending state order.  Working inward from
    the last row/column, each shell fixes one row of ``S1`` and one column
    of ``S2`` linearly and exposes one diagonal consistency condition (the
    determinant identities in disguise); a violation beyond ``tol``
    (relative to the diagonal magnitude) raises
    :class:`DiagonalConditionViolated` naming the shell.  Use a loose
    ``tol`` for finite-time numeric input.
    """
    s = np.asarray(s, dtype=complex)
    n = s.shape[0]
    if s.shape != (n, n) or eta_vec.n != n:
        raise DimensionMismatch("matrix/eta size mismatch")
    if not np.all(np.isfinite(s)):
        raise Singular("non-finite entries in scattering matrix")
    w = s * np.exp(-np.pi * eta_vec.eta)[None, :]
    s1 = np.eye(n, dtype=complex)
    s2 = np.eye(n, dtype=complex)
    for r in range(n - 1, -1, -1):
        inner = np.arange(r + 1, n)
        diag = w[r, r] - (s2[r, inner] @ s1[inner, r] if inner.size else 0.0)
        residual = abs(diag - 1.0)
        if residual > tol * max(1.0, abs(w[r, r])):
            raise DiagonalConditionViolated(
                f"diagonal condition at shell {r + 1}: |{diag:.6g} - 1| = {residual:.3e}",
                shell=r + 1, residual=residual)
        for j in range(r):
            s1[r, j] = w[r, j] - (s2[r, inner] @ s1[inner, j] if inner.size else 0.0)
            s2[j, r] = w[j, r] - (s2[j, inner] @ s1[inner, r] if inner.size else 0.0)
    return s1, s2


def mirror_stokes(s1: np.ndarray, s2: np.ndarray, eta_vec: EtaVector,
                  bip: BipartiteStructure) -> tuple[np.ndarray, np.ndarray]:
    """Parity images ``S3 = e^{-pi eta} Theta S1 Theta e^{pi eta}`` (same for S4).

    In components ``y_ij = (-1)**(f_i + f_j) exp(pi (eta_j - eta_i)) x_ij``,
    which preserves the triangular structure and unit diagonal.
    """
    s1 = np.asarray(s1, dtype=complex)
    s2 = np.asarray(s2, dtype=complex)
    n = bip.n
    if s1.shape != (n, n) or s2.shape != (n, n) or eta_vec.n != n:
        raise DimensionMismatch("factor/bipartition size mismatch")
    sign = (-1.0) ** (bip.groups[:, None] + bip.groups[None, :])
    scale = np.exp(np.pi * (eta_vec.eta[None, :] - eta_vec.eta[:, None]))
    s3 = sign * scale * s1
    s4 = sign * scale * s2
    return s3, s4


def stokes_from_scattering(s: np.ndarray, model: MlzModel,
                           bip: Optional[BipartiteStructure] = None,
                           tol: float = 1e-10) -> StokesSet:
    """Build the full transition-matrix set from a scattering matrix.

    The model (and the basis of ``s``) must be slope-descending; the
    triangular shapes of the factors are tied to that ordering.
    """
    if np.any(np.diff(model.beta) >= 0):
        raise InvalidParameter("model must be sorted slope-descending")
    if bip is None:
        bip = detect_bipartition(model)
    ev = model_eta(model)
    s1, s2 = factor_scattering(s, ev, tol=tol)
    s3, s4 = mirror_stokes(s1, s2, ev, bip)
    return StokesSet(s1=s1, s2=s2, s3=s3, s4=s4, eta=ev)


def check_monodromy(stokes_set: StokesSet, tolerance: float = 1e-10) -> ConstraintReport:
    """Residual of the closure identity ``S4 S3 S2 S1 exp(2 pi eta) = 1``."""
    n = stokes_set.n
    product = stokes_set.s4 @ stokes_set.s3 @ stokes_set.s2 @ stokes_set.s1
    product = product * np.exp(2 * np.pi * stokes_set.eta.eta)[None, :]
    residual = float(np.max(np.abs(product - np.eye(n))))
    return ConstraintReport.from_residual("monodromy", residual, tolerance,
                                          {"product": product})


def dual_scattering(stokes_set: StokesSet, bip: BipartiteStructure) -> DualScattering:
    """Dual scattering matrix ``S' = exp(pi eta/2) S3 S2 exp(pi eta/2)``."""
    if bip.n != stokes_set.n:
        raise DimensionMismatch("bipartition size mismatch")
    half = np.exp(0.5 * np.pi * stokes_set.eta.eta)
    s_prime = half[:, None] * (stokes_set.s3 @ stokes_set.s2) * half[None, :]
    return DualScattering(s_prime=s_prime, signature=bip.signature_diag())


def condensate_populations(dual_s: DualScattering,
                           initial: Optional[Sequence[float]] = None) -> np.ndarray:
    """Mean mode populations after the sweep, from initial occupation numbers.

    For number-state input the cross terms average out and mode ``k`` ends
    with ``sum_{j same group} n_j |S'_kj|^2 + sum_{s other group}
    (n_s + 1) |S'_ks|^2``.  Vacuum input (the default) reduces to the
    other-group row sums, and the two groups then gain equal totals.
    """
    n = dual_s.n
    if initial is None:
        initial = np.zeros(n)
    initial = np.asarray(initial, dtype=float).ravel()
    if initial.size != n:
        raise InvalidParameter("initial occupation length mismatch")
    if np.any(initial < 0):
        raise InvalidParameter("occupation numbers must be nonnegative")
    same = dual_s.signature[:, None] == dual_s.signature[None, :]
    weights = np.where(same, initial[None, :], initial[None, :] + 1.0)
    return (np.abs(dual_s.s_prime) ** 2 * weights).sum(axis=1)


def bowtie3_stokes(beta1: float, beta2: float, g1: float, g2: float) -> StokesSet:
    """Closed-form transition matrices of the three-state star model.

    States ordered (slope ``beta1``, slope ``beta2``, center); the set
    closes the monodromy identity to machine precision.
    """
    sol = bowtie3_scattering(beta1, beta2, g1, g2)
    p1, p2 = sol.params["p1"], sol.params["p2"]
    s = sol.s
    s12, s13, s23 = s[0, 1], s[0, 2], s[1, 2]
    s1 = np.array([
        [1, 0, 0],
        [np.conj(s12) * p1 + s23 * np.conj(s13) / p2, 1, 0],
        [-np.conj(s13) * p1, -np.conj(s23) * p2, 1],
    ])
    s2 = np.array([
        [1, s12 * p2 + s13 * np.conj(s23) / p1, s13 / (p1 * p2)],
        [0, 1, s23 / (p1 * p2)],
        [0, 0, 1],
    ])
    ev = EtaVector(eta=np.array([
        abs(g1) ** 2 / beta1,
        abs(g2) ** 2 / beta2,
        -abs(g1) ** 2 / beta1 - abs(g2) ** 2 / beta2,
    ]))
    bip = BipartiteStructure(groups=np.array([2, 2, 1]), m=1)
    s3, s4 = mirror_stokes(s1, s2, ev, bip)
    return StokesSet(s1=s1, s2=s2, s3=s3, s4=s4, eta=ev)
