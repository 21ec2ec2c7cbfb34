"""Symplectic coefficient fields, Lagrangian frames, and far-field data.

A first-order system d/dx (q, p)^T = A(x, lambda) (q, p)^T with
A = [[a, b], [c, d]] lies in sp(R^2n) when b and c are symmetric and
a = -d^T.  This module validates that structure, builds initial frames from
far-field invariant subspaces, and carries arbitrary reference planes to the
standard one (q0, p0) = (0, I).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Callable, TYPE_CHECKING

import numpy as np

from .errors import ChartDomainError, HyperbolicityError, NormalizationError, StructureError
from .matrixkit import symmetrize
from .tolerances import DEFAULT_TOLERANCES, Tolerances

if TYPE_CHECKING:  # pragma: no cover
    from .riccati import SymmetricChart

__all__ = [
    "SymplecticCoefficients",
    "CoefficientField",
    "LagrangianFrame",
    "ReferencePlane",
    "validate_coefficients",
    "normalize_reference",
    "total_frame_rank_loss",
    "farfield_frame",
    "chart_from_frame",
]


@dataclass(frozen=True)
class SymplecticCoefficients:
    """Validated blocks of A = [[a, b], [c, d]] in sp(R^2n).

    Construct through :func:`validate_coefficients`; the stored blocks satisfy
    b = b^T and c = c^T exactly and d = -a^T exactly.
    """

    n: int
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def full(self) -> np.ndarray:
        """Assemble the 2n x 2n coefficient matrix."""
        return np.block([[self.a, self.b], [self.c, self.d]])


def validate_coefficients(
    a: np.ndarray,
    b: np.ndarray,
    c: np.ndarray,
    d: np.ndarray,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> SymplecticCoefficients:
    """Check the sp(R^2n) block structure and return exact-structure blocks.

    b and c are symmetrized, d is replaced by -a^T; defects beyond the
    structure tolerance raise ``StructureError``.
    """
    blocks = [np.asarray(x, dtype=float) for x in (a, b, c, d)]
    n = blocks[0].shape[0]
    for name, blk in zip("abcd", blocks):
        if blk.shape != (n, n):
            raise StructureError(f"block {name} has shape {blk.shape}, expected {(n, n)}")
        if not np.all(np.isfinite(blk)):
            raise StructureError(f"block {name} has non-finite entries")
    a, b, c, d = blocks
    for name, blk in (("b", b), ("c", c)):
        defect = float(np.max(np.abs(blk - blk.T)))
        if defect > tol.block_structure:
            raise StructureError(f"not in sp(R^2n): block {name} asymmetric by {defect:.3e}")
    defect = float(np.max(np.abs(d + a.T)))
    if defect > tol.block_structure:
        raise StructureError(f"not in sp(R^2n): d + a^T deviates by {defect:.3e}")
    return SymplecticCoefficients(n=n, a=a, b=symmetrize(b), c=symmetrize(c), d=-a.T)


@dataclass(frozen=True)
class CoefficientField:
    """Coefficient matrix A(x, lambda) with constant far-field limits.

    ``evaluate`` must be a pure function of (x, lambda).  ``farfield_minus``
    and ``farfield_plus`` give the constant limits as functions of lambda;
    ``evaluate(x_minus, lam)`` agrees with ``farfield_minus(lam)`` within
    ``farfield_tol`` (and likewise at the right end).
    """

    n: int
    evaluate: Callable[[float, float], SymplecticCoefficients]
    x_minus: float
    x_plus: float
    farfield_minus: Callable[[float], SymplecticCoefficients]
    farfield_plus: Callable[[float], SymplecticCoefficients]
    farfield_tol: float = DEFAULT_TOLERANCES.farfield_default
    name: str = ""

    def farfield_defect(self, lam: float) -> float:
        """Largest entrywise gap between the truncated ends and the limits."""
        d_minus = np.max(np.abs(self.evaluate(self.x_minus, lam).full()
                                - self.farfield_minus(lam).full()))
        d_plus = np.max(np.abs(self.evaluate(self.x_plus, lam).full()
                               - self.farfield_plus(lam).full()))
        return float(max(d_minus, d_plus))


def _check_frame(q: np.ndarray, p: np.ndarray, tol: Tolerances, what: str) -> None:
    n = q.shape[0]
    if q.shape != (n, n) or p.shape != (n, n):
        raise StructureError(f"{what}: q and p must be square of equal size")
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
        raise StructureError(f"{what}: non-finite entries")
    scale = max(1.0, float(np.max(np.abs(q))) * float(np.max(np.abs(p))))
    defect = float(np.max(np.abs(q.T @ p - p.T @ q)))
    if defect > tol.frame_lagrangian * scale:
        raise StructureError(f"{what}: Lagrangian condition fails, defect {defect:.3e}")
    sv = np.linalg.svd(np.vstack([q, p]), compute_uv=False)
    if sv[-1] <= tol.frame_rank * sv[0]:
        raise StructureError(f"{what}: stacked frame rank-deficient (sv ratio {sv[-1]/sv[0]:.3e})")


@dataclass(frozen=True)
class LagrangianFrame:
    """A 2n x n frame (q, p)^T spanning a Lagrangian plane.

    Invariants (checked at construction): q^T p = p^T q and the stacked
    matrix has full column rank.
    """

    q: np.ndarray
    p: np.ndarray
    _tol: Tolerances = dataclass_field(default=DEFAULT_TOLERANCES, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        _check_frame(self.q, self.p, self._tol, "LagrangianFrame")

    @property
    def n(self) -> int:
        return self.q.shape[0]

    def stacked(self) -> np.ndarray:
        return np.vstack([self.q, self.p])


@dataclass(frozen=True)
class ReferencePlane:
    """Reference Lagrangian plane (q0, p0), same invariants as a frame."""

    q0: np.ndarray
    p0: np.ndarray
    _tol: Tolerances = dataclass_field(default=DEFAULT_TOLERANCES, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "q0", np.asarray(self.q0, dtype=float))
        object.__setattr__(self, "p0", np.asarray(self.p0, dtype=float))
        _check_frame(self.q0, self.p0, self._tol, "ReferencePlane")

    @property
    def n(self) -> int:
        return self.q0.shape[0]


def standard_reference(n: int) -> ReferencePlane:
    """The standard reference plane (q0, p0) = (0, I)."""
    return ReferencePlane(q0=np.zeros((n, n)), p0=np.eye(n))


def _cond2(m: np.ndarray) -> float:
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[-1] == 0.0:
        return np.inf
    return float(sv[0] / sv[-1])


def normalize_reference(
    frame: LagrangianFrame,
    ref: ReferencePlane,
    field: CoefficientField,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> tuple[LagrangianFrame, CoefficientField]:
    """Carry ``ref`` to the standard reference plane (0, I).

    Applies the symplectic change of coordinates
    ``T = [[p0^T, -p0^T q0 p0^{-1}], [0, p0^{-1}]]`` to the frame and
    conjugates the coefficient field, so downstream crossing counts against
    the standard plane measure intersections with ``ref``.  Total-frame rank
    and the Lagrangian condition are preserved.  Requires p0 invertible;
    otherwise pre-rotate frame and reference with J = [[0, -I], [I, 0]].
    """
    n = frame.n
    if ref.n != n or field.n != n:
        raise StructureError("frame, reference and field dimensions disagree")
    if _cond2(ref.p0) >= tol.cond_limit:
        raise NormalizationError("reference not normalizable; pre-rotate")
    p0 = ref.p0
    g = np.linalg.solve(p0.T, ref.q0.T).T  # q0 p0^{-1}, symmetric for Lagrangian refs
    g_defect = float(np.max(np.abs(g - g.T)))
    if g_defect > tol.chart_symmetry * max(1.0, float(np.max(np.abs(g)))):
        raise StructureError(f"reference chart q0 p0^-1 asymmetric by {g_defect:.3e}")
    g = symmetrize(g)

    p0_inv = np.linalg.solve(p0, np.eye(n))
    t_mat = np.block([[p0.T, -p0.T @ g], [np.zeros((n, n)), p0_inv]])
    t_inv = np.block([[p0_inv.T, g @ p0], [np.zeros((n, n)), p0]])

    q_new = p0.T @ (frame.q - g @ frame.p)
    p_new = p0_inv @ frame.p
    new_frame = LagrangianFrame(q=q_new, p=p_new)

    def conjugated(x: float, lam: float) -> SymplecticCoefficients:
        a_full = t_mat @ field.evaluate(x, lam).full() @ t_inv
        return validate_coefficients(a_full[:n, :n], a_full[:n, n:],
                                     a_full[n:, :n], a_full[n:, n:], tol)

    def conj_limit(limit: Callable[[float], SymplecticCoefficients]):
        def inner(lam: float) -> SymplecticCoefficients:
            a_full = t_mat @ limit(lam).full() @ t_inv
            return validate_coefficients(a_full[:n, :n], a_full[:n, n:],
                                         a_full[n:, :n], a_full[n:, n:], tol)
        return inner

    new_field = CoefficientField(
        n=n,
        evaluate=conjugated,
        x_minus=field.x_minus,
        x_plus=field.x_plus,
        farfield_minus=conj_limit(field.farfield_minus),
        farfield_plus=conj_limit(field.farfield_plus),
        farfield_tol=field.farfield_tol,
        name=field.name + "|normalized" if field.name else "normalized",
    )
    return new_frame, new_field


def _rank(m: np.ndarray, rel_threshold: float) -> int:
    sv = np.linalg.svd(m, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rel_threshold * sv[0]))


def total_frame_rank_loss(frame: LagrangianFrame, tol: Tolerances = DEFAULT_TOLERANCES) -> int:
    """Rank loss of q, equal to the rank loss of [[q, 0], [p, I]].

    This counts the dimension of intersection with the standard reference
    plane (after normalization, with the chosen reference).
    """
    return frame.n - _rank(frame.q, tol.rank_threshold)


def farfield_frame(
    a_inf: SymplecticCoefficients,
    side: str,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> LagrangianFrame:
    """Orthonormal frame of the unstable or stable invariant subspace of A_inf.

    ``side`` is "unstable" (Re > 0 eigenvalues) or "stable" (Re < 0).
    Complex-conjugate eigenvector pairs v = x +- iy contribute the real
    columns (x, y); selected eigenvalues are ordered by descending real part
    then ascending imaginary part, and the columns are orthonormalized by QR.
    """
    if side not in ("unstable", "stable"):
        raise ValueError(f"side must be 'unstable' or 'stable', got {side!r}")
    n = a_inf.n
    w, v = np.linalg.eig(a_inf.full())
    if float(np.min(np.abs(w.real))) < tol.hyperbolicity:
        raise HyperbolicityError("far-field not hyperbolic (lambda may be in essential spectrum)")
    want = w.real > 0 if side == "unstable" else w.real < 0
    idx = np.nonzero(want)[0]
    if idx.size != n:
        raise StructureError(
            f"{side} subspace has dimension {idx.size}, expected {n}")
    order = sorted(idx, key=lambda i: (-w[i].real, w[i].imag))
    cols: list[np.ndarray] = []
    used: set[int] = set()
    for i in order:
        if i in used:
            continue
        used.add(i)
        if abs(w[i].imag) <= tol.hyperbolicity:
            cols.append(v[:, i].real)
            continue
        cols.append(v[:, i].real)
        cols.append(v[:, i].imag)
        for j in order:
            if j not in used and abs(w[j] - np.conj(w[i])) <= 1e-9 * max(1.0, abs(w[i])):
                used.add(j)
                break
    basis = np.column_stack(cols)
    if basis.shape[1] != n:
        raise StructureError("realified invariant subspace has wrong dimension")
    q_fact, _ = np.linalg.qr(basis)
    # fix QR sign ambiguity for reproducible output
    signs = np.sign(q_fact[np.argmax(np.abs(q_fact), axis=0), np.arange(n)])
    signs[signs == 0] = 1.0
    q_fact = q_fact * signs
    return LagrangianFrame(q=q_fact[:n], p=q_fact[n:])


def chart_from_frame(frame: LagrangianFrame, tol: Tolerances = DEFAULT_TOLERANCES) -> "SymmetricChart":
    """Chart representative s = p q^{-1} of the plane spanned by the frame.

    Fails with ``ChartDomainError`` when q is (numerically) singular, i.e.
    the plane lies outside the top Schubert cell.
    """
    from .riccati import SymmetricChart

    cond_q = _cond2(frame.q)
    if cond_q >= tol.cond_limit:
        raise ChartDomainError("plane outside top cell: q is numerically singular")
    s = np.linalg.solve(frame.q.T, frame.p.T).T
    defect = float(np.max(np.abs(s - s.T)))
    scale = max(1.0, float(np.max(np.abs(s))))
    # near the chart boundary the solve loses ~eps*cond(q) relative accuracy
    allowed = max(tol.chart_symmetry * scale, 100.0 * np.finfo(float).eps * cond_q * scale)
    if defect > allowed:
        raise StructureError(f"chart not symmetric: defect {defect:.3e}")
    return SymmetricChart(symmetrize(s))
