"""Riccati flow of the chart representative s = p q^{-1}.

The linear flow generated by A = [[a, b], [c, d]] induces
``ds/dx = c + d s - s (a + b s)`` on the dense chart of symmetric matrices.
Integration is done through the Moebius action of local fundamental
solutions, which passes through chart singularities (points where an
eigenvalue of s escapes to infinity) without special-casing.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .errors import ChartDomainError, StructureError
from .matrixkit import mat_exp, symmetrize
from .system import CoefficientField, SymplecticCoefficients
from .tolerances import DEFAULT_TOLERANCES, Tolerances

__all__ = [
    "SymmetricChart",
    "EigenTrace",
    "ChartPath",
    "riccati_rhs",
    "mobius_step",
    "integrate_chart",
    "singular_eigenvalue_count",
    "singular_threshold",
]


@dataclass(frozen=True)
class SymmetricChart:
    """Real symmetric chart matrix; constructor-symmetrized and finite."""

    mat: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.mat, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise StructureError(f"chart must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise StructureError("chart has non-finite entries")
        object.__setattr__(self, "mat", symmetrize(m))

    @property
    def n(self) -> int:
        return self.mat.shape[0]


@dataclass(frozen=True)
class EigenTrace:
    """Eigenvalues mu_i(x) of the chart along the grid, sorted ascending
    per sample, with per-eigenvalue singularity flags."""

    grid: np.ndarray
    mu: np.ndarray
    singular_flags: np.ndarray

    def __post_init__(self) -> None:
        if np.any(np.diff(self.grid) <= 0):
            raise StructureError("EigenTrace grid must be strictly increasing")
        if np.any(np.diff(self.mu, axis=1) < 0):
            raise StructureError("EigenTrace rows must be sorted ascending")


@dataclass(frozen=True)
class ChartPath:
    """Chart samples along the grid plus the eigenvalue trace.

    ``charts[m]`` is the exactly-symmetric chart at ``grid[m]``;
    ``flagged_samples`` marks grid indices where the Moebius denominator was
    ill-conditioned (chart singularity crossed nearby);
    ``max_symmetry_defect`` is the largest pre-symmetrization defect seen.
    """

    grid: np.ndarray
    charts: np.ndarray
    eigen_trace: EigenTrace
    flagged_samples: tuple[int, ...] = ()
    max_symmetry_defect: float = 0.0

    def chart(self, i: int) -> SymmetricChart:
        return SymmetricChart(self.charts[i])


def riccati_rhs(
    s: SymmetricChart,
    coeffs: SymplecticCoefficients,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """Right-hand side c + d s - s (a + b s), exactly symmetrized."""
    m = s.mat
    if coeffs.n != s.n:
        raise StructureError("chart and coefficient dimensions disagree")
    rhs = coeffs.c + coeffs.d @ m - m @ (coeffs.a + coeffs.b @ m)
    scale = max(1.0, float(np.max(np.abs(rhs))))
    defect = float(np.max(np.abs(rhs - rhs.T)))
    if defect > tol.block_structure * scale:
        raise StructureError(f"Riccati RHS asymmetric by {defect:.3e}; input not in sp(R^2n)?")
    return symmetrize(rhs)


def _check_symplectic(phi: np.ndarray, n: int, tol: Tolerances) -> None:
    j_top = np.hstack([np.zeros((n, n)), np.eye(n)])
    j_bot = np.hstack([-np.eye(n), np.zeros((n, n))])
    j = np.vstack([j_top, j_bot])
    defect = float(np.max(np.abs(phi.T @ j @ phi - j)))
    scale = max(1.0, float(np.max(np.abs(phi))) ** 2)
    if defect > tol.symplectic_check * scale:
        raise StructureError(f"propagator not symplectic: defect {defect:.3e}")


def _mobius_apply(s: np.ndarray, phi: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Apply the Moebius action; returns (new s, effective denominator
    condition, pre-symmetrization defect).

    The effective condition compares the smallest singular value of the
    denominator against the scale of its inputs; the plain condition number
    is blind to a uniformly tiny denominator (always 1 for n = 1).
    """
    n = s.shape[0]
    num = phi[n:, :n] + phi[n:, n:] @ s
    den = phi[:n, :n] + phi[:n, n:] @ s
    sv_min = float(np.linalg.svd(den, compute_uv=False)[-1])
    scale = (float(np.linalg.norm(phi[:n, :], 2))
             * max(1.0, float(np.linalg.norm(s, 2))))
    cond = np.inf if sv_min == 0.0 else scale / sv_min
    if not np.isfinite(cond):
        raise np.linalg.LinAlgError("Moebius denominator exactly singular")
    s_new = np.linalg.solve(den.T, num.T).T
    defect = float(np.max(np.abs(s_new - s_new.T)))
    return symmetrize(s_new), cond, defect


def mobius_step(
    s: SymmetricChart,
    phi: np.ndarray,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> SymmetricChart:
    """Moebius action s -> (phi21 + phi22 s)(phi11 + phi12 s)^{-1}.

    ``phi`` must be symplectic (checked).  The step is defined through chart
    singularities; an exactly singular denominator (measure zero) raises
    ``ChartDomainError`` and is handled by substepping in integrate_chart.
    """
    phi = np.asarray(phi, dtype=float)
    n = s.n
    if phi.shape != (2 * n, 2 * n):
        raise StructureError(f"propagator shape {phi.shape}, expected {(2 * n, 2 * n)}")
    _check_symplectic(phi, n, tol)
    try:
        s_new, _, _ = _mobius_apply(s.mat, phi)
    except np.linalg.LinAlgError as exc:
        raise ChartDomainError(f"Moebius step hit an exactly singular sample: {exc}") from exc
    return SymmetricChart(s_new)


def singular_threshold(chart_tol: float) -> float:
    """|mu| above which an eigenvalue counts as singular: cot(chart_tol/2)."""
    return 1.0 / np.tan(0.5 * chart_tol)


def singular_eigenvalue_count(
    s: SymmetricChart,
    chart_tol: float = DEFAULT_TOLERANCES.chart_tol,
) -> int:
    """Number of eigenvalues of Cay(s) within ``chart_tol`` of -1 on the
    circle, i.e. eigenvalues of s with |mu| > cot(chart_tol / 2).

    Equals the rank loss of q for the frame the chart represents.
    """
    mu = np.linalg.eigvalsh(s.mat)
    return int(np.sum(np.abs(mu) > singular_threshold(chart_tol)))


def _propagator(field: CoefficientField, x_lo: float, x_hi: float, lam: float) -> np.ndarray:
    h = x_hi - x_lo
    a_mid = field.evaluate(x_lo + 0.5 * h, lam)
    return mat_exp(h * a_mid.full())


def integrate_chart(
    field: CoefficientField,
    lam: float,
    grid: np.ndarray,
    s0: SymmetricChart,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> ChartPath:
    """Integrate the chart flow over ``grid`` with midpoint-frozen
    exponential propagators applied through the Moebius action.

    The integration proceeds through chart singularities; samples where the
    Moebius denominator condition exceeds ``1 / chart_tol`` are flagged.  If
    a denominator is exactly singular the step is retried as two half steps
    (the singular set is isolated) and the sample flagged.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise StructureError("grid must be strictly increasing with >= 2 points")
    span = 1e-12 * (field.x_plus - field.x_minus)
    if grid[0] < field.x_minus - span or grid[-1] > field.x_plus + span:
        raise StructureError("grid extends outside [x_minus, x_plus]")
    if s0.n != field.n:
        raise StructureError("initial chart dimension disagrees with field")

    n = field.n
    nsamp = grid.size
    charts = np.empty((nsamp, n, n))
    charts[0] = s0.mat
    flagged: list[int] = []
    cond_gate = 1.0 / tol.chart_tol
    max_defect = 0.0
    s = s0.mat
    for m in range(nsamp - 1):
        phi = _propagator(field, grid[m], grid[m + 1], lam)
        try:
            s, cond, defect = _mobius_apply(s, phi)
        except np.linalg.LinAlgError:
            # exactly singular sample: take one-sided substeps around it
            x_mid = 0.5 * (grid[m] + grid[m + 1])
            s_half, c1, d1 = _mobius_apply(s, _propagator(field, grid[m], x_mid, lam))
            s, c2, d2 = _mobius_apply(s_half, _propagator(field, x_mid, grid[m + 1], lam))
            cond, defect = max(c1, c2), max(d1, d2)
            flagged.append(m + 1)
        if cond > cond_gate and (not flagged or flagged[-1] != m + 1):
            flagged.append(m + 1)
        max_defect = max(max_defect, defect)
        charts[m + 1] = s

    mu = np.linalg.eigvalsh(charts)
    flags = np.abs(mu) > singular_threshold(tol.chart_tol)
    trace = EigenTrace(grid=grid, mu=mu, singular_flags=flags)
    return ChartPath(grid=grid, charts=charts, eigen_trace=trace,
                     flagged_samples=tuple(flagged), max_symmetry_defect=max_defect)
