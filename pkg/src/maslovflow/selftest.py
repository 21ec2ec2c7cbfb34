"""Built-in invariant suite behind ``maslovflow selftest``.

Each property is checked with an explicit numeric bound and reports its worst
observed defect, so regressions show up as numbers rather than booleans.
The ``corrupt`` hook tightens one property's bound by 1e6 to let tests verify
that failures propagate to a nonzero exit code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .maslov import crossings_from_chart, run_trace
from .matrixkit import det_phase, sym_arctan, symmetrize
from .models import get_model
from .riccati import singular_eigenvalue_count
from .system import LagrangianFrame, chart_from_frame, total_frame_rank_loss
from .tolerances import DEFAULT_TOLERANCES, Tolerances
from .unitary import cayley, integrate_unitary, unitary_from_frame

__all__ = ["PropertyReport", "planted_rank_loss_frame", "run_selftest", "SELFTEST_PROPERTIES"]


@dataclass(frozen=True)
class PropertyReport:
    name: str
    passed: bool
    max_defect: float
    bound: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"{status}  {self.name}: max defect {self.max_defect:.3e} (bound {self.bound:.1e}){extra}"


def planted_rank_loss_frame(
    n: int,
    k: int,
    rng: np.random.Generator,
    eps: float = 1e-9,
) -> LagrangianFrame:
    """Lagrangian frame whose q block has exactly k singular values ~ eps.

    Built from the diagonal frame (cos a_j, sin a_j) with k angles at
    pi/2 - eps, disguised by a symplectic map that stabilizes the standard
    reference plane (so the planted intersection dimension is preserved) and
    a random gauge.  Used by the Theorem-1 equivalence property.
    """
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    angles = rng.uniform(0.15, 1.2, size=n)
    angles[:k] = 0.5 * np.pi - eps
    q0 = np.diag(np.cos(angles))
    p0 = np.diag(np.sin(angles))
    e_orth, _ = np.linalg.qr(rng.standard_normal((n, n)))
    g_orth, _ = np.linalg.qr(rng.standard_normal((n, n)))
    s_shear = symmetrize(rng.standard_normal((n, n)))
    f_block = e_orth @ s_shear  # E^T F = S symmetric -> the map is symplectic
    q = e_orth @ q0 @ g_orth
    p = (f_block @ q0 + e_orth @ p0) @ g_orth
    return LagrangianFrame(q=q, p=p)


def _check_trace_formula(tol: Tolerances, bound: float, rng: np.random.Generator) -> PropertyReport:
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 7))
        s_mat = symmetrize(rng.uniform(-5.0, 5.0, size=(n, n)))
        lhs = det_phase(cayley_of(s_mat, tol), tol)
        rhs = -2.0 * float(np.trace(sym_arctan(s_mat, tol)))
        defect = abs(_wrap(lhs - rhs))
        worst = max(worst, defect)
    return PropertyReport("trace_formula", worst < bound, worst, bound,
                          "arg det Cay(s) vs -2 tr arctan(s), 200 random s")


def cayley_of(s_mat: np.ndarray, tol: Tolerances) -> np.ndarray:
    from .riccati import SymmetricChart

    return cayley(SymmetricChart(s_mat), tol).mat


def _wrap(angle: float) -> float:
    return float((angle + np.pi) % (2.0 * np.pi) - np.pi)


def _check_unitarity_drift(tol: Tolerances, bound: float) -> PropertyReport:
    field = get_model("kdv7")
    grid = np.linspace(field.x_minus, field.x_plus, 10_001)
    from .system import farfield_frame

    frame = farfield_frame(field.farfield_minus(0.15), "unstable", tol)
    path = integrate_unitary(field, 0.15, grid, unitary_from_frame(frame),
                             tol=tol, reproject=False)
    worst = max(path.max_unitarity_defect, path.max_symmetry_defect)
    return PropertyReport("unitarity_drift", worst < bound, worst, bound,
                          "kdv7 lambda=0.15, 1e4 steps, no re-projection")


def _check_theorem1(tol: Tolerances, bound: float, rng: np.random.Generator) -> PropertyReport:
    n = 4
    failures = 0
    for i in range(50):
        k = i % 4
        frame = planted_rank_loss_frame(n, k, rng)
        chart = chart_from_frame(frame, tol)
        c_sing = singular_eigenvalue_count(chart, tol.chart_tol)
        c_rank = total_frame_rank_loss(frame, tol)
        stacked = np.block([[frame.q, np.zeros((n, n))], [frame.p, np.eye(n)]])
        sv = np.linalg.svd(stacked, compute_uv=False)
        c_total = 2 * n - int(np.sum(sv > tol.rank_threshold * sv[0]))
        if not (c_sing == c_rank == c_total == k):
            failures += 1
    return PropertyReport("theorem1_equivalence", failures == 0, float(failures), bound,
                          "singular-eigenvalue vs rank-loss counts, 50 planted frames")


def _check_backend_agreement(tol: Tolerances, bound: float) -> PropertyReport:
    cases = [("poschl_teller:2", (-5.0, -2.0, -0.5)), ("kdv7", (-0.2, 0.05, 0.13))]
    worst = 0
    for name, lams in cases:
        field = get_model(name)
        grid = np.linspace(field.x_minus, field.x_plus, 2001)
        for lam in lams:
            trace = run_trace(field, lam, grid, backend="both", tol=tol)
            n_unitary = trace.result.unsigned_count
            n_chart = sum(c.multiplicity
                          for c in crossings_from_chart(trace.chart_path, tol.chart_tol, tol))
            worst = max(worst, abs(n_unitary - n_chart))
    return PropertyReport("backend_agreement", worst == 0, float(worst), bound,
                          "chart vs unitary crossing counts on both bundled models")


def theta_via_trace_formula(us: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample -2 tr arctan(s) along a unitary path, plus a mask of the
    samples where the chart exists with all |mu_i| < 10.

    Uses the spectral identity: eigenphases of Cay(s) are -2 arctan(mu_i),
    so -2 tr arctan(s) is the sum of the principal eigenphases of u.
    """
    phases = np.angle(np.linalg.eigvals(us))
    keep = np.all(np.abs(phases) < 2.0 * np.arctan(10.0), axis=1)
    return np.sum(phases, axis=1), keep


def _check_route_agreement(tol: Tolerances, bound: float) -> PropertyReport:
    """Trace-formula route vs sigma-accumulation route on one trajectory."""
    worst = 0.0
    for name, lam in (("poschl_teller:2", -2.0), ("kdv7", 0.15)):
        field = get_model(name)
        grid = np.linspace(field.x_minus, field.x_plus, 4001)
        from .system import farfield_frame

        frame = farfield_frame(field.farfield_minus(lam), "unstable", tol)
        path = integrate_unitary(field, lam, grid, unitary_from_frame(frame), tol=tol)
        base, keep = theta_via_trace_formula(path.us)
        anchor = int(np.nonzero(keep)[0][0])
        offset = path.theta_trace.theta[anchor] - base[anchor]
        offset = round(offset / (2.0 * np.pi)) * 2.0 * np.pi
        # compare on the anchor's unbroken stretch: past a singular sample the
        # raw trace formula changes branch by 2 pi
        breaks = np.nonzero(~keep)[0]
        after = breaks[breaks > anchor]
        lim = int(after[0]) if after.size else path.us.shape[0]
        sel = slice(anchor, lim)
        diff = np.abs(path.theta_trace.theta[sel] - (base[sel] + offset))
        worst = max(worst, float(np.max(diff)))
    return PropertyReport("route_agreement", worst < bound, worst, bound,
                          "theta from -2 tr arctan(s) vs sigma accumulation, |mu| < 10 stretch")


SELFTEST_PROPERTIES = (
    "trace_formula",
    "unitarity_drift",
    "theorem1_equivalence",
    "backend_agreement",
    "route_agreement",
)

_BOUNDS = {
    "trace_formula": 1e-10,
    "unitarity_drift": 1e-9,
    "theorem1_equivalence": 0.5,  # failure count must be zero
    "backend_agreement": 0.5,
    "route_agreement": 1e-5,
}


def run_selftest(
    tol: Tolerances = DEFAULT_TOLERANCES,
    corrupt: str | None = None,
    seed: int = 20240611,
) -> list[PropertyReport]:
    """Run the invariant suite; returns one report per property."""
    if corrupt is not None and corrupt not in SELFTEST_PROPERTIES:
        raise ValueError(f"unknown property {corrupt!r}; choose from {SELFTEST_PROPERTIES}")
    bounds = dict(_BOUNDS)
    if corrupt is not None:
        bounds[corrupt] = bounds[corrupt] / 1e6
    rng = np.random.default_rng(seed)
    reports = [
        _check_trace_formula(tol, bounds["trace_formula"], rng),
        _check_unitarity_drift(tol, bounds["unitarity_drift"]),
        _check_theorem1(tol, bounds["theorem1_equivalence"], rng),
        _check_backend_agreement(tol, bounds["backend_agreement"]),
        _check_route_agreement(tol, bounds["route_agreement"]),
    ]
    return reports
