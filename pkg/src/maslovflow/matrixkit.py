"""Dense matrix kernels: symmetric eigendecomposition, matrix exponential,
principal matrix functions, and determinant phase.

All other modules build on these four operations.  Inputs are plain numpy
arrays; validated wrapper types live with the modules that own them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StructureError
from .tolerances import DEFAULT_TOLERANCES, Tolerances

__all__ = [
    "EigenDecomposition",
    "symmetrize",
    "as_real_symmetric",
    "sym_eig",
    "mat_exp",
    "sym_arctan",
    "det_phase",
]


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Return the exactly symmetric part (m + m^T)/2."""
    return 0.5 * (m + m.T)


def as_real_symmetric(m: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Validate and symmetrize a real square matrix.

    Rejects non-finite input and asymmetry defects beyond ``tol`` relative to
    the matrix scale; the returned array is exactly symmetric.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise StructureError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise StructureError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(m))))
    defect = float(np.max(np.abs(m - m.T)))
    if defect > tol * scale:
        raise StructureError(f"matrix not symmetric: defect {defect:.3e} > {tol * scale:.3e}")
    return symmetrize(m)


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigendecomposition of a real symmetric matrix.

    ``eigenvalues`` are ascending; ``eigenvectors`` has orthonormal columns so
    that ``M = V diag(w) V^T``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def sym_eig(m: np.ndarray, tol: Tolerances = DEFAULT_TOLERANCES) -> EigenDecomposition:
    """Eigendecomposition of a real symmetric matrix (ascending eigenvalues).

    Uses the LAPACK symmetric solver (tridiagonalization + implicit QL/QR).
    The result is checked against the orthonormality and reconstruction
    tolerances before it is returned.
    """
    m = as_real_symmetric(m)
    w, v = np.linalg.eigh(m)
    n = m.shape[0]
    orth = float(np.max(np.abs(v.T @ v - np.eye(n))))
    if orth > tol.eig_orthonormality:
        raise StructureError(f"eigenvector basis not orthonormal: {orth:.3e}")
    scale = max(float(np.max(np.abs(m))), 1e-300)
    recon = float(np.max(np.abs(m - (v * w) @ v.T)))
    if recon > tol.eig_reconstruction * scale:
        raise StructureError(f"eigendecomposition reconstruction defect {recon:.3e}")
    return EigenDecomposition(eigenvalues=w, eigenvectors=v)


# Pade coefficients and 1-norm bounds theta_m for the scaling-and-squaring
# matrix exponential; the pairing (m, theta_m) guarantees a backward error
# below unit roundoff in double precision (exp(A + dA) computed exactly with
# ||dA|| <= u ||A||).
_PADE_B = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
         960960.0, 16380.0, 182.0, 1.0),
}
_THETA = {3: 1.495585217958292e-2, 5: 2.539398330063230e-1,
          7: 9.504178996162932e-1, 9: 2.097847961257068e0,
          13: 5.371920351148152e0}


def _pade_factors(a: np.ndarray, degree: int) -> tuple[np.ndarray, np.ndarray]:
    b = _PADE_B[degree]
    n = a.shape[0]
    eye = np.eye(n, dtype=a.dtype)
    a2 = a @ a
    if degree == 3:
        u = a @ (b[3] * a2 + b[1] * eye)
        v = b[2] * a2 + b[0] * eye
        return u, v
    a4 = a2 @ a2
    if degree == 5:
        u = a @ (b[5] * a4 + b[3] * a2 + b[1] * eye)
        v = b[4] * a4 + b[2] * a2 + b[0] * eye
        return u, v
    a6 = a4 @ a2
    if degree == 7:
        u = a @ (b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye)
        v = b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye
        return u, v
    if degree == 9:
        a8 = a6 @ a2
        u = a @ (b[9] * a8 + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye)
        v = b[8] * a8 + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye
        return u, v
    # degree 13
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye)
    return u, v


def mat_exp(m: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with diagonal Pade.

    The Pade degree is chosen from the 1-norm against the standard
    backward-error bound table (degrees 3/5/7/9/13); larger norms are scaled
    by 2^-s with s from ``||m||_1 / theta_13`` and squared back.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise StructureError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise StructureError("matrix has non-finite entries")
    dtype = complex if np.iscomplexobj(m) else float
    a = m.astype(dtype, copy=True)
    norm = float(np.linalg.norm(a, 1)) if a.size else 0.0
    for degree in (3, 5, 7, 9):
        if norm <= _THETA[degree]:
            u, v = _pade_factors(a, degree)
            return np.linalg.solve(v - u, v + u)
    squarings = max(0, int(np.ceil(np.log2(norm / _THETA[13]))))
    a = a / (2.0 ** squarings)
    u, v = _pade_factors(a, 13)
    r = np.linalg.solve(v - u, v + u)
    for _ in range(squarings):
        r = r @ r
    return r


def sym_arctan(s: np.ndarray, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Principal arctan of a real symmetric matrix, V arctan(L) V^T.

    The spectrum of the result lies in (-pi/2, pi/2).
    """
    dec = sym_eig(s, tol)
    v = dec.eigenvectors
    return symmetrize((v * np.arctan(dec.eigenvalues)) @ v.T)


def det_phase(u: np.ndarray, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Principal argument of det(u) for a unitary matrix, in (-pi, pi].

    Computed from the sign factor of an LU-based log-determinant (sum of
    arguments of the triangular diagonal), which cannot overflow.
    """
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise StructureError(f"expected a square matrix, got shape {u.shape}")
    if not np.all(np.isfinite(u)):
        raise StructureError("matrix has non-finite entries")
    defect = float(np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0]))))
    if defect > tol.unitary_check:
        raise StructureError(f"matrix not unitary: defect {defect:.3e}")
    sign, _ = np.linalg.slogdet(u.astype(complex))
    return float(np.angle(sign))
