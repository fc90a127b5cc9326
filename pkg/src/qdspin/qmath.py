"""Small dense complex linear algebra.

Operators and states are plain numpy arrays (``complex128``). Everything here
targets dimensions up to 16: the four-level system and its vectorized state.
"""

from __future__ import annotations

import numpy as np

MAX_DIM = 16


class NotHermitianError(ValueError):
    pass


class DegenerateFitError(ValueError):
    """Raised by :func:`lstsq` for a rank-deficient design matrix.

    ``null_direction`` holds a unit vector spanning (approximately) the null
    space of the design.
    """

    def __init__(self, message, null_direction=None):
        super().__init__(message)
        self.null_direction = null_direction


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] > MAX_DIM:
        raise ValueError(f"dimension {a.shape[0]} exceeds {MAX_DIM}")
    return a


def as_ket(v) -> np.ndarray:
    a = np.asarray(v, dtype=np.complex128)
    if a.ndim != 1 or a.size < 1:
        raise ValueError(f"expected a 1-d vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("ket has non-finite amplitudes")
    return a


def basis(dim: int, k: int) -> np.ndarray:
    v = np.zeros(dim, dtype=np.complex128)
    v[k] = 1.0
    return v


def ket_norm(v) -> float:
    return float(np.sqrt(np.sum(np.abs(v) ** 2)))


def normalize(v) -> np.ndarray:
    v = as_ket(v)
    n = ket_norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return v / n


def projector(dim: int, i: int, j: int | None = None) -> np.ndarray:
    """|i><j| (0-based); |i><i| when ``j`` is omitted."""
    m = np.zeros((dim, dim), dtype=np.complex128)
    m[i, i if j is None else j] = 1.0
    return m


def dag(m) -> np.ndarray:
    return np.conj(np.transpose(m))


def hermiticity_defect(m) -> float:
    m = np.asarray(m)
    return float(np.max(np.abs(m - dag(m))))


def is_hermitian(m, tol: float = 0.0) -> bool:
    return hermiticity_defect(m) <= tol


def herm_eigen(m, tol: float = 1e-10, max_sweeps: int = 64):
    """Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi.

    Returns ``(eigenvalues, vectors)`` with eigenvalues ascending and the
    eigenvectors as the columns of ``vectors``.
    """
    a = as_matrix(m)
    scale = max(1.0, float(np.max(np.abs(a))))
    if hermiticity_defect(a) > tol * scale:
        raise NotHermitianError(
            f"not Hermitian: max |m - m^H| = {hermiticity_defect(a):.3e}")
    a = 0.5 * (a + dag(a))
    n = a.shape[0]
    v = np.eye(n, dtype=np.complex128)
    if n == 1:
        return np.array([a[0, 0].real]), v

    norm = float(np.linalg.norm(a))
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= 1e-15 * max(norm, 1e-300):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                # Reduce the (p, q) block to a real symmetric one, then rotate.
                phase = apq / mag
                app = a[p, p].real
                aqq = a[q, q].real
                theta = 0.5 * np.arctan2(2.0 * mag, aqq - app)
                c = np.cos(theta)
                s = np.sin(theta)
                # Unitary acting on columns p, q.
                g = np.eye(n, dtype=np.complex128)
                g[p, p] = c
                g[q, q] = c
                g[p, q] = s * phase
                g[q, p] = -s * np.conj(phase)
                a = dag(g) @ a @ g
                v = v @ g
                a[p, q] = 0.0
                a[q, p] = 0.0
    else:
        raise ArithmeticError("Jacobi sweeps did not converge")

    w = np.real(np.diag(a)).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


# Pade [13/13] coefficients and theta_13 bound (Higham 2005).
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


def expm(m) -> np.ndarray:
    """Matrix exponential by scaling and squaring around a [13/13] Pade core."""
    a = as_matrix(m)
    if not np.all(np.isfinite(a)):
        raise ValueError("expm: non-finite entries")
    n = a.shape[0]
    ident = np.eye(n, dtype=np.complex128)
    norm1 = float(np.max(np.sum(np.abs(a), axis=0)))
    if norm1 == 0.0:
        return ident
    s = max(0, int(np.ceil(np.log2(norm1 / _THETA13))))
    a = a / (2.0 ** s)

    b = _PADE13
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a2 @ a4
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


def lstsq(design, observations):
    """Linear least squares via Householder QR.

    Returns ``(coefficients, residual_norm)``. A design whose smallest
    singular value is below ``1e-12`` times the largest is rejected with
    :class:`DegenerateFitError`.
    """
    x = np.asarray(design, dtype=np.float64)
    y = np.asarray(observations, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: design {x.shape}, observations {y.shape}")
    n, p = x.shape
    if n < p:
        raise DegenerateFitError(f"degenerate fit: {n} observations for {p} parameters")

    # Column scaling keeps the conditioning test meaningful for mixed units.
    scale = np.linalg.norm(x, axis=0)
    if np.any(scale == 0.0):
        k = int(np.flatnonzero(scale == 0.0)[0])
        null = np.zeros(p)
        null[k] = 1.0
        raise DegenerateFitError(f"degenerate fit: column {k} is zero", null)
    xs = x / scale

    sv = np.linalg.svd(xs, compute_uv=False)
    cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
    if not np.isfinite(cond) or cond > 1e12:
        _, _, vt = np.linalg.svd(xs)
        null = vt[-1] / scale
        null /= np.linalg.norm(null)
        raise DegenerateFitError(
            f"degenerate fit (condition {cond:.3e}); null direction "
            + np.array2string(null, precision=4), null)

    q, r = np.linalg.qr(xs, mode="reduced")
    coef = np.linalg.solve(r, q.T @ y) / scale
    resid = float(np.linalg.norm(x @ coef - y))
    return coef, resid


def condition_number(design) -> float:
    x = np.asarray(design, dtype=np.float64)
    scale = np.linalg.norm(x, axis=0)
    sv = np.linalg.svd(x / np.where(scale == 0.0, 1.0, scale), compute_uv=False)
    return float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
