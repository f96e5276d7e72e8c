"""Sample covariance matrices and a deterministic symmetric eigensolver.

``eigen`` uses cyclic Jacobi rotations with a fixed (p, q) sweep order, so
identical input gives bit-identical output. It is meant for p up to a few
hundred.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DegenerateRowError
from .panel import Panel
from .volatility_field import GammaSet

JACOBI_TOL = 1e-12
MAX_SWEEPS = 100


def sample_cov(panel: Panel | np.ndarray, center: bool = False) -> np.ndarray:
    """S[i, j] = sum_t X[i, t] X[j, t], each entry summed exactly via fsum.

    With ``center=True`` each row has its sample mean removed first.
    """
    x = panel.values if isinstance(panel, Panel) else np.asarray(panel, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] == 0:
        raise ContractError(f"sample_cov needs a non-empty p x n panel, got shape {x.shape}")
    if center:
        x = x - np.array([math.fsum(r) / x.shape[1] for r in x.tolist()])[:, None]
    p = x.shape[0]
    s = np.empty((p, p))
    for i in range(p):
        for j in range(i, p):
            s[i, j] = s[j, i] = math.fsum((x[i] * x[j]).tolist())
    return s


def frobenius_norm(a: np.ndarray) -> float:
    return math.sqrt(math.fsum((np.asarray(a, dtype=float) ** 2).ravel().tolist()))


def _check_symmetric(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ContractError("matrix has non-finite entries")
    tol = 1e-12 * max(1.0, frobenius_norm(a))
    if np.max(np.abs(a - a.T), initial=0.0) > tol:
        raise ContractError("matrix is not symmetric")
    return a


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return frobenius_norm(off)


def jacobi_eigh(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unsorted eigenvalues and eigenvectors (columns) by cyclic Jacobi."""
    a = _check_symmetric(a).copy()
    a = 0.5 * (a + a.T)
    p = a.shape[0]
    v = np.eye(p)
    scale = frobenius_norm(a)
    if scale == 0.0:
        return np.zeros(p), v
    for _ in range(MAX_SWEEPS):
        if _off_norm(a) < JACOBI_TOL * scale:
            break
        for q in range(1, p):
            for r in range(q):
                apq = a[r, q]
                if apq == 0.0:
                    continue
                tau = (a[q, q] - a[r, r]) / (2.0 * apq)
                if tau == 0.0:
                    t = 1.0
                else:
                    t = math.copysign(1.0, tau) / (abs(tau) + math.hypot(1.0, tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                col_r = a[:, r].copy()
                col_q = a[:, q].copy()
                a[:, r] = c * col_r - s * col_q
                a[:, q] = s * col_r + c * col_q
                row_r = a[r, :].copy()
                row_q = a[q, :].copy()
                a[r, :] = c * row_r - s * row_q
                a[q, :] = s * row_r + c * row_q
                a[r, q] = a[q, r] = 0.0
                vr = v[:, r].copy()
                vq = v[:, q].copy()
                v[:, r] = c * vr - s * vq
                v[:, q] = s * vr + c * vq
    else:
        if _off_norm(a) >= JACOBI_TOL * scale:
            raise ContractError("Jacobi iteration did not converge")
    return np.diag(a).copy(), v


@dataclass(frozen=True)
class Localization:
    max_abs: float
    nearest_basis_distance: float
    participation_ratio: float
    argmax: int
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "max_abs_component": self.max_abs,
            "nearest_basis_distance": self.nearest_basis_distance,
            "participation_ratio": self.participation_ratio,
            "argmax": self.argmax,
            "degenerate": self.degenerate,
        }


def localization(vec: np.ndarray, degenerate: bool = False) -> Localization:
    """Distance of a unit vector from the nearest signed basis vector, and its spread."""
    v = np.asarray(vec, dtype=float)
    av = np.abs(v)
    m = float(av.max())
    k = int(np.argmax(av))
    dist = math.sqrt(max(0.0, 2.0 - 2.0 * m))
    pr = 1.0 / float(np.sum(v**4))
    return Localization(min(m, 1.0), dist, pr, k, degenerate)


@dataclass(frozen=True)
class EigenReport:
    eigenvalues: np.ndarray
    vectors: np.ndarray
    spacings: np.ndarray
    localization: tuple[Localization, ...]

    @property
    def p(self) -> int:
        return self.eigenvalues.size

    def top(self) -> Localization:
        return self.localization[0]

    def to_json(self) -> dict:
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "vectors": self.vectors.T.tolist(),
            "spacings": self.spacings.tolist(),
            "localization": [loc.to_dict() for loc in self.localization],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(
            ["rank", "eigenvalue", "spacing", "max_abs_component", "nearest_basis_distance",
             "participation_ratio", "degenerate"]
            + [f"v{i + 1}" for i in range(self.p)]
        )
        for r in range(self.p):
            loc = self.localization[r]
            spacing = repr(float(self.spacings[r])) if r < self.spacings.size else ""
            w.writerow(
                [r + 1, repr(float(self.eigenvalues[r])), spacing, repr(loc.max_abs),
                 repr(loc.nearest_basis_distance), repr(loc.participation_ratio), int(loc.degenerate)]
                + [repr(float(x)) for x in self.vectors[:, r]]
            )
        return buf.getvalue()


def eigen(s: np.ndarray) -> EigenReport:
    """Descending eigenvalues with sign-normalised eigenvectors.

    Ties keep the solver's column order. Each vector is flipped so its
    largest-magnitude entry (first one on ties) is positive. Vectors whose
    eigenvalue is repeated (relative gap <= 1e-10) are flagged degenerate,
    since any orthonormal basis of the eigenspace is a valid answer.
    """
    vals, vecs = jacobi_eigh(s)
    order = sorted(range(vals.size), key=lambda i: (-vals[i], i))
    vals = vals[order]
    vecs = vecs[:, order]
    for r in range(vals.size):
        k = int(np.argmax(np.abs(vecs[:, r])))
        if vecs[k, r] < 0:
            vecs[:, r] = -vecs[:, r]
    scale = max(float(np.max(np.abs(vals), initial=0.0)), 1e-300)
    gaps = -np.diff(vals)
    locs = []
    for r in range(vals.size):
        near = (r > 0 and gaps[r - 1] <= 1e-10 * scale) or (r < gaps.size and gaps[r] <= 1e-10 * scale)
        locs.append(localization(vecs[:, r], bool(near) and vals.size > 1))
    vals.setflags(write=False)
    vecs.setflags(write=False)
    return EigenReport(vals, vecs, gaps, tuple(locs))


def spectral_norm(a: np.ndarray) -> float:
    vals, _ = jacobi_eigh(a)
    return float(np.max(np.abs(vals), initial=0.0))


def masked(s: np.ndarray, mask) -> np.ndarray:
    """Keep the entries of S selected by ``mask`` ("diagonal", "all", a GammaSet or bool array)."""
    s = np.asarray(s, dtype=float)
    p = s.shape[0]
    if isinstance(mask, str):
        if mask == "diagonal":
            m = np.eye(p, dtype=bool)
        elif mask == "all":
            m = np.ones((p, p), dtype=bool)
        else:
            raise ContractError(f"unknown mask {mask!r}")
    elif isinstance(mask, GammaSet):
        if mask.p != p:
            raise ContractError(f"mask is for p={mask.p}, matrix has p={p}")
        m = mask.mask()
    else:
        m = np.asarray(mask, dtype=bool)
    return np.where(m, s, 0.0)


def diag_approx_error(s: np.ndarray, a_n: float, mask="diagonal") -> float:
    """a_n^-2 times the spectral norm of the entries of S outside the mask."""
    if not a_n > 0:
        raise ContractError("a_n must be positive")
    s = _check_symmetric(s)
    rest = s - masked(s, mask)
    return spectral_norm(rest) / (a_n * a_n)


@dataclass(frozen=True)
class SpectralStats:
    spacings: np.ndarray
    trace_ratios: np.ndarray | None
    centered_trace: float
    centered_log_det: float | None
    self_normalized: np.ndarray | None
    undefined: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        def lst(x):
            return None if x is None else [float(v) for v in x]

        return {
            "spacings": lst(self.spacings),
            "trace_ratios": lst(self.trace_ratios),
            "centered_trace": self.centered_trace,
            "centered_log_det": self.centered_log_det,
            "self_normalized": lst(self.self_normalized),
            "undefined": list(self.undefined),
        }


def spectral_stats(report: EigenReport, s: np.ndarray, c_n: float = 0.0, a_n: float = 1.0) -> SpectralStats:
    """Spacings, trace ratios and centred trace/determinant statistics.

    ``centered_log_det`` is sum_i log(a_n^-2 (lambda_i - c_n)); it is None
    when some centred eigenvalue is not positive. Ratios whose denominator
    vanishes are reported as None and listed in ``undefined``.
    """
    p = report.p
    tr = math.fsum(np.diag(s).tolist())
    undefined = []
    ratios = None
    if tr != 0.0:
        ratios = report.eigenvalues / tr
    else:
        undefined.append("trace_ratios")
    denom = tr - p * c_n
    self_norm = None
    if denom != 0.0:
        self_norm = (report.eigenvalues - c_n) / denom
    else:
        undefined.append("self_normalized")
    shifted = (report.eigenvalues - c_n) / (a_n * a_n)
    log_det = float(math.fsum(np.log(shifted).tolist())) if np.all(shifted > 0) else None
    if log_det is None:
        undefined.append("centered_log_det")
    return SpectralStats(
        spacings=report.spacings.copy(),
        trace_ratios=ratios,
        centered_trace=denom / (a_n * a_n),
        centered_log_det=log_det,
        self_normalized=self_norm,
        undefined=tuple(undefined),
    )


def correlation_matrix(panel: Panel | np.ndarray) -> tuple[np.ndarray, EigenReport]:
    """Sample correlation matrix (rows centred and scaled to unit length) and its spectrum."""
    x = panel.values if isinstance(panel, Panel) else np.asarray(panel, dtype=float)
    n = x.shape[1]
    xc = x - np.array([math.fsum(r) / n for r in x.tolist()])[:, None]
    norms = []
    for i, r in enumerate(xc.tolist()):
        ss = math.fsum(v * v for v in r)
        if ss == 0.0:
            raise DegenerateRowError(f"row {i + 1} is constant; correlation undefined", row=i + 1)
        norms.append(math.sqrt(ss))
    r = sample_cov(xc / np.array(norms)[:, None])
    np.fill_diagonal(r, 1.0)
    np.clip(r, -1.0, 1.0, out=r)
    return r, eigen(r)
