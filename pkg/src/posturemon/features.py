"""PCA-based ranking of sensor attributes.

Pipeline: centre every attribute on its mean, form the sample covariance
(n-1 denominator), eigendecompose it with cyclic Jacobi rotations, and turn
the eigenvalues into explained-variance fractions.

Attribute score: each attribute's absolute loading on a component, weighted
by that component's explained variance and summed over the leading ``top_k``
components::

    score(a) = sum_{c < top_k} explained_variance[c] * |loading[a, c]|

Absolute loadings make the ranking independent of eigenvector sign.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    AllZeroVariance,
    BadFieldCount,
    EmptyMatrix,
    NoConvergence,
    NotSymmetric,
    OutOfRange,
    TooFewRows,
)
from .orientation import sensor_normals
from .sensor_models import Trace

MAX_SWEEPS = 100
# Ties in score are compared at this many decimals, then broken by column order.
SCORE_DECIMALS = 12


@dataclass(frozen=True)
class FeatureMatrix:
    attribute_names: tuple[str, ...]
    rows: np.ndarray

    def __post_init__(self):
        names = tuple(self.attribute_names)
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim == 1 and len(names) and rows.size == 0:
            rows = rows.reshape(0, len(names))
        if rows.ndim != 2 or rows.shape[1] != len(names):
            raise BadFieldCount(
                f"rows have shape {rows.shape}, expected width {len(names)}"
            )
        object.__setattr__(self, "attribute_names", names)
        object.__setattr__(self, "rows", rows)


@dataclass(frozen=True)
class PcaResult:
    attribute_names: tuple[str, ...]
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns are components, rows follow attribute_names
    explained_variance: np.ndarray


def mean_center(m: FeatureMatrix) -> FeatureMatrix:
    if m.rows.shape[0] == 0:
        raise EmptyMatrix("cannot centre a matrix with no rows")
    return FeatureMatrix(m.attribute_names, m.rows - m.rows.mean(axis=0))


def covariance(m: FeatureMatrix) -> np.ndarray:
    n = m.rows.shape[0]
    if n < 2:
        raise TooFewRows(f"covariance needs at least 2 rows, got {n}")
    x = mean_center(m).rows
    cov = x.T @ x / (n - 1)
    return (cov + cov.T) / 2.0


def _canonical_signs(vecs: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each column made positive
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def eigen_decompose(cov, tol: float = 1e-14) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns eigenvalues sorted descending and the matching orthonormal
    eigenvectors as columns.
    """
    a = np.array(cov, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if not np.all(np.isfinite(a)):
        raise NotSymmetric("matrix contains non-finite entries")
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-9:
        raise NotSymmetric("matrix is not symmetric")
    a = (a + a.T) / 2.0
    v = np.eye(n)
    # off-diagonal mass is judged against the (rotation-invariant) Frobenius norm
    scale = float(np.linalg.norm(a))

    for _ in range(MAX_SWEEPS):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise NoConvergence(f"Jacobi did not converge in {MAX_SWEEPS} sweeps")

    vals = np.diag(a).copy()
    order = np.argsort(-vals, kind="stable")
    return vals[order], _canonical_signs(v[:, order])


def explained_variance(eigenvalues) -> np.ndarray:
    lam = np.asarray(eigenvalues, dtype=float)
    if np.any(lam < -1e-9):
        raise OutOfRange("eigenvalues must be non-negative")
    lam = np.clip(lam, 0.0, None)
    total = lam.sum()
    if total <= 1e-15:
        raise AllZeroVariance("every attribute is constant")
    return lam / total


def pca(m: FeatureMatrix, standardize: bool = False) -> PcaResult:
    """Full PCA of a feature matrix; ``standardize`` uses the correlation matrix."""
    if standardize:
        sd = m.rows.std(axis=0, ddof=1) if m.rows.shape[0] > 1 else np.ones(m.rows.shape[1])
        sd[sd == 0] = 1.0
        m = FeatureMatrix(m.attribute_names, m.rows / sd)
    vals, vecs = eigen_decompose(covariance(m))
    vals = np.where((vals < 0) & (vals >= -1e-9), 0.0, vals)
    return PcaResult(m.attribute_names, vals, vecs, explained_variance(vals))


def rank_attributes(result: PcaResult, top_k: int | None = None) -> list[tuple[str, float]]:
    """Attributes by variance-weighted absolute loading, highest first."""
    k = len(result.eigenvalues) if top_k is None else top_k
    if not 1 <= k <= len(result.eigenvalues):
        raise OutOfRange(f"top_k must be in [1, {len(result.eigenvalues)}], got {top_k}")
    weights = result.explained_variance[:k]
    scores = np.abs(result.eigenvectors[:, :k]) @ weights
    keyed = sorted(
        range(len(scores)), key=lambda i: (-round(float(scores[i]), SCORE_DECIMALS), i)
    )
    return [(result.attribute_names[i], float(scores[i])) for i in keyed]


# Attribute columns extractable from a trace, named as in the attribute table.
TRACE_ATTRIBUTES = (
    "Ax", "Ay", "Az", "Gx", "Gy", "Gz",
    "mag1", "mag2", "mag3",
    "w", "x", "y", "z",
    "dcm1", "dcm2", "dcm3",
    "flex",
)  # fmt: skip


def trace_features(trace, attributes: Sequence[str] | None = None) -> FeatureMatrix:
    """Build a feature matrix from named trace channels.

    ``dcm1..dcm3`` are the components of the sensor normal (the DCM's third
    column); ``mag1..mag3`` are the magnetometer axes.
    """
    trace = Trace.from_samples(trace)
    names = tuple(attributes) if attributes else TRACE_ATTRIBUTES
    normals = sensor_normals(trace.quat) if len(trace) else np.zeros((0, 3))
    cols = {
        "Ax": trace.imu[:, 0], "Ay": trace.imu[:, 1], "Az": trace.imu[:, 2],
        "Gx": trace.imu[:, 3], "Gy": trace.imu[:, 4], "Gz": trace.imu[:, 5],
        "mag1": trace.imu[:, 6], "mag2": trace.imu[:, 7], "mag3": trace.imu[:, 8],
        "w": trace.quat[:, 0], "x": trace.quat[:, 1],
        "y": trace.quat[:, 2], "z": trace.quat[:, 3],
        "dcm1": normals[:, 0], "dcm2": normals[:, 1], "dcm3": normals[:, 2],
        "flex": trace.flex_ohms,
    }  # fmt: skip
    unknown = [a for a in names if a not in cols]
    if unknown:
        raise OutOfRange(f"unknown attributes {unknown}; choose from {list(cols)}")
    return FeatureMatrix(names, np.column_stack([cols[a] for a in names]))


def format_pca_table(result: PcaResult, ranking, top_k: int) -> str:
    """Aligned table: loadings on the leading components, then the ranking."""
    k = min(top_k, len(result.eigenvalues))
    width = max(len(a) for a in result.attribute_names + ("Attribute",))
    head = "  ".join(f"{'V' + str(c + 1):>9}" for c in range(k))
    lines = [f"{head}  {'Attribute':<{width}}"]
    for i, name in enumerate(result.attribute_names):
        vals = "  ".join(f"{result.eigenvectors[i, c]:>9.4f}" for c in range(k))
        lines.append(f"{vals}  {name:<{width}}")
    lines.append("")
    lines.append("  ".join(f"{result.explained_variance[c]:>9.4f}" for c in range(k))
                 + "  explained variance")
    lines.append("")
    lines.append(f"{'Rank':>4}  {'Attribute':<{width}}  Score")
    for r, (name, score) in enumerate(ranking, 1):
        lines.append(f"{r:>4}  {name:<{width}}  {score:.6f}")
    return "\n".join(lines)


def ranking_csv(ranking) -> str:
    return "rank,attribute,score\n" + "".join(
        f"{r},{name},{score:.9g}\n" for r, (name, score) in enumerate(ranking, 1)
    )
