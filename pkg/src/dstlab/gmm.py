"""Three-component bivariate Gaussian mixture fit with plain EM.

The fit is deterministic: means start at caller-supplied anchor points,
covariances at 0.05 * I, mixing weights uniform. Convergence is judged on
the absolute change of the total log-likelihood summed over all points, so
the threshold scales with dataset size. Floors on mixing weights and on
covariance eigenvalues keep tight clusters from collapsing a component.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GmmFitError, InsufficientDataError, StructuralError

N_COMPONENTS = 3

SIGMA_FLOOR = 1e-6  # minimum covariance eigenvalue
PI_FLOOR = 1e-6  # minimum mixing weight
INIT_COV_SCALE = 0.05
DEFAULT_TOL = 20.0  # absolute change in total log-likelihood
DEFAULT_MAX_ITER = 100
MIN_POINTS = 6
_STARVATION = 1e-10  # below this soft count a component keeps its old shape

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class GmmModel:
    means: np.ndarray  # [3, 2]
    covariances: np.ndarray  # [3, 2, 2]
    weights: np.ndarray  # [3]
    iterations: int
    log_likelihood: float
    ll_trace: list[float] = field(default_factory=list)


def _validate_points(points: np.ndarray) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise StructuralError(f"points must be [N, 2], got {arr.shape}")
    if arr.shape[0] < MIN_POINTS:
        raise InsufficientDataError(
            f"need at least {MIN_POINTS} points to fit, got {arr.shape[0]}"
        )
    if not np.all(np.isfinite(arr)):
        raise GmmFitError("points contain non-finite values")
    return arr


def _validate_anchors(anchors: np.ndarray) -> np.ndarray:
    arr = np.asarray(anchors, dtype=np.float64)
    if arr.shape != (N_COMPONENTS, 2):
        raise StructuralError(f"anchors must be [3, 2], got {arr.shape}")
    for a in range(N_COMPONENTS):
        for b in range(a + 1, N_COMPONENTS):
            if np.array_equal(arr[a], arr[b]):
                raise StructuralError("anchors must be pairwise distinct")
    return arr


def _log_densities(
    points: np.ndarray, means: np.ndarray, covariances: np.ndarray
) -> np.ndarray:
    """Log density of every point under every component, via closed-form
    2x2 inverses. Shape [N, 3]."""
    out = np.empty((points.shape[0], N_COMPONENTS))
    for k in range(N_COMPONENTS):
        a, b = covariances[k, 0, 0], covariances[k, 0, 1]
        c, d = covariances[k, 1, 0], covariances[k, 1, 1]
        det = a * d - b * c
        if not np.isfinite(det) or det <= 0:
            raise GmmFitError(f"component {k} covariance is not positive definite")
        diff = points - means[k]
        quad = (
            d * diff[:, 0] ** 2
            - (b + c) * diff[:, 0] * diff[:, 1]
            + a * diff[:, 1] ** 2
        ) / det
        out[:, k] = -_LOG_2PI - 0.5 * np.log(det) - 0.5 * quad
    return out


def _e_step(
    points: np.ndarray,
    means: np.ndarray,
    covariances: np.ndarray,
    weights: np.ndarray,
) -> tuple[np.ndarray, float]:
    """Responsibilities and total log-likelihood, computed in log space."""
    log_joint = _log_densities(points, means, covariances) + np.log(weights)
    peak = log_joint.max(axis=1, keepdims=True)
    log_norm = peak[:, 0] + np.log(np.exp(log_joint - peak).sum(axis=1))
    resp = np.exp(log_joint - log_norm[:, None])
    total_ll = float(log_norm.sum())
    if not np.isfinite(total_ll) or not np.all(np.isfinite(resp)):
        raise GmmFitError("log-likelihood or responsibilities became non-finite")
    return resp, total_ll


def _floor_covariance(cov: np.ndarray) -> np.ndarray:
    cov = (cov + cov.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(cov)
    eigvals = np.maximum(eigvals, SIGMA_FLOOR)
    cov = eigvecs @ np.diag(eigvals) @ eigvecs.T
    return (cov + cov.T) / 2.0


def fit(
    points: np.ndarray,
    anchors: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> GmmModel:
    """EM fit of a 3-component mixture initialized at the anchor means.

    Stops when the total log-likelihood changes by less than `tol` between
    consecutive evaluations, or after `max_iter` M-steps. The trace records
    the log-likelihood of the parameters entering each iteration, ending
    with the log-likelihood of the returned parameters.
    """
    pts = _validate_points(points)
    means = _validate_anchors(anchors).copy()
    if tol < 0:
        raise StructuralError(f"tol must be >= 0, got {tol}")
    if max_iter < 1:
        raise StructuralError(f"max_iter must be >= 1, got {max_iter}")

    n = pts.shape[0]
    covariances = np.tile(INIT_COV_SCALE * np.eye(2), (N_COMPONENTS, 1, 1))
    weights = np.full(N_COMPONENTS, 1.0 / N_COMPONENTS)
    trace: list[float] = []

    for m_steps in range(max_iter):
        resp, total_ll = _e_step(pts, means, covariances, weights)
        trace.append(total_ll)
        if m_steps >= 1 and abs(trace[-1] - trace[-2]) < tol:
            return GmmModel(
                means=means,
                covariances=covariances,
                weights=weights,
                iterations=m_steps,
                log_likelihood=total_ll,
                ll_trace=trace,
            )
        soft_counts = resp.sum(axis=0)
        weights = np.maximum(soft_counts / n, PI_FLOOR)
        weights = weights / weights.sum()
        for k in range(N_COMPONENTS):
            if soft_counts[k] < _STARVATION:
                # Starved component: keep its previous shape, only the
                # (floored) weight reflects the empty assignment.
                covariances[k] = _floor_covariance(covariances[k])
                continue
            mean_k = resp[:, k] @ pts / soft_counts[k]
            diff = pts - mean_k
            cov_k = (resp[:, k] * diff.T) @ diff / soft_counts[k]
            means[k] = mean_k
            covariances[k] = _floor_covariance(cov_k)

    _, final_ll = _e_step(pts, means, covariances, weights)
    trace.append(final_ll)
    return GmmModel(
        means=means,
        covariances=covariances,
        weights=weights,
        iterations=max_iter,
        log_likelihood=final_ll,
        ll_trace=trace,
    )


def posteriors(model: GmmModel, points: np.ndarray) -> np.ndarray:
    """Responsibilities for a batch of points, rows summing to 1. [N, 3]."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise StructuralError(f"points must be [N, 2], got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GmmFitError("posterior requires finite points")
    resp, _ = _e_step(arr, model.means, model.covariances, model.weights)
    return resp


def posterior(model: GmmModel, point: np.ndarray) -> np.ndarray:
    """Responsibilities of a single 2-D point. [3]."""
    arr = np.asarray(point, dtype=np.float64)
    if arr.shape != (2,):
        raise StructuralError(f"point must be shape (2,), got {arr.shape}")
    return posteriors(model, arr[None, :])[0]


def model_to_dict(model: GmmModel) -> dict:
    """JSON-friendly dump: means, covariances, weights, iterations, final LL."""
    return {
        "means": model.means.tolist(),
        "covariances": model.covariances.tolist(),
        "weights": model.weights.tolist(),
        "iterations": model.iterations,
        "log_likelihood": model.log_likelihood,
    }
