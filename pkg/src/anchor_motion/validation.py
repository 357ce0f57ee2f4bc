"""Input validation helpers shared by the estimators and pipeline functions."""

import numpy as np

from .errors import ValidationError

SYMMETRY_ATOL = 1e-6


def check_distance_matrix(dist, *, atol: float = SYMMETRY_ATOL) -> np.ndarray:
    """Validate a precomputed pairwise distance matrix.

    Requires a finite square matrix, symmetric within ``atol``, with a zero
    diagonal within ``atol``.  Returns the matrix as float64.
    """
    dist = np.asarray(dist, dtype=np.float64)
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise ValidationError(f"distance matrix must be square, got shape {dist.shape}")
    if dist.shape[0] < 1:
        raise ValidationError("distance matrix must contain at least one element")
    if not np.isfinite(dist).all():
        raise ValidationError("distance matrix contains non-finite values")
    if not np.allclose(dist, dist.T, rtol=0.0, atol=atol):
        raise ValidationError(f"distance matrix is not symmetric within {atol}")
    if np.abs(np.diagonal(dist)).max() > atol:
        raise ValidationError(f"distance matrix diagonal is not zero within {atol}")
    return dist


def check_positions(positions) -> np.ndarray:
    """Coerce trajectory positions to an (N, 2) float64 array."""
    positions = np.asarray(positions, dtype=np.float64)
    if positions.ndim != 2 or positions.shape[1] != 2:
        raise ValidationError(f"positions must have shape (N, 2), got {positions.shape}")
    if not np.isfinite(positions).all():
        raise ValidationError("positions contain non-finite values")
    return positions


def check_token_stack(features, name: str = "token features") -> np.ndarray:
    """Coerce a stack of per-token feature matrices to (K, N, C) float64."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 3:
        raise ValidationError(f"{name} must have shape (K, N, C), got {features.shape}")
    if features.shape[0] < 1:
        raise ValidationError(f"{name} must contain at least one token")
    if not np.isfinite(features).all():
        raise ValidationError(f"{name} contain non-finite values")
    return features
