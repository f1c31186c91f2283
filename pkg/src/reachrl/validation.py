"""Input validation helpers.

Small check_* utilities in the spirit of sklearn's validation module,
specialised to the array shapes this package passes around (state and
action batches, finite scalars). They normalise inputs to float64
ndarrays and raise ValueError with the offending argument named.
"""

from __future__ import annotations

import numpy as np


def check_states(X, state_dim: int, name: str = "X") -> np.ndarray:
    """Coerce to a (n, state_dim) float64 array of finite values.

    A single state vector of shape (state_dim,) is promoted to a
    one-row batch.
    """
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != state_dim:
        raise ValueError(
            f"{name}: expected shape (n, {state_dim}), got {np.shape(X)}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: contains non-finite entries")
    return arr


def check_state(s, state_dim: int, name: str = "s") -> np.ndarray:
    """Coerce to a single finite state vector of length state_dim."""
    arr = np.asarray(s, dtype=np.float64).ravel()
    if arr.shape != (state_dim,):
        raise ValueError(
            f"{name}: expected length {state_dim}, got shape {np.shape(s)}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: contains non-finite entries")
    return arr


def check_action(a, action_dim: int, name: str = "a") -> np.ndarray:
    """Coerce to a single action vector of length action_dim (finiteness
    is not required here: callers clamp to bounds first)."""
    arr = np.asarray(a, dtype=np.float64).ravel()
    if arr.shape != (action_dim,):
        raise ValueError(
            f"{name}: expected length {action_dim}, got shape {np.shape(a)}"
        )
    return arr


def check_positive(value, name: str) -> float:
    v = float(value)
    if not np.isfinite(v) or v <= 0:
        raise ValueError(f"{name}: must be a positive finite number, got {value!r}")
    return v


def check_in_open_unit(value, name: str) -> float:
    v = float(value)
    if not (0.0 < v < 1.0):
        raise ValueError(f"{name}: must lie in (0, 1), got {value!r}")
    return v


def check_fitted(estimator, attribute: str) -> None:
    if not hasattr(estimator, attribute):
        raise RuntimeError(
            f"{type(estimator).__name__} is not fitted yet; call fit() first"
        )
