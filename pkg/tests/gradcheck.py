"""Central finite-difference oracle shared by the gradient tests."""

from __future__ import annotations

import numpy as np

H = 1e-5
# Relative error with a floor: differences below floor*tol are finite-difference
# noise, not gradient bugs.
FLOOR = 1e-4


def numeric_grad(f, arr: np.ndarray, h: float = H) -> np.ndarray:
    """Central differences of scalar-valued f with respect to arr, in place."""
    g = np.zeros_like(arr)
    flat, gflat = arr.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return g


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray, floor: float = FLOOR) -> float:
    denom = np.maximum(floor, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float(np.max(np.abs(analytic - numeric) / denom))


def model_grad_errors(model, batch) -> dict[str, float]:
    """Max relative error per named parameter of the full training loss."""
    _, grads, _ = model.loss_and_grads(batch)

    def loss_only():
        loss, _, _ = model.loss_and_grads(batch, want_grads=False)
        return loss

    errors = {}
    for name, value in model.params.values.items():
        numeric = numeric_grad(loss_only, value)
        errors[name] = max_rel_err(grads[name], numeric)
    return errors
