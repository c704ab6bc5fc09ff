"""Central finite-difference oracle used by the gradient tests.

Independent of the tape: it re-runs the forward computation with perturbed
inputs and never inspects analytic gradients.
"""

import numpy as np

H = 1e-5


def numeric_grad(loss_fn, x: np.ndarray, h: float = H) -> np.ndarray:
    """Central differences of loss_fn() with respect to the array x.

    loss_fn must recompute the scalar loss from the current contents of x
    (mutated in place around each evaluation).
    """
    grad = np.zeros_like(x)
    flat = x.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = loss_fn()
        flat[i] = orig - h
        down = loss_fn()
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * h)
    return grad


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(1.0, np.abs(analytic).max(), np.abs(numeric).max())
    return float(np.abs(analytic - numeric).max() / scale)


def assert_grad_close(analytic, numeric, tol=1e-4, what=""):
    err = rel_error(analytic, numeric)
    assert err < tol, f"gradient mismatch{' for ' + what if what else ''}: rel err {err:.3e}"
