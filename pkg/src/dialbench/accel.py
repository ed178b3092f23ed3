"""Hot numeric kernels: jit-compiled when numba is available.

Every kernel has a pure-numpy twin.  Which one backs the public name is
decided at import time: numba is used when it imports cleanly and the
environment variable DIALBENCH_NUMBA is not set to 0/false/no.  Both
variants stay importable for the benchmark script under benchmarks/.
"""

from __future__ import annotations

import os

import numpy as np


def _flag_enabled() -> bool:
    raw = os.environ.get("DIALBENCH_NUMBA", "1").strip().lower()
    return raw not in ("0", "false", "no", "off")


try:
    import numba as _nb

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _nb = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and _flag_enabled()


# -- pure numpy versions ----------------------------------------------------

def net2_forward_np(w1, b1, w2, b2, w3, b3, x):
    """Two rectifier layers and a linear head; returns (h1, h2, out)."""
    h1 = np.maximum(x @ w1 + b1, 0.0)
    h2 = np.maximum(h1 @ w2 + b2, 0.0)
    return h1, h2, h2 @ w3 + b3


def net2_backward_np(w2, w3, x, h1, h2, g_out):
    """Gradients for the forward pass above, given dL/dout."""
    g_w3 = h2.T @ g_out
    g_b3 = g_out.sum(axis=0)
    g_h2 = np.where(h2 > 0.0, g_out @ w3.T, 0.0)
    g_w2 = h1.T @ g_h2
    g_b2 = g_h2.sum(axis=0)
    g_h1 = np.where(h1 > 0.0, g_h2 @ w2.T, 0.0)
    g_w1 = x.T @ g_h1
    g_b1 = g_h1.sum(axis=0)
    return g_w1, g_b1, g_w2, g_b2, g_w3, g_b3


def adam_update_np(param, grad, m, v, lr, beta1, beta2, eps, t):
    """In-place Adam step on flat float64 views."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


# -- numba versions ---------------------------------------------------------

if HAS_NUMBA:

    @_nb.njit(cache=True)
    def net2_forward_nb(w1, b1, w2, b2, w3, b3, x):
        h1 = np.maximum(x @ w1 + b1, 0.0)
        h2 = np.maximum(h1 @ w2 + b2, 0.0)
        return h1, h2, h2 @ w3 + b3

    @_nb.njit(cache=True)
    def net2_backward_nb(w2, w3, x, h1, h2, g_out):
        g_w3 = h2.T @ g_out
        g_b3 = g_out.sum(axis=0)
        g_h2 = g_out @ w3.T
        g_h2 = np.where(h2 > 0.0, g_h2, 0.0)
        g_w2 = h1.T @ g_h2
        g_b2 = g_h2.sum(axis=0)
        g_h1 = g_h2 @ w2.T
        g_h1 = np.where(h1 > 0.0, g_h1, 0.0)
        g_w1 = x.T @ g_h1
        g_b1 = g_h1.sum(axis=0)
        return g_w1, g_b1, g_w2, g_b2, g_w3, g_b3

    @_nb.njit(cache=True)
    def adam_update_nb(param, grad, m, v, lr, beta1, beta2, eps, t):
        c1 = 1.0 - beta1**t
        c2 = 1.0 - beta2**t
        for i in range(param.shape[0]):
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i]
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i]
            param[i] -= lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + eps)

else:  # pragma: no cover
    net2_forward_nb = None
    net2_backward_nb = None
    adam_update_nb = None


if USE_NUMBA:
    net2_forward = net2_forward_nb
    net2_backward = net2_backward_nb
    adam_update = adam_update_nb
else:
    net2_forward = net2_forward_np
    net2_backward = net2_backward_np
    adam_update = adam_update_np
