"""Hot numeric kernels: GRU sequence forward/backward and the exact t-SNE
inner loops.

Every kernel exists in one source form written with explicit loops. By
default the loops are JIT-compiled with numba; setting the environment
variable ``RETAINEX_BACKEND=numpy`` (read at import time) selects the pure
NumPy/Python fallback instead, which computes the same values more slowly.
``RETAINEX_BACKEND=numba`` insists on numba and fails loudly if it is
missing. ``benchmarks/bench_kernels.py`` times the two paths against each
other.

GRU cell, per step t (sigma = logistic):

    z_t = sigma(Wz v_t + Uz h_{t-1} + bz)
    r_t = sigma(Wr v_t + Ur h_{t-1} + br)
    c_t = tanh(Wh v_t + Uh (r_t * h_{t-1}) + bh)
    h_t = (1 - z_t) * h_{t-1} + z_t * c_t

with h_0 = 0. The backward kernel runs the exact reverse-mode sweep of
those equations through the unrolled sequence.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "BACKEND",
    "gru_seq_forward",
    "gru_seq_backward",
    "binary_search_affinities",
    "tsne_forces",
    "PY_KERNELS",
]

_choice = os.environ.get("RETAINEX_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(f"RETAINEX_BACKEND must be auto|numba|numpy, got {_choice!r}")

if _choice == "numpy":
    _njit = None
else:
    try:
        from numba import njit as _njit
    except ImportError:
        if _choice == "numba":
            raise
        _njit = None

BACKEND = "numpy" if _njit is None else "numba"


def _sig(x):
    return 1.0 / (1.0 + np.exp(-x))


def _gru_seq_forward(V, Wz, Wr, Wh, Uz, Ur, Uh, bz, br, bh):
    """Run the GRU over V (T, d_in). Returns hidden states H (T, m) plus
    the per-step gate activations Z, R and candidates C needed by the
    backward sweep."""
    T = V.shape[0]
    m = Wz.shape[0]
    H = np.empty((T, m))
    Z = np.empty((T, m))
    R = np.empty((T, m))
    C = np.empty((T, m))
    h = np.zeros(m)
    for t in range(T):
        v = V[t]
        z = 1.0 / (1.0 + np.exp(-(Wz @ v + Uz @ h + bz)))
        r = 1.0 / (1.0 + np.exp(-(Wr @ v + Ur @ h + br)))
        c = np.tanh(Wh @ v + Uh @ (r * h) + bh)
        h = (1.0 - z) * h + z * c
        Z[t] = z
        R[t] = r
        C[t] = c
        H[t] = h
    return H, Z, R, C


def _gru_seq_backward(V, H, Z, R, C, dH, Wz, Wr, Wh, Uz, Ur, Uh):
    """Reverse-mode sweep through the unrolled GRU.

    dH (T, m) holds the loss gradient flowing into each hidden state from
    outside the recurrence. Returns (dV, dWz, dWr, dWh, dUz, dUr, dUh,
    dbz, dbr, dbh).
    """
    T, d_in = V.shape
    m = Wz.shape[0]
    dV = np.zeros((T, d_in))
    dWz = np.zeros((m, d_in))
    dWr = np.zeros((m, d_in))
    dWh = np.zeros((m, d_in))
    dUz = np.zeros((m, m))
    dUr = np.zeros((m, m))
    dUh = np.zeros((m, m))
    dbz = np.zeros(m)
    dbr = np.zeros(m)
    dbh = np.zeros(m)
    carry = np.zeros(m)
    for t in range(T - 1, -1, -1):
        if t == 0:
            h_prev = np.zeros(m)
        else:
            h_prev = H[t - 1]
        v = V[t]
        z = Z[t]
        r = R[t]
        c = C[t]
        d = dH[t] + carry
        dc = d * z
        dz = d * (c - h_prev)
        dh_prev = d * (1.0 - z)
        dah = dc * (1.0 - c * c)
        dWh += np.outer(dah, v)
        dUh += np.outer(dah, r * h_prev)
        dbh += dah
        dv = Wh.T @ dah
        drh = Uh.T @ dah
        dr = drh * h_prev
        dh_prev += drh * r
        daz = dz * z * (1.0 - z)
        dWz += np.outer(daz, v)
        dUz += np.outer(daz, h_prev)
        dbz += daz
        dv += Wz.T @ daz
        dh_prev += Uz.T @ daz
        dar = dr * r * (1.0 - r)
        dWr += np.outer(dar, v)
        dUr += np.outer(dar, h_prev)
        dbr += dar
        dv += Wr.T @ dar
        dh_prev += Ur.T @ dar
        dV[t] = dv
        carry = dh_prev
    return dV, dWz, dWr, dWh, dUz, dUr, dUh, dbz, dbr, dbh


def _binary_search_affinities(D2, target_entropy, tol, max_iter):
    """Per-row Gaussian bandwidths for squared distances D2 (N, N), found
    by binary search on the precision so that the conditional-distribution
    entropy (nats) matches target_entropy within tol. Returns the row-
    normalized conditional P with zero diagonal."""
    n = D2.shape[0]
    P = np.zeros((n, n))
    for i in range(n):
        beta = 1.0
        beta_min = -np.inf
        beta_max = np.inf
        for _ in range(max_iter):
            s = 0.0
            for j in range(n):
                if j != i:
                    pij = np.exp(-D2[i, j] * beta)
                    P[i, j] = pij
                    s += pij
            if s <= 0.0:
                s = 1e-300
            sd = 0.0
            for j in range(n):
                if j != i:
                    P[i, j] /= s
                    sd += D2[i, j] * P[i, j]
            entropy = np.log(s) + beta * sd
            diff = entropy - target_entropy
            if abs(diff) <= tol:
                break
            if diff > 0.0:
                beta_min = beta
                beta = beta * 2.0 if beta_max == np.inf else 0.5 * (beta + beta_max)
            else:
                beta_max = beta
                beta = beta * 0.5 if beta_min == -np.inf else 0.5 * (beta + beta_min)
    return P


def _tsne_forces(P, Y, compute_error):
    """Gradient of the KL objective for the Student-t embedding Y (N, 2)
    against joint probabilities P (N, N). Returns (grad, kl); kl is NaN
    unless compute_error."""
    n = Y.shape[0]
    num = np.zeros((n, n))
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            dx = Y[i, 0] - Y[j, 0]
            dy = Y[i, 1] - Y[j, 1]
            w = 1.0 / (1.0 + dx * dx + dy * dy)
            num[i, j] = w
            num[j, i] = w
            total += 2.0 * w
    if total <= 0.0:
        total = 1e-300
    grad = np.zeros((n, 2))
    kl = 0.0
    for i in range(n):
        gx = 0.0
        gy = 0.0
        for j in range(n):
            if j == i:
                continue
            w = num[i, j]
            q = w / total
            if q < 1e-300:
                q = 1e-300
            coef = 4.0 * (P[i, j] - q) * w
            gx += coef * (Y[i, 0] - Y[j, 0])
            gy += coef * (Y[i, 1] - Y[j, 1])
            if compute_error and P[i, j] > 1e-300:
                kl += P[i, j] * np.log(P[i, j] / q)
        grad[i, 0] = gx
        grad[i, 1] = gy
    if not compute_error:
        kl = np.nan
    return grad, kl


# Untouched Python/NumPy versions, importable for benchmarking either path.
PY_KERNELS = {
    "gru_seq_forward": _gru_seq_forward,
    "gru_seq_backward": _gru_seq_backward,
    "binary_search_affinities": _binary_search_affinities,
    "tsne_forces": _tsne_forces,
}

if _njit is None:
    gru_seq_forward = _gru_seq_forward
    gru_seq_backward = _gru_seq_backward
    binary_search_affinities = _binary_search_affinities
    tsne_forces = _tsne_forces
else:
    gru_seq_forward = _njit(cache=True)(_gru_seq_forward)
    gru_seq_backward = _njit(cache=True)(_gru_seq_backward)
    binary_search_affinities = _njit(cache=True)(_binary_search_affinities)
    tsne_forces = _njit(cache=True)(_tsne_forces)
