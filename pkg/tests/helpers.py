"""Shared oracles that do not depend on the package under test."""

import numpy as np


def butter_bandpass_gain(f, low, high, order, fs):
    """|H(f)| of a digital Butterworth band-pass designed by the bilinear
    transform with prewarped edges (closed form of the analog prototype)."""
    warp = lambda x: 2 * fs * np.tan(np.pi * np.asarray(x, dtype=float) / fs)
    w, w1, w2 = warp(f), warp(low), warp(high)
    w0sq, bw = w1 * w2, w2 - w1
    with np.errstate(divide="ignore"):
        x = (w**2 - w0sq) / (bw * w)
    return 1.0 / np.sqrt(1.0 + x ** (2 * order))


def qr_rank(a, tol=1e-9):
    """Numerical rank from the diagonal of a column-pivoted QR (independent of SVD)."""
    from scipy.linalg import qr

    _, r, _ = qr(np.asarray(a, dtype=float), pivoting=True, mode="economic")
    d = np.abs(np.diag(r))
    return int(np.sum(d > tol * max(d[0], 1e-300))) if d.size else 0
