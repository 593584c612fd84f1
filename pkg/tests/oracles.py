"""Independent recomputations the tests freeze expected values against.

Everything here deliberately avoids the library's code paths: kernels are
rebuilt from the formula, solves use explicit inverses, and the DTW cost is
found by enumerating every admissible path.
"""

import math

import numpy as np


def _rbf(ta, tb, length_scale, signal_std):
    lag = np.subtract.outer(np.asarray(ta, float), np.asarray(tb, float))
    return signal_std ** 2 * np.exp(-lag ** 2 / (2.0 * length_scale ** 2))


def dense_posterior(t, y, length_scale, signal_std, r_vec, jitter, ts):
    """Latent posterior mean/variance through an explicit matrix inverse."""
    t, y, ts = np.asarray(t, float), np.asarray(y, float), np.asarray(ts, float)
    Ky = (_rbf(t, t, length_scale, signal_std) + np.diag(r_vec)
          + jitter * np.eye(t.size))
    Kinv = np.linalg.inv(Ky)
    offset = float(np.mean(y))
    Ks = _rbf(ts, t, length_scale, signal_std)
    mean = offset + Ks @ Kinv @ (y - offset)
    cov = _rbf(ts, ts, length_scale, signal_std) - Ks @ Kinv @ Ks.T
    return mean, np.diag(cov).copy()


def dense_lml(t, y, length_scale, signal_std, r_vec, jitter):
    t, y = np.asarray(t, float), np.asarray(y, float)
    Ky = (_rbf(t, t, length_scale, signal_std) + np.diag(r_vec)
          + jitter * np.eye(t.size))
    resid = y - np.mean(y)
    _, logdet = np.linalg.slogdet(Ky)
    quad = float(resid @ np.linalg.inv(Ky) @ resid)
    return -0.5 * quad - 0.5 * logdet - 0.5 * t.size * math.log(2.0 * math.pi)


def brute_force_dtw_cost(C):
    """Minimum path cost by exhaustive enumeration.

    Costs are accumulated from (0, 0) outward, in the same order the dynamic
    program adds them, so the optimum agrees bit for bit.
    """
    na, nb = C.shape
    best = [math.inf]

    def walk(i, j, acc):
        if i == na - 1 and j == nb - 1:
            best[0] = min(best[0], acc)
            return
        if i + 1 < na and j + 1 < nb:
            walk(i + 1, j + 1, acc + C[i + 1, j + 1])
        if i + 1 < na:
            walk(i + 1, j, acc + C[i + 1, j])
        if j + 1 < nb:
            walk(i, j + 1, acc + C[i, j + 1])

    walk(0, 0, C[0, 0])
    return best[0]


def critically_damped_free(e0, v0, omega, t):
    """Unforced critically damped response with natural frequency omega."""
    t = np.asarray(t, float)
    return (e0 + (v0 + omega * e0) * t) * np.exp(-omega * t)
