"""Shared reference implementations and random model generators.

The references here are deliberately written from the printed formulas,
independently of the library's code paths, so tests comparing the two
actually check something.
"""

import numpy as np
import pytest

from randkf import InitialCondition, MatrixDist, moments_from_dist
from randkf.filter_core import StepModel


def textbook_kf(F, H, Q, R, mu0, P0, ys):
    """Plain Kalman filter with explicit inverses.

    Mirrors the library's measurement convention: y_0 updates the prior
    in place, later measurements follow a predict.
    """
    F, H, Q, R = (np.atleast_2d(np.asarray(a, dtype=float))
                  for a in (F, H, Q, R))
    x = np.asarray(mu0, dtype=float).ravel()
    P = np.atleast_2d(np.asarray(P0, dtype=float))
    I = np.eye(x.size)
    out = []
    for k, y in enumerate(ys):
        if k > 0:
            x = F @ x
            P = F @ P @ F.T + Q
        S = H @ P @ H.T + R
        K = P @ H.T @ np.linalg.inv(S)
        x = x + K @ (np.asarray(y, dtype=float).ravel() - H @ x)
        P = (I - K @ H) @ P
        out.append((x.copy(), P.copy()))
    return out


def nahi_reference(h, p, F, Rv, Rw, mu0, P0, ys):
    """Specialized dropout recursion with p factored out of the gain.

    Uses the gain written as p * P h^T (p^2 h P h^T + Rw_eff)^-1 and the
    covariance update P <- (I - p K h) P, with Rw_eff evaluated at the
    predicted second moment of the step being updated.
    """
    h, F, Rv, Rw = (np.atleast_2d(np.asarray(a, dtype=float))
                    for a in (h, F, Rv, Rw))
    x = np.asarray(mu0, dtype=float).ravel()
    P = np.atleast_2d(np.asarray(P0, dtype=float))
    X = np.outer(x, x) + P
    I = np.eye(x.size)
    out = []
    for k, y in enumerate(ys):
        if k > 0:
            x = F @ x
            P = F @ P @ F.T + Rv
            X = F @ X @ F.T + Rv
        Rw_eff = Rw + (1.0 - p) * p * h @ X @ h.T
        S = p * p * h @ P @ h.T + Rw_eff
        K = p * P @ h.T @ np.linalg.inv(S)
        x = x + K @ (np.asarray(y, dtype=float).ravel() - p * h @ x)
        P = (I - p * K @ h) @ P
        out.append((x.copy(), P.copy(), X.copy()))
    return out


def rand_psd(rng, n, floor=0.0):
    A = rng.standard_normal((n, n))
    return A @ A.T + floor * np.eye(n)


def rand_dist(rng, p, q, n_samples=None, scale=1.0):
    """Random finite matrix distribution with nondegenerate probabilities."""
    l = n_samples if n_samples is not None else int(rng.integers(2, 4))
    probs = rng.uniform(0.2, 1.0, size=l)
    probs /= probs.sum()
    mats = [scale * rng.standard_normal((p, q)) for _ in range(l)]
    return MatrixDist.of(list(zip(mats, probs)))


def rand_random_model(rng, r, N, *, stable=True):
    """StepModel with finite-dist F and H and well-conditioned noises."""
    fdist = rand_dist(rng, r, r)
    if stable:
        # keep the mean dynamics non-expansive so horizons stay tame
        rho = max(abs(np.linalg.eigvals(moments_from_dist(fdist).mean)))
        if rho > 0.95:
            scaled = [(0.95 / rho) * m for m in fdist.samples]
            fdist = MatrixDist.of(list(zip(scaled, fdist.probs)))
    hdist = rand_dist(rng, N, r)
    return StepModel(F=moments_from_dist(fdist), H=moments_from_dist(hdist),
                     Rv=rand_psd(rng, r, floor=0.1),
                     Rw=rand_psd(rng, N, floor=0.5))


def rand_ic(rng, r):
    return InitialCondition(mean=rng.standard_normal(r),
                            cov=rand_psd(rng, r, floor=0.1))


@pytest.fixture
def rng():
    return np.random.default_rng(20240915)
