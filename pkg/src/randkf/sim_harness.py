"""Truth simulation, Monte-Carlo experiments and the batch oracle.

Everything here is a pure function of (configuration, seed): trajectories
regenerate bit-identically from their seed, and Monte-Carlo runs derive
per-run seeds deterministically from the base seed so that adding runs
never perturbs existing ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .filter_core import (
    FilterState,
    InitialCondition,
    ModelProvider,
    PredictedState,
    StepModel,
    deterministic_model,
    filter_sequence,
    init,
    memoized,
    predict,
    symmetrize,
    update,
)
from .random_matrix import quad_form, sample_matrix

MAX_ORACLE_HORIZON = 4


@dataclass(frozen=True)
class TruthTrajectory:
    """One sampled realization of the generative model."""

    states: np.ndarray        # (K+1, r)
    realized_F: np.ndarray    # (K, r, r)
    realized_H: np.ndarray    # (K+1, N, r)
    measurements: np.ndarray  # (K+1, N)
    seed: int


@dataclass(frozen=True)
class RunMetrics:
    """Per-step Monte-Carlo averages across runs."""

    per_step_sq_error: np.ndarray
    per_step_nees: np.ndarray
    runs: int


def derive_run_seeds(base_seed: int, runs: int) -> list[int]:
    """Deterministic per-run seeds; a prefix is stable under more runs."""
    state = np.random.SeedSequence(base_seed).generate_state(runs, np.uint64)
    return [int(s) for s in state]


def _gauss_factor(cov: np.ndarray) -> np.ndarray:
    # eigh square root; tolerates semidefinite covariances
    w, V = np.linalg.eigh(cov)
    return V * np.sqrt(np.clip(w, 0.0, None))


def _draw(rng: np.random.Generator, mean: np.ndarray,
          factor: np.ndarray) -> np.ndarray:
    return mean + factor @ rng.standard_normal(factor.shape[1])


def simulate_truth(provider: ModelProvider, ic: InitialCondition,
                   K: int, seed: int) -> TruthTrajectory:
    """Sample states, realized matrices and measurements for steps 0..K."""
    if K < 1:
        raise ValueError("need K >= 1")
    provider = memoized(provider)
    rng = np.random.default_rng(seed)
    factors: dict[bytes, np.ndarray] = {}

    def factor_of(cov: np.ndarray) -> np.ndarray:
        key = cov.tobytes()
        if key not in factors:
            factors[key] = _gauss_factor(cov)
        return factors[key]

    x = _draw(rng, ic.mean, factor_of(ic.cov))
    states, Fs, Hs, ys = [x], [], [], []
    for k in range(K + 1):
        m = provider(k)
        H = sample_matrix(m.H.source, rng) if m.H.source is not None \
            else np.array(m.H.mean)
        y = _draw(rng, H @ x, factor_of(m.Rw))
        Hs.append(H)
        ys.append(y)
        if k < K:
            F = sample_matrix(m.F.source, rng) if m.F.source is not None \
                else np.array(m.F.mean)
            x = _draw(rng, F @ x, factor_of(m.Rv))
            Fs.append(F)
            states.append(x)
    return TruthTrajectory(states=np.array(states), realized_F=np.array(Fs),
                           realized_H=np.array(Hs),
                           measurements=np.array(ys), seed=seed)


def nees(err: np.ndarray, cov: np.ndarray) -> float:
    return float(err @ np.linalg.pinv(cov) @ err)


def run_filter_on(traj: TruthTrajectory, provider: ModelProvider,
                  ic: InitialCondition):
    """Filter the recorded measurements; report squared errors and NEES."""
    states = filter_sequence(provider, ic, traj.measurements)
    means = np.array([s.mean for s in states])
    covs = np.array([s.cov for s in states])
    errs = means - traj.states
    sq_err = np.sum(errs ** 2, axis=1)
    step_nees = np.array([nees(e, P) for e, P in zip(errs, covs)])
    return states, sq_err, step_nees


Estimator = Callable[[TruthTrajectory], tuple[np.ndarray, np.ndarray]]


def monte_carlo(provider: ModelProvider, ic: InitialCondition, K: int,
                runs: int, base_seed: int, *,
                filter_provider: ModelProvider | None = None,
                estimator: Estimator | None = None) -> RunMetrics:
    """Average squared error and NEES over independent seeded runs.

    ``filter_provider`` lets a mismatched filter (e.g. a naive standard
    KF that ignores parameter randomness) run against truth sampled from
    ``provider``.  ``estimator`` overrides the filter entirely and must
    return per-step means and covariances.
    """
    if runs < 1:
        raise ValueError("need runs >= 1")
    provider = memoized(provider)
    fp = memoized(filter_provider) if filter_provider is not None else provider
    sq_sum = np.zeros(K + 1)
    nees_sum = np.zeros(K + 1)
    for seed in derive_run_seeds(base_seed, runs):
        traj = simulate_truth(provider, ic, K, seed)
        if estimator is not None:
            means, covs = estimator(traj)
            errs = means - traj.states
            sq = np.sum(errs ** 2, axis=1)
            nn = np.array([nees(e, P) for e, P in zip(errs, covs)])
        else:
            _, sq, nn = run_filter_on(traj, fp, ic)
        sq_sum += sq
        nees_sum += nn
    return RunMetrics(per_step_sq_error=sq_sum / runs,
                      per_step_nees=nees_sum / runs, runs=runs)


def naive_kf_provider(provider: ModelProvider) -> ModelProvider:
    """Standard-KF baseline: keeps the mean matrices, drops the quad forms."""
    def naive(k: int) -> StepModel:
        m = provider(k)
        return deterministic_model(m.F.mean, m.H.mean, m.Rv, m.Rw)
    return naive


def batch_lmv_oracle(provider: ModelProvider, ic: InitialCondition,
                     measurements: Sequence, *,
                     max_horizon: int = MAX_ORACLE_HORIZON):
    """Batch linear-minimum-variance estimate of x_K from y_0..y_K.

    Builds the exact joint second moments of (x_K, y_0, ..., y_K) under
    the converted system, whose effective noises are white and
    uncorrelated with the initial state, then evaluates

        E(x_K) + Cov(x_K, Y) Cov(Y)^+ (Y - E(Y))

    and its error covariance.  Deliberately a different computational
    path from the recursive filter; used to certify it.
    """
    ys = [np.asarray(y, dtype=float).ravel() for y in measurements]
    K = len(ys) - 1
    if K < 0:
        raise ValueError("need at least one measurement")
    if K > max_horizon:
        raise ValueError(f"horizon {K} exceeds oracle limit {max_horizon}")
    models = [provider(k) for k in range(K + 1)]

    mean_x = [np.asarray(ic.mean, dtype=float)]
    X = [np.outer(ic.mean, ic.mean) + ic.cov]
    var_x = [np.asarray(ic.cov, dtype=float)]
    for k in range(K):
        Fbar = models[k].F.mean
        qf = quad_form(models[k].F, X[k])
        mean_x.append(Fbar @ mean_x[k])
        X.append(symmetrize(Fbar @ X[k] @ Fbar.T + qf + models[k].Rv))
        var_x.append(symmetrize(X[k + 1] - np.outer(mean_x[k + 1],
                                                    mean_x[k + 1])))

    r = mean_x[0].size
    # phi[k][l] = Fbar_{k-1} ... Fbar_l (state transition from l to k)
    phi = [[None] * (K + 1) for _ in range(K + 1)]
    for l in range(K + 1):
        acc = np.eye(r)
        phi[l][l] = acc
        for k in range(l, K):
            acc = models[k].F.mean @ acc
            phi[k + 1][l] = acc

    def cov_xx(i: int, j: int) -> np.ndarray:
        if i >= j:
            return phi[i][j] @ var_x[j]
        return (phi[j][i] @ var_x[i]).T

    Ns = [m.H.shape[0] for m in models]
    offs = np.concatenate(([0], np.cumsum(Ns)))
    total = int(offs[-1])
    Hbars = [m.H.mean for m in models]
    Rw_eff = [models[k].Rw + quad_form(models[k].H, X[k])
              for k in range(K + 1)]

    EY = np.concatenate([Hbars[k] @ mean_x[k] for k in range(K + 1)])
    Y = np.concatenate(ys)
    if Y.size != total:
        raise ValueError("measurement dimensions do not match the model")
    covY = np.zeros((total, total))
    covXY = np.zeros((r, total))
    for i in range(K + 1):
        si = slice(offs[i], offs[i + 1])
        covXY[:, si] = cov_xx(K, i) @ Hbars[i].T
        for j in range(K + 1):
            sj = slice(offs[j], offs[j + 1])
            block = Hbars[i] @ cov_xx(i, j) @ Hbars[j].T
            if i == j:
                block = block + Rw_eff[i]
            covY[si, sj] = block
    covY = symmetrize(covY)
    gain = covXY @ np.linalg.pinv(covY)
    mean = mean_x[K] + gain @ (Y - EY)
    cov = symmetrize(var_x[K] - gain @ covXY.T)
    return mean, cov


def covariance_recursion(provider: ModelProvider, ic: InitialCondition,
                         K: int) -> list[FilterState]:
    """Data-independent P/X recursion (feeds zero-innovation measurements)."""
    provider = memoized(provider)
    s0 = init(ic)
    prior = PredictedState(step=0, mean=s0.mean, cov=s0.cov,
                           second_moment=s0.second_moment)
    m0 = provider(0)
    states = [update(prior, m0.H.mean @ s0.mean, m0)]
    for k in range(1, K + 1):
        p = predict(states[-1], provider(k - 1))
        mk = provider(k)
        states.append(update(p, mk.H.mean @ p.mean, mk))
    return states


def gamma_sweep(model_for_gamma: Callable[[float], tuple[ModelProvider,
                                                         InitialCondition]],
                gammas: Sequence[float], K: int) -> list[tuple[float, float]]:
    """trace(P_K) of the deterministic recursion for each probability."""
    gammas = [float(g) for g in gammas]
    if any(b < a for a, b in zip(gammas, gammas[1:])):
        raise ValueError("gammas must be sorted ascending")
    if any(not 0.0 < g <= 1.0 for g in gammas):
        raise ValueError("gammas must lie in (0, 1]")
    out = []
    for g in gammas:
        provider, ic = model_for_gamma(g)
        final = covariance_recursion(provider, ic, K)[-1]
        out.append((g, float(np.trace(final.cov))))
    return out


def sample_converted_noises(provider: ModelProvider, ic: InitialCondition,
                            K: int, n: int, seed: int):
    """Vectorized draws of the converted-system noises for moment checks.

    Returns (x0, nu_tilde, omega_tilde) with shapes (n, r), (n, K, r) and
    (n, K+1, N), where nu_tilde_k = x_{k+1} - Fbar_k x_k and
    omega_tilde_k = y_k - Hbar_k x_k across n independent trajectories.
    """
    rng = np.random.default_rng(seed)
    r = ic.mean.size
    x = ic.mean + rng.standard_normal((n, r)) @ _gauss_factor(ic.cov).T
    x0 = x.copy()
    models = [provider(k) for k in range(K + 1)]
    N = models[0].H.shape[0]
    nu = np.zeros((n, K, r))
    om = np.zeros((n, K + 1, N))
    for k in range(K + 1):
        m = models[k]
        if m.H.source is not None:
            stack = np.stack(m.H.source.samples)
            idx = rng.choice(len(stack), size=n, p=m.H.source.probs)
            Hreal = stack[idx]
        else:
            Hreal = np.broadcast_to(m.H.mean, (n,) + m.H.shape)
        w = rng.standard_normal((n, N)) @ _gauss_factor(m.Rw).T
        y = np.einsum("nij,nj->ni", Hreal, x) + w
        om[:, k] = y - x @ m.H.mean.T
        if k < K:
            if m.F.source is not None:
                stack = np.stack(m.F.source.samples)
                idx = rng.choice(len(stack), size=n, p=m.F.source.probs)
                Freal = stack[idx]
            else:
                Freal = np.broadcast_to(m.F.mean, (n, r, r))
            v = rng.standard_normal((n, r)) @ _gauss_factor(m.Rv).T
            x_next = np.einsum("nij,nj->ni", Freal, x) + v
            nu[:, k] = x_next - x @ m.F.mean.T
            x = x_next
    return x0, nu, om
