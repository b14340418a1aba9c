"""StepModel builders for the uncertain-observation and multi-model cases.

Each adapter turns a domain-level description (sensor dropout
probabilities, a bank of candidate dynamics, ...) into the generic
StepModel the filter consumes, by constructing the finite distribution
of the random matrix and taking its moments.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .filter_core import StepModel, _check_psd
from .random_matrix import (
    MatrixDist,
    RandomMatrixSpec,
    deterministic,
    moments_from_dist,
)

MAX_PARTITION_BLOCKS = 20

ProbFn = Callable[[int], float] | float


def _prob_at(p: ProbFn, k: int, name: str) -> float:
    val = float(p(k)) if callable(p) else float(p)
    if not 0.0 <= val <= 1.0:
        raise ValueError(f"{name} = {val} is outside [0, 1]")
    return val


def _f_spec(F) -> RandomMatrixSpec:
    if isinstance(F, RandomMatrixSpec):
        return F
    if isinstance(F, MatrixDist):
        return moments_from_dist(F)
    return deterministic(F)


@dataclass(frozen=True)
class UncertainObsModel:
    """Measurement matrix drawn from a known finite set each step.

    ``per_model_noise`` optionally gives one noise covariance per
    candidate matrix; otherwise ``Rw`` is shared by all of them.
    """

    measurement_dist: MatrixDist
    F: object
    Rv: np.ndarray
    Rw: np.ndarray | None = None
    per_model_noise: Sequence[np.ndarray] | None = None

    def __post_init__(self):
        if (self.Rw is None) == (self.per_model_noise is None):
            raise ValueError("give exactly one of Rw or per_model_noise")
        if self.per_model_noise is not None and \
                len(self.per_model_noise) != len(self.measurement_dist):
            raise ValueError(
                f"{len(self.per_model_noise)} noise covariances for "
                f"{len(self.measurement_dist)} measurement models"
            )


@dataclass(frozen=True)
class NahiModel:
    """Single sensor whose reading contains the signal only with probability p."""

    h: np.ndarray
    p: ProbFn
    F: object
    Rv: np.ndarray
    Rw: np.ndarray


@dataclass(frozen=True)
class PartitionedObsModel:
    """Measurement split into independent blocks, each with its own dropout."""

    blocks: Sequence[tuple[np.ndarray, ProbFn]]
    F: object
    Rv: np.ndarray
    Rw: np.ndarray


@dataclass(frozen=True)
class MultiModelDynamics:
    """Transition matrix drawn i.i.d. per step from a finite model bank."""

    transition_dist: MatrixDist
    H: np.ndarray
    Rv: np.ndarray
    Rw: np.ndarray


def build_uncertain_obs(m: UncertainObsModel, k: int) -> StepModel:
    """General uncertain-observation step: H moments from the finite dist.

    With per-model noises the effective measurement noise is the
    probability mixture sum(p_i * Rw_i); the cross term between the
    H-deviation and the selected noise vanishes because each noise is
    zero-mean and independent of the state.
    """
    if m.per_model_noise is not None:
        Rw = sum(p * _check_psd(R, "per-model Rw")
                 for p, R in zip(m.measurement_dist.probs, m.per_model_noise))
    else:
        Rw = np.asarray(m.Rw, dtype=float)
    return StepModel(F=_f_spec(m.F), H=moments_from_dist(m.measurement_dist),
                     Rv=np.asarray(m.Rv, dtype=float), Rw=Rw)


def build_nahi(m: NahiModel, k: int) -> StepModel:
    """Single-sensor dropout as the two-sample distribution {h, 0}."""
    p = _prob_at(m.p, k, "p(k)")
    h = np.atleast_2d(np.asarray(m.h, dtype=float))
    dist = MatrixDist.of([(h, p), (np.zeros_like(h), 1.0 - p)])
    general = UncertainObsModel(measurement_dist=dist, F=m.F,
                                Rv=m.Rv, Rw=m.Rw)
    return build_uncertain_obs(general, k)


def build_partitioned(m: PartitionedObsModel, k: int) -> StepModel:
    """Stacked measurement with independent per-block dropout.

    Enumerates all 2^B on/off block combinations with product
    probabilities; the resulting quad form is block-diagonal with
    blocks (1-p_i) p_i h_i X h_i^T, which partitioned_quad_form
    computes directly as the fast path.
    """
    B = len(m.blocks)
    if B < 1:
        raise ValueError("need at least one block")
    if B > MAX_PARTITION_BLOCKS:
        raise ValueError(f"{B} blocks would enumerate 2^{B} samples")
    hs = [np.atleast_2d(np.asarray(h, dtype=float)) for h, _ in m.blocks]
    ps = [_prob_at(p, k, f"block {i} probability")
          for i, (_, p) in enumerate(m.blocks)]
    r = hs[0].shape[1]
    if any(h.shape[1] != r for h in hs):
        raise ValueError("blocks disagree on state dimension")
    N = sum(h.shape[0] for h in hs)
    Rw = np.asarray(m.Rw, dtype=float)
    if Rw.shape != (N, N):
        raise ValueError(f"Rw is {Rw.shape}, stacked blocks give N={N}")
    pairs = []
    for on in itertools.product((1, 0), repeat=B):
        H = np.vstack([h if bit else np.zeros_like(h)
                       for h, bit in zip(hs, on)])
        prob = float(np.prod([p if bit else 1.0 - p
                              for p, bit in zip(ps, on)]))
        pairs.append((H, prob))
    dist = MatrixDist.of(pairs)
    return StepModel(F=_f_spec(m.F), H=moments_from_dist(dist),
                     Rv=np.asarray(m.Rv, dtype=float), Rw=Rw)


def partitioned_quad_form(m: PartitionedObsModel, X, k: int = 0) -> np.ndarray:
    """Block-diagonal E(H~ X H~^T) computed per block in O(B).

    Cross-checked against the enumerated-distribution path in tests.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    blocks = []
    for i, (h, p) in enumerate(m.blocks):
        h = np.atleast_2d(np.asarray(h, dtype=float))
        pi = _prob_at(p, k, f"block {i} probability")
        blocks.append((1.0 - pi) * pi * h @ X @ h.T)
    N = sum(b.shape[0] for b in blocks)
    out = np.zeros((N, N))
    at = 0
    for b in blocks:
        n = b.shape[0]
        out[at:at + n, at:at + n] = b
        at += n
    return out


def build_multimodel(m: MultiModelDynamics, k: int) -> StepModel:
    """Random transition from a finite model bank, deterministic H."""
    return StepModel(F=moments_from_dist(m.transition_dist),
                     H=deterministic(m.H),
                     Rv=np.asarray(m.Rv, dtype=float),
                     Rw=np.asarray(m.Rw, dtype=float))
