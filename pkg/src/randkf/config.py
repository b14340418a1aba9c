"""Experiment configuration: strict YAML parsing and model construction.

Configs are plain key/value documents with nested lists for matrices.
Rotation dynamics get a shorthand, ``f: {rotation: {period: 300}}``,
expanding to the 2x2 matrix [[cos a, sin a], [-sin a, cos a]] with
a = 2*pi/period, so tracking configs read like the model definitions.
Unknown fields are rejected, naming the offending key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import yaml

from .adapters import (
    MultiModelDynamics,
    NahiModel,
    PartitionedObsModel,
    UncertainObsModel,
    build_multimodel,
    build_nahi,
    build_partitioned,
    build_uncertain_obs,
)
from .filter_core import InitialCondition, ModelProvider
from .random_matrix import MatrixDist

MODES = ("filter", "simulate", "montecarlo", "sweep")
MODEL_KINDS = ("general", "nahi", "partitioned", "multimodel")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _require_keys(node: dict, allowed: set[str], required: set[str],
                  where: str) -> None:
    if not isinstance(node, dict):
        raise ConfigError(f"{where}: expected a mapping")
    unknown = set(node) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown field '{sorted(unknown)[0]}'")
    missing = required - set(node)
    if missing:
        raise ConfigError(f"{where}: missing field '{sorted(missing)[0]}'")


def rotation_matrix(period: float) -> np.ndarray:
    a = 2.0 * math.pi / period
    return np.array([[math.cos(a), math.sin(a)],
                     [-math.sin(a), math.cos(a)]])


def _matrix(node: Any, where: str) -> np.ndarray:
    if isinstance(node, dict):
        _require_keys(node, {"rotation"}, {"rotation"}, where)
        rot = node["rotation"]
        _require_keys(rot, {"period"}, {"period"}, f"{where}.rotation")
        period = float(rot["period"])
        if period == 0:
            raise ConfigError(f"{where}.rotation.period: must be nonzero")
        return rotation_matrix(period)
    try:
        m = np.array(node, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: not a numeric matrix ({exc})") from exc
    if m.ndim != 2:
        raise ConfigError(f"{where}: expected a matrix (list of rows)")
    return m


def _prob(node: Any, where: str) -> float:
    try:
        p = float(node)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: not a number") from None
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"{where}: probability {p} outside [0, 1]")
    return p


def _weighted_matrices(nodes: Any, where: str) -> MatrixDist:
    if not isinstance(nodes, list) or not nodes:
        raise ConfigError(f"{where}: expected a non-empty list")
    pairs = []
    for i, entry in enumerate(nodes):
        here = f"{where}[{i}]"
        _require_keys(entry, {"matrix", "prob"}, {"matrix", "prob"}, here)
        pairs.append((_matrix(entry["matrix"], f"{here}.matrix"),
                      _prob(entry["prob"], f"{here}.prob")))
    try:
        return MatrixDist.of(pairs)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _build_model(node: dict):
    if not isinstance(node, dict) or "kind" not in node:
        raise ConfigError("model: missing field 'kind'")
    kind = node["kind"]
    if kind not in MODEL_KINDS:
        raise ConfigError(f"model.kind: '{kind}' not one of {MODEL_KINDS}")

    if kind == "nahi":
        _require_keys(node, {"kind", "h", "p", "f", "rv", "rw"},
                      {"kind", "h", "p", "f", "rv", "rw"}, "model")
        return NahiModel(h=_matrix(node["h"], "model.h"),
                         p=_prob(node["p"], "model.p"),
                         F=_matrix(node["f"], "model.f"),
                         Rv=_matrix(node["rv"], "model.rv"),
                         Rw=_matrix(node["rw"], "model.rw"))
    if kind == "general":
        allowed = {"kind", "measurements", "f", "rv", "rw", "per_model_noise"}
        _require_keys(node, allowed, {"kind", "measurements", "f", "rv"},
                      "model")
        dist = _weighted_matrices(node["measurements"], "model.measurements")
        rw = _matrix(node["rw"], "model.rw") if "rw" in node else None
        pmn = None
        if "per_model_noise" in node:
            pmn = [_matrix(m, f"model.per_model_noise[{i}]")
                   for i, m in enumerate(node["per_model_noise"])]
        try:
            return UncertainObsModel(measurement_dist=dist,
                                     F=_matrix(node["f"], "model.f"),
                                     Rv=_matrix(node["rv"], "model.rv"),
                                     Rw=rw, per_model_noise=pmn)
        except ValueError as exc:
            raise ConfigError(f"model: {exc}") from exc
    if kind == "partitioned":
        _require_keys(node, {"kind", "blocks", "f", "rv", "rw"},
                      {"kind", "blocks", "f", "rv", "rw"}, "model")
        if not isinstance(node["blocks"], list) or not node["blocks"]:
            raise ConfigError("model.blocks: expected a non-empty list")
        blocks = []
        for i, b in enumerate(node["blocks"]):
            here = f"model.blocks[{i}]"
            _require_keys(b, {"h", "p"}, {"h", "p"}, here)
            blocks.append((_matrix(b["h"], f"{here}.h"),
                           _prob(b["p"], f"{here}.p")))
        return PartitionedObsModel(blocks=tuple(blocks),
                                   F=_matrix(node["f"], "model.f"),
                                   Rv=_matrix(node["rv"], "model.rv"),
                                   Rw=_matrix(node["rw"], "model.rw"))
    # multimodel
    _require_keys(node, {"kind", "transitions", "h", "rv", "rw"},
                  {"kind", "transitions", "h", "rv", "rw"}, "model")
    return MultiModelDynamics(
        transition_dist=_weighted_matrices(node["transitions"],
                                           "model.transitions"),
        H=_matrix(node["h"], "model.h"),
        Rv=_matrix(node["rv"], "model.rv"),
        Rw=_matrix(node["rw"], "model.rw"))


_BUILDERS = {
    NahiModel: build_nahi,
    UncertainObsModel: build_uncertain_obs,
    PartitionedObsModel: build_partitioned,
    MultiModelDynamics: build_multimodel,
}


@dataclass
class ExperimentConfig:
    """Validated experiment description, ready to run."""

    mode: str
    model: object
    initial: InitialCondition
    horizon: int
    runs: int = 50
    seed: int = 0
    output: str | None = None
    measurements: str | None = None
    gammas: list[float] = field(default_factory=list)
    raw: dict = field(default_factory=dict)

    def provider(self) -> ModelProvider:
        build = _BUILDERS[type(self.model)]
        model = self.model
        return lambda k: build(model, k)

    def provider_for_gamma(self, gamma: float) -> ModelProvider:
        if not isinstance(self.model, NahiModel):
            raise ConfigError("sweep mode requires a 'nahi' model")
        swapped = NahiModel(h=self.model.h, p=float(gamma), F=self.model.F,
                            Rv=self.model.Rv, Rw=self.model.Rw)
        return lambda k: build_nahi(swapped, k)


_TOP_ALLOWED = {"mode", "model", "initial", "horizon", "runs", "seed",
                "output", "measurements", "gammas"}


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a config document; strict about unknown fields."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config document: {exc}") from exc
    _require_keys(doc, _TOP_ALLOWED, {"mode", "model", "initial", "horizon"},
                  "config")
    mode = doc["mode"]
    if mode not in MODES:
        raise ConfigError(f"mode: '{mode}' not one of {MODES}")
    horizon = int(doc["horizon"])
    if horizon < 1:
        raise ConfigError("horizon: must be >= 1")
    runs = int(doc.get("runs", 50))
    if runs < 1:
        raise ConfigError("runs: must be >= 1")
    ini = doc["initial"]
    _require_keys(ini, {"mean", "cov"}, {"mean", "cov"}, "initial")
    try:
        ic = InitialCondition(
            mean=np.asarray(ini["mean"], dtype=float),
            cov=_matrix(ini["cov"], "initial.cov"))
    except ValueError as exc:
        raise ConfigError(f"initial: {exc}") from exc
    gammas = [_prob(g, f"gammas[{i}]")
              for i, g in enumerate(doc.get("gammas", []))]
    model = _build_model(doc["model"])

    cfg = ExperimentConfig(mode=mode, model=model, initial=ic,
                           horizon=horizon, runs=runs,
                           seed=int(doc.get("seed", 0)),
                           output=doc.get("output"),
                           measurements=doc.get("measurements"),
                           gammas=gammas, raw=doc)
    # surface dimension mismatches at parse time
    try:
        m0 = cfg.provider()(0)
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc
    if m0.F.shape[0] != ic.mean.size:
        raise ConfigError(
            f"initial.mean: dimension {ic.mean.size} does not match "
            f"state dimension {m0.F.shape[0]}")
    return cfg
