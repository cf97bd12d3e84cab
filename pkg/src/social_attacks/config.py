"""Experiment configuration: strict JSON schema, defaults and validation.

Unknown keys are rejected. ``parse_config`` runs every structural check
(network connectivity, model validity, epsilon floor) before returning, so
a config that parses can be simulated.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .attacks import DEFAULT_EPSILON, DEFAULT_KNOWN_DIVERGENCE_EPSILON, check_epsilon
from .engine import DEFAULT_ITERATIONS, DEFAULT_THRESHOLD, DEFAULT_WINDOW, Scenario
from .errors import ConfigError, SocialAttackError
from .models import AgentModel, make_bsc
from .topology import (
    Network,
    build_uniform_weights,
    is_strongly_connected,
    random_topology,
    regular_topology,
    star_topology,
)

SCHEMA_VERSION = 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class StarTopology(_Strict):
    kind: Literal["star"]
    n: int = Field(15, ge=2)
    n_malicious: int = Field(4, ge=0)
    hub_is_malicious: bool = True


class RandomTopology(_Strict):
    kind: Literal["random"]
    n: int = Field(15, ge=1)
    n_malicious: int = Field(4, ge=0)
    edge_prob: float = Field(0.3, gt=0, le=1)
    seed: int = 0


class RegularTopology(_Strict):
    kind: Literal["regular"]
    n: int = Field(15, ge=1)
    n_malicious: int = Field(4, ge=0)
    degree: int = Field(4, ge=0)
    seed: int = 0


class ExplicitTopology(_Strict):
    kind: Literal["explicit"]
    roles: list[Literal["normal", "malicious"]]
    adjacency: list[list[bool]] | None = None
    combination_matrix: list[list[float]] | None = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.adjacency is None) == (self.combination_matrix is None):
            raise ValueError("give exactly one of adjacency or combination_matrix")
        return self


Topology = Annotated[
    Union[StarTopology, RandomTopology, RegularTopology, ExplicitTopology],
    Field(discriminator="kind"),
]


class ModelSpec(_Strict):
    bsc_p: float | list[float] | None = None
    pmfs: list[tuple[list[float], list[float]]] | None = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.bsc_p is None) == (self.pmfs is None):
            raise ValueError("give exactly one of bsc_p or pmfs")
        return self


class AttackConfig(_Strict):
    family: Literal["honest", "known_divergence", "asud", "random"] = "asud"
    prior: tuple[float, float] = (0.5, 0.5)
    epsilon: float | None = None
    # known_divergence only: override the divergences / centrality the
    # adversaries would otherwise compute from the network
    s1: float | None = Field(None, ge=0)
    s2: float | None = Field(None, ge=0)
    u: float | None = Field(None, gt=0, le=1)

    @model_validator(mode="after")
    def _fill_epsilon(self):
        if self.epsilon is None:
            eps = DEFAULT_KNOWN_DIVERGENCE_EPSILON if self.family == "known_divergence" else DEFAULT_EPSILON
            object.__setattr__(self, "epsilon", eps)
        if (self.s1 is None) != (self.s2 is None):
            raise ValueError("s1 and s2 must be given together")
        if self.family != "known_divergence" and (self.s1 is not None or self.u is not None):
            raise ValueError("s1/s2/u apply to the known_divergence family only")
        if min(self.prior) < 0 or abs(sum(self.prior) - 1.0) > 1e-12:
            raise ValueError(f"prior must be a distribution, got {self.prior}")
        return self


class DetectionConfig(_Strict):
    threshold: float = Field(DEFAULT_THRESHOLD, gt=0, lt=0.5)
    window: int = Field(DEFAULT_WINDOW, ge=1)


class OutputConfig(_Strict):
    dir: str = "out"
    write_trajectories: bool = True


class ExperimentConfig(_Strict):
    version: Literal[1] = SCHEMA_VERSION
    topology: Topology
    model: ModelSpec
    attack: AttackConfig = AttackConfig()
    true_state: Literal[1, 2] = 1
    iterations: int = Field(DEFAULT_ITERATIONS, ge=1)
    trials: int = Field(20, ge=1)
    base_seed: int = 0
    detection: DetectionConfig = DetectionConfig()
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _window_fits(self):
        if self.detection.window > self.iterations:
            raise ValueError(f"detection.window ({self.detection.window}) exceeds iterations ({self.iterations})")
        return self


def emit_config(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=True)


def config_hash(cfg: ExperimentConfig) -> str:
    canonical = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _format_loc(loc) -> str:
    return ".".join(str(p) for p in loc) or "<root>"


def parse_config(document) -> ExperimentConfig:
    """Parse a JSON document (text, bytes or already-decoded mapping) and validate it fully."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"not valid JSON: {exc}") from exc
    try:
        cfg = ExperimentConfig.model_validate(document)
    except ValidationError as exc:
        err = exc.errors()[0]
        more = f" (+{exc.error_count() - 1} more)" if exc.error_count() > 1 else ""
        raise ConfigError(err["msg"] + more, _format_loc(err["loc"])) from exc
    build_scenario(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def build_network(topo) -> Network:
    if topo.kind == "star":
        return star_topology(topo.n, topo.hub_is_malicious, topo.n_malicious)
    if topo.kind == "random":
        return random_topology(topo.n, topo.n_malicious, topo.edge_prob, topo.seed)
    if topo.kind == "regular":
        return regular_topology(topo.n, topo.degree, topo.n_malicious, topo.seed)
    if topo.combination_matrix is not None:
        return Network.from_matrix(topo.combination_matrix, topo.roles)
    return build_uniform_weights(topo.adjacency, topo.roles, name="explicit")


def build_models(spec: ModelSpec, n: int) -> list[AgentModel]:
    if spec.pmfs is not None:
        if len(spec.pmfs) != n:
            raise ConfigError(f"need {n} PMF pairs, got {len(spec.pmfs)}", "model.pmfs")
        return [AgentModel(L1, L2) for L1, L2 in spec.pmfs]
    ps = spec.bsc_p if isinstance(spec.bsc_p, list) else [spec.bsc_p] * n
    if len(ps) != n:
        raise ConfigError(f"need {n} channel parameters, got {len(ps)}", "model.bsc_p")
    return [make_bsc(p) for p in ps]


def build_scenario(cfg: ExperimentConfig, true_state: int | None = None) -> Scenario:
    """Materialize network, models and run parameters; ``true_state`` is 0-based."""
    try:
        net = build_network(cfg.topology)
    except SocialAttackError as exc:
        raise ConfigError(str(exc), "topology") from exc
    if not is_strongly_connected(net):
        raise ConfigError("network is not strongly connected (or lacks a self-loop)", "topology")
    try:
        models = build_models(cfg.model, net.n_agents)
    except ConfigError:
        raise
    except SocialAttackError as exc:
        raise ConfigError(str(exc), "model") from exc
    atk = cfg.attack
    if atk.family != "honest":
        try:
            check_epsilon(atk.epsilon, [m.alphabet_size for m in models])
        except SocialAttackError as exc:
            raise ConfigError(str(exc), "attack.epsilon") from exc
    return Scenario(
        network=net,
        models=models,
        attack_family=atk.family,
        prior=tuple(atk.prior),
        epsilon=atk.epsilon,
        true_state=(cfg.true_state - 1) if true_state is None else true_state,
        iterations=cfg.iterations,
        base_seed=cfg.base_seed,
        threshold=cfg.detection.threshold,
        window=cfg.detection.window,
        divergences=(atk.s1, atk.s2) if atk.s1 is not None else None,
        u_override=atk.u,
    )
