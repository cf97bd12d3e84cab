"""Synthesis of distorted likelihoods for malicious agents.

A malicious agent keeps sampling from its true model but updates with a
fake pair ``(L1_hat, L2_hat)``. Four families are supported:

* ``honest``: the true likelihoods (no attack).
* ``known_divergence``: the adversary knows its centrality and both network
  divergences ``(S1, S2)`` and builds a pair that misleads under either true
  state; uninformative adversaries echo their true PMF.
* ``asud``: no network knowledge; distortions minimize the prior-averaged
  cost, per agent, in closed form (mixed or pure confidence regime).
* ``random``: each distorted PMF drawn uniformly from the epsilon-floored simplex.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ContractError, FeasibilityError, ModelError, RegimeError
from .models import (
    PMF_SUM_TOL,
    AgentModel,
    _check_prior,
    confidence_partition,
    is_informative,
    network_divergence,
    relative_confidence,
)

log = logging.getLogger(__name__)

FAMILIES = ("honest", "known_divergence", "asud", "random")
DEFAULT_EPSILON = 1e-3
DEFAULT_KNOWN_DIVERGENCE_EPSILON = 1e-4
MAX_HALVINGS = 60
SCAN_SLOPES = 256
SCAN_STEPS = 512


@dataclass(frozen=True)
class KnownDivergenceParams:
    signal_pair: tuple[int, int]
    n1: float
    n2: float
    d: float
    x_plus: float
    x_minus: float
    # Apex of the feasible cone, from solving both boundary equations.
    vertex: tuple[float, float]
    # (n2/(u d), n1/(u d)): the anchor as usually written; its second
    # coordinate has the opposite sign of the cone apex. Kept for reporting.
    literal_anchor: tuple[float, float]
    beta: float
    x1: float
    x2: float
    eps1: float
    eps2: float
    alpha: float
    halvings: int = 0


@dataclass(frozen=True, eq=False)
class Distortion:
    """Distorted likelihood pair of one adversary plus how it was produced."""

    L1: np.ndarray
    L2: np.ndarray
    regime: str
    clamped: tuple[str, ...] = ()
    params: KnownDivergenceParams | None = None

    def likelihood(self, state: int) -> np.ndarray:
        return (self.L1, self.L2)[state]


@dataclass(frozen=True)
class AttackSpec:
    family: str
    prior: tuple[float, float] = (0.5, 0.5)
    epsilon: float = DEFAULT_EPSILON
    distortions: Mapping[int, Distortion] = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ContractError(f"unknown attack family {self.family!r}; expected one of {FAMILIES}")
        for k, dist in self.distortions.items():
            for name, pmf in (("L1", dist.L1), ("L2", dist.L2)):
                if abs(pmf.sum() - 1.0) > PMF_SUM_TOL:
                    raise ContractError(f"agent {k}: distorted {name} sums to {pmf.sum()!r}")
                if dist.regime not in ("honest", "echo") and pmf.min() < self.epsilon:
                    raise ContractError(
                        f"agent {k}: distorted {name} has mass {pmf.min():.3e} below epsilon={self.epsilon}"
                    )

    @property
    def clamp_events(self) -> list[str]:
        return [f"agent {k}: {c}" for k, d in sorted(self.distortions.items()) for c in d.clamped]

    def describe(self) -> str:
        return f"{self.family}(prior={self.prior}, epsilon={self.epsilon})"


def check_epsilon(epsilon: float, alphabet_sizes: Sequence[int]) -> None:
    bound = 1.0 / max(alphabet_sizes)
    if not 0 < epsilon < bound:
        raise ContractError(
            f"epsilon={epsilon} violates the full-support floor: need 0 < epsilon < 1/|alphabet| = {bound:g}"
        )


# -- known network divergences ------------------------------------------------

def signal_pairs(m: AgentModel) -> list[tuple[int, int, float]]:
    """Every symbol pair ``(i, j)``, ``i < j``, with nonzero ``d``, largest ``|d|`` first.

    ``d = L1[i] L2[j] - L1[j] L2[i]``; ties keep the lexicographically
    smallest pair first.
    """
    K = m.alphabet_size
    pairs = []
    for i in range(K):
        for j in range(i + 1, K):
            d = float(m.L1[i] * m.L2[j] - m.L1[j] * m.L2[i])
            if d != 0.0:
                pairs.append((i, j, d))
    pairs.sort(key=lambda p: -abs(p[2]))
    return pairs


def select_signal_pair(m: AgentModel) -> tuple[int, int, float]:
    """Symbol pair with the largest ``|d|`` (lowest indices on ties)."""
    pairs = signal_pairs(m)
    if not pairs:
        raise ModelError("uninformative model: every symbol pair has zero determinant")
    return pairs[0]


def _pair_masses(x1: float, x2: float, alpha: float) -> tuple[float, float]:
    denom = math.expm1(x2 - x1)
    eps1 = alpha * math.expm1(x2) / denom
    eps2 = alpha * math.expm1(-x1) / denom
    return eps1, eps2


def misleads_both_states(
    m: AgentModel, u: float, L1_hat, L2_hat, S1: float, S2: float
) -> tuple[bool, tuple[float, float]]:
    """Whether one adversary alone outweighs both network divergences.

    ``margin_j = u * E_{L_j}[log(L_hat_j' / L_hat_j)] - S_j``; the attack
    misleads under either true state iff both margins are positive.
    """
    r = np.log(np.asarray(L2_hat, dtype=float) / np.asarray(L1_hat, dtype=float))
    margin1 = u * float(np.dot(m.L1, r)) - S1
    margin2 = u * float(np.dot(m.L2, -r)) - S2
    return bool(margin1 > 0 and margin2 > 0), (margin1, margin2)


def known_divergence_attack(
    m: AgentModel,
    u: float,
    S1: float,
    S2: float,
    epsilon: float = DEFAULT_KNOWN_DIVERGENCE_EPSILON,
) -> Distortion:
    """Two-symbol distortion that misleads the network under both true states.

    All mass outside the chosen signal pair sits at ``epsilon``. The pair's
    log-likelihood ratios ``(x1, x2)`` are picked on a ray from the apex of
    the feasible cone, then converted back into masses.
    """
    if not is_informative(m):
        raise ContractError("uninformative adversary: use echo_attack")
    if u <= 0 or S1 < 0 or S2 < 0:
        raise ContractError(f"need u > 0 and S1, S2 >= 0 (got u={u}, S1={S1}, S2={S2})")
    check_epsilon(epsilon, [m.alphabet_size])
    pairs = signal_pairs(m)
    for rank, (i, j, d) in enumerate(pairs):
        dist = _known_divergence_on_pair(m, u, S1, S2, epsilon, i, j, d)
        if dist is not None:
            if rank:
                log.info("known-divergence: pair %s infeasible, used pair (%d, %d)", pairs[0][:2], i, j)
            return dist
    raise FeasibilityError(
        f"no point of the feasible cone respects the epsilon floor at epsilon={epsilon:g}; "
        f"retry with a smaller epsilon (e.g. {epsilon / 10:g})"
    )


def _known_divergence_on_pair(m, u, S1, S2, epsilon, i, j, d) -> Distortion | None:
    K = m.alphabet_size
    a, b = m.L1[i], m.L1[j]
    c, e = m.L2[i], m.L2[j]
    n1 = c * S1 + a * S2
    n2 = e * S1 + b * S2
    alpha = 1.0 - (K - 2) * epsilon
    x_plus = math.log((alpha - epsilon) / epsilon)
    vertex = np.array([n2 / (u * d), -n1 / (u * d)])
    beta = float(0.5 * (-a / b - c / e))
    direction = np.sign(d) * np.array([1.0, beta])

    # open box |x1|, |x2| < x_plus along vertex + t * direction, t > 0
    lo, hi = 0.0, math.inf
    for v, dv in zip(vertex, direction):
        t1, t2 = sorted(((-x_plus - v) / dv, (x_plus - v) / dv))
        lo, hi = max(lo, t1), min(hi, t2)

    def build(x1: float, x2: float):
        eps1, eps2 = _pair_masses(x1, x2, alpha)
        L1_hat = np.full(K, epsilon)
        L2_hat = np.full(K, epsilon)
        L1_hat[i], L1_hat[j] = alpha - eps2, eps2
        L2_hat[i], L2_hat[j] = eps1, alpha - eps1
        if min(L1_hat.min(), L2_hat.min()) < epsilon:
            return None
        ok, margins = misleads_both_states(m, u, L1_hat, L2_hat, S1, S2)
        return (L1_hat, L2_hat, eps1, eps2, min(margins)) if ok else None

    def finish(found, x1, x2, slope, halvings):
        L1_hat, L2_hat, eps1, eps2, _ = found
        params = KnownDivergenceParams(
            signal_pair=(i, j), n1=float(n1), n2=float(n2), d=d, x_plus=x_plus, x_minus=-x_plus,
            vertex=(float(vertex[0]), float(vertex[1])),
            literal_anchor=(float(n2 / (u * d)), float(n1 / (u * d))),
            beta=float(slope), x1=float(x1), x2=float(x2), eps1=eps1, eps2=eps2,
            alpha=alpha, halvings=halvings,
        )
        return Distortion(_readonly(L1_hat), _readonly(L2_hat), "known_divergence", params=params)

    t = 0.5 * (lo + hi)
    for halvings in range(MAX_HALVINGS + 1 if lo < hi else 0):
        x1, x2 = vertex + t * direction
        found = build(x1, x2)
        if found is not None:
            return finish(found, x1, x2, beta, halvings)
        t = lo + 0.5 * (t - lo)

    # Midpoint ray exhausted: scan rays over the whole cone (uniform in angle,
    # so very wide cones keep resolution at both edges) and keep the admissible
    # point with the largest worst-case margin.
    angles = np.linspace(math.atan(-a / b), math.atan(-c / e), SCAN_SLOPES + 2)[1:-1]
    slopes = np.tan(angles)
    rays = np.sign(d) * np.stack([np.ones_like(slopes), slopes], axis=1)
    with np.errstate(divide="ignore"):
        bounds = np.stack([(-x_plus - vertex) / rays, (x_plus - vertex) / rays])
    r_lo = np.maximum(0.0, np.min(bounds, axis=0).max(axis=1))
    r_hi = np.max(bounds, axis=0).min(axis=1)
    frac = np.linspace(0.0, 1.0, SCAN_STEPS + 2)[1:-1]
    t = r_lo[:, None] + frac[None, :] * (r_hi - r_lo)[:, None]
    X1 = vertex[0] + t * rays[:, 0:1]
    X2 = vertex[1] + t * rays[:, 1:2]
    with np.errstate(all="ignore"):
        denom = np.expm1(X2 - X1)
        E1 = alpha * np.expm1(X2) / denom
        E2 = alpha * np.expm1(-X1) / denom
        floor_ok = (np.minimum.reduce([E1, E2, alpha - E1, alpha - E2]) >= epsilon) & (r_hi > r_lo)[:, None]
        r1 = np.log(E1 / (alpha - E2))
        r2 = np.log((alpha - E1) / E2)
        m1 = u * (a * r1 + b * r2) - S1
        m2 = -u * (c * r1 + e * r2) - S2
    score = np.where(floor_ok, np.minimum(m1, m2), -np.inf)
    for flat in np.argsort(score, axis=None)[::-1][:8]:
        if not np.isfinite(score.flat[flat]) or score.flat[flat] <= 0:
            break
        row = flat // score.shape[1]
        x1, x2 = float(X1.flat[flat]), float(X2.flat[flat])
        found = build(x1, x2)
        if found is not None:
            log.info("known-divergence midpoint ray infeasible; using scanned point x=(%g, %g)", x1, x2)
            return finish(found, x1, x2, slopes[row], MAX_HALVINGS)
    return None


def echo_attack(m: AgentModel) -> Distortion:
    if is_informative(m):
        raise ContractError("echo_attack applies to uninformative adversaries only")
    return Distortion(m.L1, m.L1, "echo")


# -- unknown network divergences ----------------------------------------------

def _floored_proportional(weights, total: float, epsilon: float, label: str) -> tuple[np.ndarray, list[str]]:
    """Split ``total`` proportionally to ``weights`` with every share >= ``epsilon``.

    Shares that fall below the floor are pinned at ``epsilon`` and the rest is
    re-split among the others, repeated until nothing is below the floor.
    """
    w = np.asarray(weights, dtype=float)
    n = w.size
    pinned = np.zeros(n, dtype=bool)
    raw = None
    while True:
        free = ~pinned
        budget = total - epsilon * pinned.sum()
        wf = w[free]
        out = np.full(n, epsilon)
        out[free] = wf / wf.sum() * budget if wf.sum() > 0 else budget / free.sum()
        if raw is None:
            raw = out.copy()
        low = free & (out < epsilon)
        if not low.any():
            break
        pinned |= low
    events = [
        f"{label}[{k}]: {raw[k]:.6g} raised to epsilon={epsilon:g}"
        for k in np.flatnonzero(pinned)
    ]
    for ev in events:
        log.info("epsilon clamp %s", ev)
    return out, events


def mixed_confidence_attack(m: AgentModel, prior=(0.5, 0.5), epsilon: float = DEFAULT_EPSILON) -> Distortion:
    """Optimal distortion when some symbols favor theta_1 and others theta_2.

    ``L_hat_j`` puts ``epsilon`` on every symbol that favors ``theta_j`` and
    spreads the rest in proportion to ``|Z|`` over the remaining symbols.
    """
    check_epsilon(epsilon, [m.alphabet_size])
    part = confidence_partition(relative_confidence(m, prior))
    if not part.D1 or not part.D2:
        raise RegimeError("pure confidence regime (one of D1/D2 is empty): use pure_confidence_attack")
    pmfs, clamped = [], []
    for label, own in (("L1", part.D1), ("L2", part.D2)):
        rest = [z for z in range(m.alphabet_size) if z not in own]
        pmf = np.full(m.alphabet_size, epsilon)
        shares, ev = _floored_proportional(
            np.abs(part.Z[rest]), 1.0 - len(own) * epsilon, epsilon, label
        )
        pmf[rest] = shares
        pmfs.append(_readonly(pmf))
        clamped += ev
    return Distortion(pmfs[0], pmfs[1], "mixed", tuple(clamped))


def pure_confidence_attack(m: AgentModel, prior=(0.5, 0.5), epsilon: float = DEFAULT_EPSILON) -> Distortion:
    """Optimal distortion when every symbol favors the same hypothesis.

    For the favored hypothesis, all spare mass goes to the symbol with the
    smallest ``|Z|`` (lowest index on ties); the other PMF is proportional
    to ``|Z|``.
    """
    K = m.alphabet_size
    check_epsilon(epsilon, [K])
    part = confidence_partition(relative_confidence(m, prior))
    if part.D1 and part.D2:
        raise RegimeError("mixed confidence regime (D1 and D2 both non-empty): use mixed_confidence_attack")
    full = 0 if not part.D2 else 1
    absZ = np.abs(part.Z)
    concentrated = np.full(K, epsilon)
    concentrated[int(np.argmin(absZ))] = 1.0 - (K - 1) * epsilon
    label = "L2" if full == 0 else "L1"
    spread, clamped = _floored_proportional(absZ, 1.0, epsilon, label)
    pair = [None, None]
    pair[full] = _readonly(concentrated)
    pair[1 - full] = _readonly(spread)
    return Distortion(pair[0], pair[1], "pure", tuple(clamped))


def asud_attack(m: AgentModel, prior=(0.5, 0.5), epsilon: float = DEFAULT_EPSILON) -> Distortion:
    part = confidence_partition(relative_confidence(m, prior))
    if part.D1 and part.D2:
        return mixed_confidence_attack(m, prior, epsilon)
    return pure_confidence_attack(m, prior, epsilon)


def asud_objectives(Z, L1_hat, L2_hat) -> tuple[float, float]:
    """The two per-agent subproblem values ``sum Z log L1_hat`` (minimized)
    and ``sum Z log L2_hat`` (maximized)."""
    Z = np.asarray(Z, dtype=float)
    return float(np.dot(Z, np.log(L1_hat))), float(np.dot(Z, np.log(L2_hat)))


def random_attack(m: AgentModel, epsilon: float, rng: np.random.Generator) -> Distortion:
    """Both PMFs uniform on ``{x in simplex : x >= epsilon}``."""
    K = m.alphabet_size
    check_epsilon(epsilon, [K])
    scale = 1.0 - K * epsilon
    L1_hat = epsilon + scale * rng.dirichlet(np.ones(K))
    L2_hat = epsilon + scale * rng.dirichlet(np.ones(K))
    return Distortion(_readonly(L1_hat), _readonly(L2_hat), "random")


# -- assembling a network-wide attack ----------------------------------------

def materialize_attack(
    family: str,
    net,
    models: Sequence[AgentModel],
    centrality=None,
    *,
    prior=(0.5, 0.5),
    epsilon: float | None = None,
    rng: np.random.Generator | None = None,
    divergences: tuple[float, float] | None = None,
    u_override: float | None = None,
) -> AttackSpec:
    """Build every malicious agent's distortion for one attack family.

    ``known_divergence`` needs the centrality vector unless both
    ``divergences`` and ``u_override`` are given; ``random`` needs ``rng``.
    """
    if family not in FAMILIES:
        raise ContractError(f"unknown attack family {family!r}; expected one of {FAMILIES}")
    prior = _check_prior(prior)
    if epsilon is None:
        epsilon = DEFAULT_KNOWN_DIVERGENCE_EPSILON if family == "known_divergence" else DEFAULT_EPSILON
    if family != "honest":
        check_epsilon(epsilon, [mdl.alphabet_size for mdl in models])

    out: dict[int, Distortion] = {}
    if family == "known_divergence":
        if divergences is None:
            if centrality is None:
                raise ContractError("known_divergence needs the centrality vector or explicit divergences")
            divergences = tuple(network_divergence(net, centrality, models, s) for s in (0, 1))
        S1, S2 = divergences
    for k in net.malicious:
        mdl = models[k]
        if family == "honest":
            out[k] = Distortion(mdl.L1, mdl.L2, "honest")
        elif family == "asud":
            out[k] = asud_attack(mdl, prior, epsilon)
        elif family == "random":
            if rng is None:
                raise ContractError("random attack needs an rng stream")
            out[k] = random_attack(mdl, epsilon, rng)
        elif not is_informative(mdl):
            out[k] = echo_attack(mdl)
        else:
            u_k = u_override if u_override is not None else float(centrality[k])
            out[k] = known_divergence_attack(mdl, u_k, S1, S2, epsilon)
    return AttackSpec(family, prior, epsilon, out)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a
