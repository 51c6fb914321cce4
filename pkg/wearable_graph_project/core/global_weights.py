"""Long-term edge weights: prior knowledge updated by population and then individual evidence.

All beliefs live on the Fisher-z scale with diagonal covariance, so every
neighbor of a primary node is updated independently. The trust parameters
alpha multiply the precision of the observed correlation (effective variance
V / alpha).
"""
import logging
import math
from enum import Enum
from typing import List, Optional, Sequence, Tuple
import numpy as np
from pydantic import BaseModel, Field
from wearable_graph_project.config.config import RetrievalConfig
from wearable_graph_project.core.errors import ArgumentError, GraphInvariantError
from wearable_graph_project.core.graph_store import neighborhood
from wearable_graph_project.core.ingestion import paired_observations
from wearable_graph_project.core.state import (
    EdgeWeightBundle, GaussianBelief, HbmConfig, KnowledgeGraph, NeighborWeights, Node, Observation, SubjectData,
)
from wearable_graph_project.core.stats_kernel import FISHER_EPSILON, fisher_z, logit, spearman, squash

logger = logging.getLogger(__name__)

Pairs = Sequence[Tuple[float, float]]


class GlobalStrategy(str, Enum):
    HBM = "hbm"
    PRIOR = "prior"
    POPULATION = "population"
    INDIVIDUAL = "individual"


def hbm_config(cfg: RetrievalConfig, default_prior_var: float = 1.0) -> HbmConfig:
    return HbmConfig(
        alpha_pop=cfg.alpha_pop,
        alpha_ind=cfg.alpha_ind,
        min_samples=cfg.min_samples,
        gamma_global=cfg.gamma_global,
        default_prior_var=default_prior_var,
    )


def prior_belief(graph: KnowledgeGraph, x: str, neighbors: Sequence[str], gamma_global: float,
                 prior_var: Sequence[float]) -> GaussianBelief:
    """Places each stored edge weight on the z scale so that squash(gamma * mean) gives the weight back."""
    if len(prior_var) != len(neighbors):
        raise ArgumentError(f"prior_var has {len(prior_var)} entries for {len(neighbors)} neighbors")
    if gamma_global <= 0:
        raise ArgumentError(f"gamma_global must be positive, got {gamma_global}")
    means = []
    for y in neighbors:
        edge = graph.edge(x, y)
        if edge is None:
            raise GraphInvariantError(f"No edge between {x!r} and {y!r}")
        # logit is undefined at exactly 1.0
        w = min(edge.prior_weight, 1.0 - FISHER_EPSILON)
        means.append(logit(w) / gamma_global)
    return GaussianBelief(mean=tuple(means), var=tuple(float(v) for v in prior_var))


def empirical_relationships(data: Sequence[Optional[Pairs]], min_samples: int = 10) -> Observation:
    """Correlation evidence per neighbor; None marks a neighbor without numeric data.

    The relationship strength is |spearman|, placed on the z scale with
    sampling variance 1/(n-3).
    """
    value, var, valid, n, r = [], [], [], [], []
    for pairs in data:
        est = spearman(pairs or [], min_samples) if pairs is not None else None
        if est is None or not est.valid or est.n <= 3:
            value.append(None)
            var.append(None)
            valid.append(False)
            n.append(est.n if est is not None else 0)
            r.append(None)
            continue
        strength = abs(est.r)
        value.append(fisher_z(strength))
        var.append(1.0 / (est.n - 3))
        valid.append(True)
        n.append(est.n)
        r.append(strength)
    return Observation(value=tuple(value), var=tuple(var), valid=tuple(valid), n=tuple(n), r=tuple(r))


def _check_dimensions(prior: GaussianBelief, *observations: Observation) -> None:
    for obs in observations:
        if len(obs) != len(prior.mean):
            raise ArgumentError(f"Observation covers {len(obs)} neighbors, belief covers {len(prior.mean)}")
    if any(v <= 0 for v in prior.var):
        raise ArgumentError("Belief variances must be positive")
    for obs in observations:
        if any(ok and v <= 0 for ok, v in zip(obs.valid, obs.var)):
            raise ArgumentError("Observation variances must be positive")


def _precision_terms(obs: Observation, alpha: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    mask = np.array(obs.valid, dtype=bool)
    values = np.array([v if ok else 0.0 for v, ok in zip(obs.value, obs.valid)], dtype=float)
    variances = np.array([v if ok else 1.0 for v, ok in zip(obs.var, obs.valid)], dtype=float)
    precision = np.where(mask, alpha / variances, 0.0)
    return mask, values, precision


def _update(belief: GaussianBelief, obs: Observation, alpha: float) -> GaussianBelief:
    mean = np.array(belief.mean, dtype=float)
    var = np.array(belief.var, dtype=float)
    mask, values, precision = _precision_terms(obs, alpha)
    post_var = 1.0 / (1.0 / var + precision)
    post_mean = post_var * (mean / var + precision * values)
    # absent evidence leaves the belief untouched
    post_var = np.where(mask, post_var, var)
    post_mean = np.where(mask, post_mean, mean)
    return GaussianBelief(mean=tuple(post_mean.tolist()), var=tuple(post_var.tolist()))


def hbm_posterior(prior: GaussianBelief, pop: Observation, ind: Observation,
                  cfg: HbmConfig) -> Tuple[GaussianBelief, GaussianBelief]:
    """Two-stage update: prior -> population posterior -> individual posterior."""
    _check_dimensions(prior, pop, ind)
    pop_belief = _update(prior, pop, cfg.alpha_pop)
    ind_belief = _update(pop_belief, ind, cfg.alpha_ind)
    return pop_belief, ind_belief


def one_shot_posterior(prior: GaussianBelief, pop: Observation, ind: Observation, cfg: HbmConfig) -> GaussianBelief:
    """Joint update with both evidence levels at once. Agrees with hbm_posterior's second stage."""
    _check_dimensions(prior, pop, ind)
    mean = np.array(prior.mean, dtype=float)
    var = np.array(prior.var, dtype=float)
    _, z_pop, p_pop = _precision_terms(pop, cfg.alpha_pop)
    _, z_ind, p_ind = _precision_terms(ind, cfg.alpha_ind)
    precision = 1.0 / var + p_pop + p_ind
    b = mean / var + p_pop * z_pop + p_ind * z_ind
    return GaussianBelief(mean=tuple((b / precision).tolist()), var=tuple((1.0 / precision).tolist()))


def posterior_correlation(belief: GaussianBelief) -> List[Tuple[float, float]]:
    """Back-transforms each z-scale belief to (r, delta-method variance of r)."""
    out = []
    for mu, var in zip(belief.mean, belief.var):
        r = math.tanh(mu)
        out.append((r, (1.0 - r * r) ** 2 * var))
    return out


class NodeEvidence(BaseModel):
    """Everything the update needs for one primary node; reusable across alpha values."""
    primary_id: str
    primary_name: str
    neighbors: List[Node] = Field(default_factory=list)
    w_prior: List[float] = Field(default_factory=list)
    pop: Observation
    ind: Observation
    prior_var: Tuple[float, ...] = ()


def _pairs_for(node: Node, other: Node, subjects: Sequence[SubjectData]) -> Optional[List[Tuple[float, float]]]:
    if not (node.is_numeric and other.is_numeric):
        return None
    pooled: List[Tuple[float, float]] = []
    for subject in subjects:
        pooled.extend(paired_observations(subject, node.metric_key, other.metric_key))
    return pooled


def collect_evidence(graph: KnowledgeGraph, cohort: Sequence[SubjectData], subject: Optional[SubjectData],
                     x: str, cfg: HbmConfig, exclude: Sequence[str] = ()) -> NodeEvidence:
    """Population evidence pools every cohort member's paired days; individual evidence uses the subject alone."""
    primary = graph.nodes.get(x)
    ring = [(n, e) for n, e in neighborhood(graph, x) if n.id not in exclude]
    neighbors = [n for n, _ in ring]
    pop = empirical_relationships([_pairs_for(primary, n, cohort) for n in neighbors], cfg.min_samples)
    subjects = [subject] if subject is not None else []
    ind = empirical_relationships([_pairs_for(primary, n, subjects) for n in neighbors], cfg.min_samples)
    prior_var = tuple(v if ok else cfg.default_prior_var for v, ok in zip(pop.var, pop.valid))
    logger.debug(f"Evidence for {primary.name}: {sum(pop.valid)}/{len(neighbors)} population, "
                 f"{sum(ind.valid)}/{len(neighbors)} individual")
    return NodeEvidence(
        primary_id=x,
        primary_name=primary.name,
        neighbors=neighbors,
        w_prior=[e.prior_weight for _, e in ring],
        pop=pop,
        ind=ind,
        prior_var=prior_var,
    )


def weights_from_evidence(graph: KnowledgeGraph, evidence: NodeEvidence, cfg: HbmConfig,
                          strategy: GlobalStrategy = GlobalStrategy.HBM) -> EdgeWeightBundle:
    ids = [n.id for n in evidence.neighbors]
    prior = prior_belief(graph, evidence.primary_id, ids, cfg.gamma_global, evidence.prior_var)
    pop_belief, ind_belief = hbm_posterior(prior, evidence.pop, evidence.ind, cfg)
    gamma = cfg.gamma_global
    posterior_r = posterior_correlation(ind_belief)

    rows = []
    for i, node in enumerate(evidence.neighbors):
        pop_ok, ind_ok = evidence.pop.valid[i], evidence.ind.valid[i]
        w_prior = evidence.w_prior[i]
        if ind_ok:
            path = "individual"
        elif pop_ok:
            path = "population"
        else:
            path = "prior"

        if strategy == GlobalStrategy.HBM:
            if path == "individual":
                w_global = squash(ind_belief.mean[i], gamma)
            elif path == "population":
                w_global = squash(pop_belief.mean[i], gamma)
            else:
                w_global = w_prior
        elif strategy == GlobalStrategy.POPULATION:
            w_global = squash(evidence.pop.value[i], gamma) if pop_ok else w_prior
        elif strategy == GlobalStrategy.INDIVIDUAL:
            w_global = squash(evidence.ind.value[i], gamma) if ind_ok else w_prior
        else:
            w_global = w_prior

        rows.append(NeighborWeights(
            neighbor_id=node.id,
            neighbor_name=node.name,
            numeric=node.is_numeric,
            importance=node.importance,
            w_prior=w_prior,
            z_prior=prior.mean[i],
            r_pop=evidence.pop.r[i],
            n_pop=evidence.pop.n[i],
            r_ind=evidence.ind.r[i],
            n_ind=evidence.ind.n[i],
            mu_pop=pop_belief.mean[i],
            var_pop=pop_belief.var[i],
            mu_ind=ind_belief.mean[i],
            var_ind=ind_belief.var[i],
            r_post=posterior_r[i][0],
            r_post_var=posterior_r[i][1],
            w_global=w_global,
            fallback_path=path,
        ))
        if path == "prior":
            logger.debug(f"{evidence.primary_name} -> {node.name}: no usable data, keeping prior weight {w_prior}")
    return EdgeWeightBundle(primary_id=evidence.primary_id, primary_name=evidence.primary_name, neighbors=rows)


def global_weights_for_node(graph: KnowledgeGraph, cohort: Sequence[SubjectData], subject: Optional[SubjectData],
                            x: str, cfg: HbmConfig, strategy: GlobalStrategy = GlobalStrategy.HBM,
                            exclude: Sequence[str] = ()) -> EdgeWeightBundle:
    evidence = collect_evidence(graph, cohort, subject, x, cfg, exclude)
    bundle = weights_from_evidence(graph, evidence, cfg, strategy)
    paths = [n.fallback_path for n in bundle.neighbors]
    logger.info(f"Global weights for {bundle.primary_name}: {paths.count('individual')} individual, "
                f"{paths.count('population')} population, {paths.count('prior')} prior")
    return bundle
