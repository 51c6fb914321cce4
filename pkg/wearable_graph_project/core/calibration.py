"""Chooses alpha_pop and alpha_ind where keeping the earlier ranking and following the data balance out.

For each alpha on a grid the stage's posterior means are recomputed and
compared by Kendall tau with (a) the previous stage's means and (b) the
observed correlations. The first crossing of the two curves is the chosen
alpha.
"""
import io
import logging
import math
from typing import Dict, List, Literal, Optional, Sequence, Tuple
import numpy as np
import pandas as pd
from wearable_graph_project.core.errors import ArgumentError, CalibrationError, InsufficientDataError
from wearable_graph_project.core.global_weights import NodeEvidence, collect_evidence, hbm_posterior, prior_belief
from wearable_graph_project.core.state import (
    CalibrationResult, HbmConfig, KnowledgeGraph, StageCurves, SubjectData, TauCurve,
)
from wearable_graph_project.core.stats_kernel import kendall_tau

logger = logging.getLogger(__name__)

Stage = Literal["population", "individual"]
AUX_PRIOR = "individual-aux-prior"
AUX_POPULATION = "individual-aux-population"
CURVE_COLUMNS = ["alpha", "tau_preserve", "tau_align", "stage"]


def default_alpha_grid(lo: float = 1e-2, hi: float = 1e2, points: int = 25) -> Tuple[float, ...]:
    if lo <= 0 or hi <= lo:
        raise ArgumentError(f"Grid bounds must satisfy 0 < min < max, got {lo}, {hi}")
    if points < 2:
        raise ArgumentError("An alpha grid needs at least 2 points")
    return tuple(float(a) for a in np.logspace(math.log10(lo), math.log10(hi), points))


def parse_grid(text: str) -> Tuple[float, ...]:
    """Parses 'min,max,points' into a log-spaced grid."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ArgumentError(f"Grid must look like 'min,max,points', got {text!r}")
    try:
        lo, hi, points = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ArgumentError(f"Grid must look like 'min,max,points', got {text!r}")
    return default_alpha_grid(lo, hi, points)


def _check_grid(grid: Sequence[float]) -> Tuple[float, ...]:
    grid = tuple(float(a) for a in grid)
    if len(grid) < 2:
        raise ArgumentError("An alpha grid needs at least 2 points")
    if grid[0] <= 0 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ArgumentError("Alpha grid must be positive and strictly increasing")
    return grid


def _mean_or_nan(values: List[float]) -> float:
    return float(np.mean(values)) if values else math.nan


def _stage_taus(stage: Stage, graph: KnowledgeGraph, evidences: Sequence[NodeEvidence], cfg: HbmConfig) -> Dict[str, float]:
    preserve, align, aux_prior, aux_pop = [], [], [], []
    for ev in evidences:
        ids = [n.id for n in ev.neighbors]
        prior = prior_belief(graph, ev.primary_id, ids, cfg.gamma_global, ev.prior_var)
        pop_belief, ind_belief = hbm_posterior(prior, ev.pop, ev.ind, cfg)

        if stage == "population":
            idx = [i for i, ok in enumerate(ev.pop.valid) if ok]
            if len(idx) < 2:
                continue
            post = [pop_belief.mean[i] for i in idx]
            preserve.append(kendall_tau([prior.mean[i] for i in idx], post))
            align.append(kendall_tau([ev.pop.value[i] for i in idx], post))
            continue

        idx = [i for i, ok in enumerate(ev.ind.valid) if ok]
        if len(idx) < 2:
            continue
        post = [ind_belief.mean[i] for i in idx]
        preserve.append(kendall_tau([pop_belief.mean[i] for i in idx], post))
        align.append(kendall_tau([ev.ind.value[i] for i in idx], post))
        aux_prior.append(kendall_tau([prior.mean[i] for i in idx], post))
        both = [i for i in idx if ev.pop.valid[i]]
        if len(both) >= 2:
            aux_pop.append(kendall_tau([ev.pop.value[i] for i in both], [ind_belief.mean[i] for i in both]))

    return {
        "preserve": _mean_or_nan(preserve),
        "align": _mean_or_nan(align),
        AUX_PRIOR: _mean_or_nan(aux_prior),
        AUX_POPULATION: _mean_or_nan(aux_pop),
    }


def _eligible(stage: Stage, evidences: Sequence[NodeEvidence]) -> List[NodeEvidence]:
    if stage == "population":
        # population evidence does not depend on the subject; one entry per primary
        seen, unique = set(), []
        for ev in evidences:
            if ev.primary_id not in seen and sum(ev.pop.valid) >= 2:
                seen.add(ev.primary_id)
                unique.append(ev)
        return unique
    return [ev for ev in evidences if sum(ev.ind.valid) >= 2]


def _sweep(stage: Stage, graph: KnowledgeGraph, evidences: Sequence[NodeEvidence], grid: Sequence[float],
           cfg: HbmConfig) -> Dict[str, List[float]]:
    grid = _check_grid(grid)
    usable = _eligible(stage, evidences)
    if not usable:
        raise InsufficientDataError(f"No sampled node has 2 or more valid neighbors for the {stage} stage")
    field = "alpha_pop" if stage == "population" else "alpha_ind"
    series: Dict[str, List[float]] = {}
    for alpha in grid:
        taus = _stage_taus(stage, graph, usable, cfg.model_copy(update={field: alpha}))
        for label, value in taus.items():
            series.setdefault(label, []).append(value)
    logger.info(f"Computed {stage} tau curves over {len(grid)} alphas for {len(usable)} nodes.")
    return series


def tau_curves_from_evidence(stage: Stage, graph: KnowledgeGraph, evidences: Sequence[NodeEvidence],
                             grid: Sequence[float], cfg: HbmConfig) -> Tuple[TauCurve, TauCurve]:
    """For the individual stage cfg.alpha_pop is held fixed."""
    grid = _check_grid(grid)
    series = _sweep(stage, graph, evidences, grid, cfg)
    return (TauCurve(alphas=grid, taus=tuple(series["preserve"]), label=f"{stage}-preserve"),
            TauCurve(alphas=grid, taus=tuple(series["align"]), label=f"{stage}-align"))


def diagnostic_curves(graph: KnowledgeGraph, evidences: Sequence[NodeEvidence], grid: Sequence[float],
                      cfg: HbmConfig) -> List[TauCurve]:
    """tau(prior, individual) and tau(population R, individual) over the individual grid. Reported only."""
    grid = _check_grid(grid)
    series = _sweep("individual", graph, evidences, grid, cfg)
    curves = []
    for label in (AUX_PRIOR, AUX_POPULATION):
        values = series[label]
        if any(math.isnan(v) for v in values):
            logger.warning(f"Skipping diagnostic curve {label}: too few nodes with valid evidence.")
            continue
        curves.append(TauCurve(alphas=grid, taus=tuple(values), label=label))
    return curves


def evidence_sample(graph: KnowledgeGraph, cohort: Sequence[SubjectData], subjects: Sequence[SubjectData],
                    cfg: HbmConfig, nodes: Optional[Sequence[str]] = None) -> List[NodeEvidence]:
    """Evidence for every (subject, primary node) pair; primaries default to every numeric node."""
    if nodes is None:
        nodes = sorted(n.id for n in graph.nodes.values() if n.is_numeric)
    return [collect_evidence(graph, cohort, subject, x, cfg) for subject in subjects for x in nodes]


def tau_curves(stage: Stage, graph: KnowledgeGraph, cohort: Sequence[SubjectData], subjects: Sequence[SubjectData],
               grid: Sequence[float], cfg: HbmConfig, nodes: Optional[Sequence[str]] = None) -> Tuple[TauCurve, TauCurve]:
    return tau_curves_from_evidence(stage, graph, evidence_sample(graph, cohort, subjects, cfg, nodes), grid, cfg)


def find_intersection(preserve: TauCurve, align: TauCurve) -> Optional[float]:
    """First sign change of preserve - align, linearly interpolated in alpha; None when the curves never cross."""
    if preserve.alphas != align.alphas:
        raise ArgumentError("Curves must share the same alpha grid")
    alphas = preserve.alphas
    diff = [p - a for p, a in zip(preserve.taus, align.taus)]
    for i, d in enumerate(diff):
        if d == 0:
            return alphas[i]
        if i + 1 < len(diff) and d * diff[i + 1] < 0:
            step = d / (d - diff[i + 1])
            return alphas[i] + step * (alphas[i + 1] - alphas[i])
    return None


def calibrate_from_evidence(graph: KnowledgeGraph, evidences: Sequence[NodeEvidence], grid: Sequence[float],
                            cfg: HbmConfig) -> CalibrationResult:
    grid = _check_grid(grid)
    pop_preserve, pop_align = tau_curves_from_evidence("population", graph, evidences, grid, cfg)
    alpha_pop = find_intersection(pop_preserve, pop_align)
    population = StageCurves(stage="population", preserve=pop_preserve, align=pop_align, alpha=alpha_pop)
    if alpha_pop is None:
        raise CalibrationError("Population curves do not intersect on the grid", curves=[population])
    logger.info(f"Calibrated alpha_pop = {alpha_pop:.4g}")

    frozen = cfg.model_copy(update={"alpha_pop": alpha_pop})
    ind_preserve, ind_align = tau_curves_from_evidence("individual", graph, evidences, grid, frozen)
    alpha_ind = find_intersection(ind_preserve, ind_align)
    individual = StageCurves(stage="individual", preserve=ind_preserve, align=ind_align, alpha=alpha_ind)
    if alpha_ind is None:
        raise CalibrationError("Individual curves do not intersect on the grid", curves=[population, individual])
    logger.info(f"Calibrated alpha_ind = {alpha_ind:.4g}")

    return CalibrationResult(
        alpha_pop=alpha_pop,
        alpha_ind=alpha_ind,
        population=population,
        individual=individual,
        diagnostics=diagnostic_curves(graph, evidences, grid, frozen),
    )


def calibrate(graph: KnowledgeGraph, cohort: Sequence[SubjectData], grid: Sequence[float], cfg: HbmConfig,
              subjects: Optional[Sequence[SubjectData]] = None, nodes: Optional[Sequence[str]] = None) -> CalibrationResult:
    """Population stage first, then the individual stage with alpha_pop frozen. subjects defaults to the cohort."""
    grid = _check_grid(grid)
    subjects = list(cohort) if subjects is None else list(subjects)
    return calibrate_from_evidence(graph, evidence_sample(graph, cohort, subjects, cfg, nodes), grid, cfg)


def curves_to_csv(result: CalibrationResult) -> str:
    rows = []
    for stage in (result.population, result.individual):
        for alpha, p, a in zip(stage.preserve.alphas, stage.preserve.taus, stage.align.taus):
            rows.append({"alpha": alpha, "tau_preserve": p, "tau_align": a, "stage": stage.stage})
    # diagnostics carry a single curve each; it goes in the preserve column
    for curve in result.diagnostics:
        for alpha, tau in zip(curve.alphas, curve.taus):
            rows.append({"alpha": alpha, "tau_preserve": tau, "tau_align": None, "stage": curve.label})
    buffer = io.StringIO()
    pd.DataFrame(rows, columns=CURVE_COLUMNS).to_csv(buffer, index=False, lineterminator="\n")
    return buffer.getvalue()
