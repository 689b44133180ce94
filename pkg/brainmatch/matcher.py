"""
Network matcher module for the brainmatch pipeline.

Scores every candidate component against a network template over the
partitioned dataset engine, ranks the scores, and selects the best-matching
component.

Pipeline: dataset of components -> zip with the replicated template ->
map metric -> collect -> rank.
"""

import logging
import time
from typing import List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict

from brainmatch import metrics
from brainmatch.metrics import MetricError, MetricKind, Template
from brainmatch.nifti_io import Volume
from brainmatch.pardata import ExecutionConfig, PartitionedDataset

# Configure logging
logger = logging.getLogger(__name__)


class EmptyInput(MetricError):
    """Raised when there are no components to score."""

    pass


class MixedMetrics(MetricError):
    """Raised when ranking scores produced by different metrics."""

    pass


class SimilarityScore(BaseModel):
    """
    Score of one component. rank is None until rank_scores assigns 1..N.
    """

    model_config = ConfigDict(frozen=True)

    component_index: int
    component_label: str
    metric: MetricKind
    value: float
    rank: Optional[int] = None


class MatchReport(BaseModel):
    """Ranked scores, the selected component and how long scoring took."""

    model_config = ConfigDict(frozen=True)

    scores: List[SimilarityScore]
    selected: int
    selected_label: str
    metric: MetricKind
    workers: int
    partition_count: int
    elapsed_seconds: float
    component_count: int
    zscore: bool = False


def score_components(
    components: Sequence[Volume],
    template: Template,
    metric: MetricKind,
    cfg: Optional[ExecutionConfig] = None,
    *,
    partition_count: Optional[int] = None,
    f_threshold: float = 0.0,
    zscore: bool = False,
) -> List[SimilarityScore]:
    """
    Computes one unranked score per component, in component order.

    Args:
        components: Candidate volumes, all with the template's dims
        template: Network template, shared read-only by every lane
        metric: Similarity metric to evaluate
        cfg: Worker lanes (defaults to the host CPU count)
        partition_count: Dataset partitions (defaults to cfg.workers)
        f_threshold: Candidate binarization threshold for Dice
        zscore: z-score template and each component before scoring

    Returns:
        List[SimilarityScore]: Scores with rank None

    Raises:
        EmptyInput: If components is empty
        DimMismatch: Naming the first component whose dims differ
        ZeroVariance: NCC or z-scoring of a constant volume
    """
    if not components:
        raise EmptyInput("No components to score")
    for index, component in enumerate(components):
        metrics.check_dims(component, template, index=index)

    cfg = cfg or ExecutionConfig()
    k = partition_count or cfg.workers
    if zscore:
        template = Template(metrics.zscore(template.volume), template.mask_threshold)

    logger.info(
        f"Scoring {len(components)} component(s) with {metric.value} "
        f"on {cfg.workers} worker(s), {k} partition(s)"
    )

    def evaluate(pair: Tuple[Volume, Template]) -> float:
        volume, shared = pair
        if zscore:
            volume = metrics.zscore(volume)
        return metrics.score(metric, volume, shared, f_threshold)

    dataset = PartitionedDataset.from_items(list(components), k, cfg)
    # Every element references the same template object; nothing is copied
    replicated = PartitionedDataset.from_items([template] * len(components), k, cfg)
    values = dataset.zip(replicated).map(evaluate).collect()

    return [
        SimilarityScore(
            component_index=index,
            component_label=component.label or f"comp_{index}",
            metric=metric,
            value=value,
        )
        for index, (component, value) in enumerate(zip(components, values))
    ]


def rank_scores(scores: Sequence[SimilarityScore]) -> List[SimilarityScore]:
    """
    Sorts scores best-first and assigns ranks 1..N.

    SSD ranks ascending, NCC and Dice descending; ties go to the lower
    component index.

    Raises:
        MixedMetrics: If scores come from more than one metric
    """
    if not scores:
        return []
    kinds = {s.metric for s in scores}
    if len(kinds) > 1:
        raise MixedMetrics(f"Cannot rank scores from several metrics: {sorted(k.value for k in kinds)}")
    kind = scores[0].metric

    def key(s: SimilarityScore):
        return (s.value if kind.lower_is_better else -s.value, s.component_index)

    ordered = sorted(scores, key=key)
    return [s.model_copy(update={"rank": rank}) for rank, s in enumerate(ordered, start=1)]


def extract_network(
    components: Sequence[Volume],
    template: Template,
    metric: MetricKind,
    cfg: Optional[ExecutionConfig] = None,
    *,
    partition_count: Optional[int] = None,
    f_threshold: float = 0.0,
    zscore: bool = False,
) -> Tuple[MatchReport, Volume]:
    """
    Scores and ranks all components and returns the winner.

    Returns:
        Tuple[MatchReport, Volume]: Full report and the rank-1 component, unmodified

    Raises:
        Same as score_components
    """
    cfg = cfg or ExecutionConfig()
    k = partition_count or cfg.workers

    start_time = time.perf_counter()
    scores = score_components(
        components,
        template,
        metric,
        cfg,
        partition_count=k,
        f_threshold=f_threshold,
        zscore=zscore,
    )
    ranked = rank_scores(scores)
    elapsed = time.perf_counter() - start_time

    best = ranked[0]
    report = MatchReport(
        scores=ranked,
        selected=best.component_index,
        selected_label=best.component_label,
        metric=metric,
        workers=cfg.workers,
        partition_count=k,
        elapsed_seconds=elapsed,
        component_count=len(ranked),
        zscore=zscore,
    )
    logger.info(
        f"Selected component {best.component_index} ({best.component_label}) "
        f"with {metric.value}={best.value:.9f} in {elapsed:.4f}s"
    )
    return report, components[best.component_index]
