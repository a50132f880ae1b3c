"""
Retrieval and compactness metrics of labelled embeddings. Neighbour rankings exclude the query itself and break
distance ties by the lower sample index.
"""

import typing as t

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.cluster import KMeans
from sklearn.metrics import normalized_mutual_info_score

from cellarium.warp import constants, exceptions, models, settings
from cellarium.warp.logging import logger
from cellarium.warp.loss import LabeledBatch, ProxySet
from cellarium.warp.seeding import stream_rng


def brute_force_neighbors(batch: LabeledBatch) -> np.ndarray:
    """
    Full neighbour ranking of every sample by exact Euclidean distance.

    :param batch: At most ``settings.MAX_BRUTE_FORCE_SAMPLES`` embeddings.
    :return: ``(N, N - 1)`` matrix whose row ``i`` lists all other samples from nearest to farthest.
    """
    n = len(batch)
    if n > settings.MAX_BRUTE_FORCE_SAMPLES:
        raise exceptions.MetricError(f"Brute force ranking is limited to {settings.MAX_BRUTE_FORCE_SAMPLES} samples")
    distances = cdist(batch.embeddings, batch.embeddings)
    np.fill_diagonal(distances, np.inf)
    return np.argsort(distances, axis=1, kind="stable")[:, : n - 1]


def _nearest(batch: LabeledBatch, depth: int) -> np.ndarray:
    # the first `depth` neighbours of every query, one block of queries at a time
    n = len(batch)
    ranking = np.empty((n, depth), dtype=np.int64)
    for start in range(0, n, settings.NEIGHBOR_CHUNK_ROWS):
        stop = min(start + settings.NEIGHBOR_CHUNK_ROWS, n)
        distances = cdist(batch.embeddings[start:stop], batch.embeddings)
        distances[np.arange(stop - start), np.arange(start, stop)] = np.inf
        ranking[start:stop] = np.argsort(distances, axis=1, kind="stable")[:, :depth]
    return ranking


def recall_at_k(batch: LabeledBatch, ks: t.Sequence[int]) -> t.Dict[int, float]:
    """
    Fraction of queries with at least one same-class sample among their ``K`` nearest neighbours.

    :param batch: Labelled embeddings.
    :param ks: Neighbourhood sizes, each in ``[1, N - 1]``.
    :return: Recall per ``K``.
    :raises MetricError: For a ``K`` outside ``[1, N - 1]``.
    """
    n = len(batch)
    for k in ks:
        if not 1 <= k < n:
            raise exceptions.MetricError(f"Recall@{k} needs 1 <= K < N = {n}")
    if not ks:
        return {}

    ranking = _nearest(batch, max(ks))
    hits = batch.labels[ranking] == batch.labels[:, np.newaxis]
    return {int(k): float(np.mean(np.any(hits[:, :k], axis=1))) for k in ks}


def map_at_r(batch: LabeledBatch) -> models.MapAtRResult:
    """
    MAP@R, R-precision and precision at 1, where ``R`` is the number of other samples of the query's class. Queries
    whose class has a single sample are skipped and tallied.

    :raises MetricError: If every query is skipped.
    """
    labels = batch.labels
    classes, counts = np.unique(labels, return_counts=True)
    r_values = counts[np.searchsorted(classes, labels)] - 1
    if r_values.max(initial=0) == 0:
        raise exceptions.MetricError("MAP@R needs at least one class with two samples")

    ranking = _nearest(batch, int(r_values.max()))
    hits = (labels[ranking] == labels[:, np.newaxis]).astype(np.float64)

    map_scores, r_precisions, first_hits = [], [], []
    for query in np.flatnonzero(r_values > 0):
        r = int(r_values[query])
        relevant = hits[query, :r]
        precision_at = np.cumsum(relevant) / np.arange(1, r + 1)
        map_scores.append(np.sum(precision_at * relevant) / r)
        r_precisions.append(np.sum(relevant) / r)
        first_hits.append(relevant[0])

    skipped = int(np.count_nonzero(r_values == 0))
    if skipped:
        logger.debug(f"MAP@R skipped {skipped} queries of single-sample classes")
    return models.MapAtRResult(
        map_at_r=float(np.mean(map_scores)),
        rp=float(np.mean(r_precisions)),
        p_at_1=float(np.mean(first_hits)),
        num_queries=len(map_scores),
        skipped=skipped,
    )


def nmi(batch: LabeledBatch, kmeans_seed: int) -> models.NmiResult:
    """
    Normalised mutual information (arithmetic mean of the entropies) between the labels and a k-means clustering
    with one cluster per class (k-means++ seeding, ``settings.NMI_KMEANS_RESTARTS`` restarts, best inertia).

    :param batch: Labelled embeddings with at least two classes.
    :param kmeans_seed: Seed of the clustering.
    :return: The score, or 0 flagged as degenerate when all embeddings coincide.
    """
    num_classes = np.unique(batch.labels).size
    if num_classes < 2:
        raise exceptions.MetricError("NMI needs at least two classes")
    if np.all(batch.embeddings == batch.embeddings[0]):
        logger.warning("All embeddings coincide, NMI is reported as 0")
        return models.NmiResult(value=0.0, degenerate=True)

    random_state = int(stream_rng(kmeans_seed, constants.RandomStream.KMEANS).integers(np.iinfo(np.int32).max))
    kmeans = KMeans(
        n_clusters=num_classes, init="k-means++", n_init=settings.NMI_KMEANS_RESTARTS, random_state=random_state
    )
    clusters = kmeans.fit_predict(batch.embeddings)
    value = normalized_mutual_info_score(batch.labels, clusters, average_method="arithmetic")
    return models.NmiResult(value=float(value))


def avg_dtp(batch: LabeledBatch, proxies: ProxySet) -> models.DtpReport:
    """
    Average distance to proxy: mean distance of each class's embeddings to its proxy, then the unweighted mean over
    the classes present in the batch.
    """
    if len(batch) == 0:
        raise exceptions.MetricError("AvgDTP of an empty batch is undefined")
    if batch.dim != proxies.dim:
        raise exceptions.MetricError(f"Embedding dimension {batch.dim} does not match proxy dimension {proxies.dim}")
    if batch.labels.max() >= proxies.num_classes:
        raise exceptions.MetricError(f"Class {batch.labels.max()} has no proxy")

    distances = np.linalg.norm(batch.embeddings - proxies.proxies[batch.labels], axis=1)
    per_class = {int(c): float(np.mean(distances[batch.labels == c])) for c in np.unique(batch.labels)}
    return models.DtpReport(avg_dtp=float(np.mean(list(per_class.values()))), per_class_dtp=per_class)


def evaluate_retrieval(
    batch: LabeledBatch,
    ks: t.Sequence[int] = settings.DEFAULT_RECALL_KS,
    kmeans_seed: int = 0,
    proxies: t.Optional[ProxySet] = None,
) -> models.RetrievalResult:
    """
    All retrieval metrics of a set of embeddings, plus AvgDTP when proxies are given. Recall sizes ``K >= N`` are
    dropped with a warning.
    """
    usable = [k for k in ks if k < len(batch)]
    if len(usable) < len(ks):
        logger.warning(f"Dropping Recall@K for K >= {len(batch)} samples: {sorted(set(ks) - set(usable))}")
    ranking = map_at_r(batch)
    return models.RetrievalResult(
        recall_at=recall_at_k(batch, usable),
        nmi=nmi(batch, kmeans_seed).value,
        map_at_r=ranking.map_at_r,
        rp=ranking.rp,
        p_at_1=ranking.p_at_1,
        avg_dtp=avg_dtp(batch, proxies).avg_dtp if proxies is not None else None,
    )
