"""Retrieval quality metrics over simulator datasets.

Protocol: each eligible event contributes one query (its first camera view);
the corpus is the paired second view plus sampled distractor clips from
other events. Reported: recall@1, recall@5, mean per-query AUC.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sketchmatch.encoder.model import EncoderWeights, forward, pad_grid
from sketchmatch.geometry import FeatureGrid, GeometryError
from sketchmatch.simulator import LabeledClip
from sketchmatch.store import clip_to_grid


@dataclass(frozen=True)
class RetrievalMetrics:
    recall_at_1: float
    recall_at_5: float
    auc: float
    n_queries: int
    n_distractors: int

    def to_json(self) -> dict:
        return {
            "recall_at_1": self.recall_at_1,
            "recall_at_5": self.recall_at_5,
            "auc": self.auc,
            "n_queries": self.n_queries,
            "n_distractors": self.n_distractors,
        }


def embed_grids(
    weights: EncoderWeights, grids: list[FeatureGrid], chunk: int = 64
) -> np.ndarray:
    """Batched embeddings (len(grids), d_embed), padding objects as needed."""
    from sketchmatch.encoder.training import stack_grids

    cfg = weights.config
    out = np.empty((len(grids), cfg.d_embed))
    for start in range(0, len(grids), chunk):
        part = grids[start : start + chunk]
        values, mask = stack_grids(part)
        emb, _ = forward(weights, values, mask)
        out[start : start + len(part)] = emb
    return out


def clips_to_embeddings(
    weights: EncoderWeights, clips: list[LabeledClip]
) -> tuple[np.ndarray, list[int]]:
    """Embeddings plus the indices of clips that could be featurized."""
    grids, kept = [], []
    for i, clip in enumerate(clips):
        if len(clip.tracks) > weights.config.max_objects:
            continue
        try:
            grids.append(clip_to_grid(clip, T=weights.config.T))
        except GeometryError:
            continue
        kept.append(i)
    return embed_grids(weights, grids), kept


def pairwise_auc(pos_scores: np.ndarray, neg_scores: np.ndarray) -> float:
    """P(positive score > negative score), ties counted half."""
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("need both positive and negative scores")
    greater = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return float((greater + 0.5 * ties) / (pos.size * neg.size))


def pair_retrieval_metrics(
    weights: EncoderWeights,
    clips: list[LabeledClip],
    n_distractors: int = 99,
    seed: int = 0,
) -> RetrievalMetrics:
    """Paired-view retrieval over a dataset's clips.

    For each event with at least two embeddable views, the lowest-index
    camera is the query, the next one the positive, and n_distractors clips
    are drawn from other events.
    """
    embeddings, kept = clips_to_embeddings(weights, clips)
    by_event: dict[int, list[int]] = {}
    for row, clip_idx in enumerate(kept):
        by_event.setdefault(clips[clip_idx].event_id, []).append(row)

    eligible = sorted(e for e, rows in by_event.items() if len(rows) >= 2)
    if not eligible:
        raise ValueError("no event has two embeddable camera views")

    rng = np.random.default_rng(seed)
    ranks = []
    aucs = []
    used_distractors = None
    for event in eligible:
        q_row, pos_row = by_event[event][0], by_event[event][1]
        others = [
            row
            for e, rows in by_event.items()
            if e != event
            for row in rows
        ]
        others = sorted(others)
        if len(others) > n_distractors:
            chosen = rng.choice(len(others), size=n_distractors, replace=False)
            neg_rows = [others[i] for i in sorted(chosen)]
        else:
            neg_rows = others
        used_distractors = len(neg_rows) if used_distractors is None else used_distractors

        q = embeddings[q_row]
        pos_score = float(q @ embeddings[pos_row])
        neg_scores = embeddings[neg_rows] @ q
        ranks.append(1 + int(np.sum(neg_scores > pos_score)))
        aucs.append(pairwise_auc(np.array([pos_score]), neg_scores))

    ranks = np.asarray(ranks)
    return RetrievalMetrics(
        recall_at_1=float(np.mean(ranks <= 1)),
        recall_at_5=float(np.mean(ranks <= 5)),
        auc=float(np.mean(aucs)),
        n_queries=len(ranks),
        n_distractors=int(used_distractors or 0),
    )
