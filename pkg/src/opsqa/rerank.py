"""Score fusion for re-ranking: raw combinations and a boosted-tree combiner.

Every candidate document carries a retriever score and a reader score.  Four
fixed combiners (retriever_only, qa_only, multiply, zscore_add) plus a learned
one: gradient-boosted regression trees over exactly four features per
candidate (both raw scores and their per-query z-scores), trained pointwise
with squared error against binary gold labels.

The trees are fit by exact greedy variance-reduction splits; the random seed
only breaks ties between equal-gain splits, so training is deterministic and
the serialized model is byte-identical across runs.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .index import RankedResult

logger = logging.getLogger(__name__)

FEATURE_NAMES = ("retriever_raw", "qa_raw", "retriever_z", "qa_z")
COMBINERS = ("retriever_only", "qa_only", "multiply", "zscore_add", "gbrt")

_GAIN_EPS = 1e-12


class RerankError(Exception):
    """Invalid combiner input or model file."""


@dataclass(frozen=True)
class CandidateFeatures:
    """Per-candidate fusion inputs; z fields are per-query standardizations."""

    retriever_raw: float
    qa_raw: float
    retriever_z: float
    qa_z: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.retriever_raw, self.qa_raw, self.retriever_z, self.qa_z], dtype=float
        )


def zscores(xs: list[float]) -> list[float]:
    """Standardize against the population sigma; constant input maps to zeros."""
    if not xs:
        raise RerankError("zscores needs a non-empty list")
    if all(x == xs[0] for x in xs):
        # Summation error can leave a tiny nonzero sigma for constant input,
        # which would blow the identical values up to full-size z-scores.
        return [0.0] * len(xs)
    mean = sum(xs) / len(xs)
    sigma = math.sqrt(sum((x - mean) ** 2 for x in xs) / len(xs))
    if sigma == 0.0:
        return [0.0] * len(xs)
    return [(x - mean) / sigma for x in xs]


def build_features(results: list[RankedResult]) -> list[CandidateFeatures]:
    """Feature rows for one query's candidate set (z over this set)."""
    retriever_z = zscores([r.retriever_score for r in results])
    qa_z = zscores([r.qa_score for r in results])
    return [
        CandidateFeatures(
            retriever_raw=r.retriever_score, qa_raw=r.qa_score, retriever_z=rz, qa_z=qz
        )
        for r, rz, qz in zip(results, retriever_z, qa_z)
    ]


def combine_multiply(f: CandidateFeatures) -> float:
    return f.retriever_raw * f.qa_raw


def combine_zscore_add(f: CandidateFeatures) -> float:
    return f.retriever_z + f.qa_z


# --------------------------------------------------------------------------
# Gradient-boosted regression trees
# --------------------------------------------------------------------------

# Tree nodes are plain dicts so the model file is the in-memory structure:
# {"feature": i, "threshold": x, "left": node, "right": node} or {"leaf": v}.


def _fit_tree(
    X: np.ndarray, residual: np.ndarray, depth: int, rng: random.Random
) -> dict:
    n = len(residual)
    mean = float(residual.mean())
    if depth == 0 or n < 2:
        return {"leaf": mean}
    parent_sse = float(((residual - mean) ** 2).sum())
    if parent_sse <= _GAIN_EPS:
        return {"leaf": mean}

    best_gain = 0.0
    best: list[tuple[int, float, np.ndarray]] = []  # (feature, threshold, left mask)
    for feature in range(X.shape[1]):
        values = X[:, feature]
        order = np.argsort(values, kind="stable")
        sorted_values = values[order]
        sorted_residual = residual[order]
        prefix = np.concatenate(([0.0], np.cumsum(sorted_residual)))
        prefix_sq = np.concatenate(([0.0], np.cumsum(sorted_residual**2)))
        total, total_sq = prefix[-1], prefix_sq[-1]
        # Splits only between distinct neighbor values.
        cut_points = np.nonzero(sorted_values[1:] > sorted_values[:-1])[0] + 1
        for p in cut_points:
            left_sse = prefix_sq[p] - prefix[p] ** 2 / p
            right_sse = (total_sq - prefix_sq[p]) - (total - prefix[p]) ** 2 / (n - p)
            gain = parent_sse - left_sse - right_sse
            if gain > best_gain + _GAIN_EPS:
                best_gain = gain
                threshold = float((sorted_values[p - 1] + sorted_values[p]) / 2.0)
                best = [(feature, threshold, values <= threshold)]
            elif best and gain >= best_gain - _GAIN_EPS:
                threshold = float((sorted_values[p - 1] + sorted_values[p]) / 2.0)
                best.append((feature, threshold, values <= threshold))

    if not best or best_gain <= _GAIN_EPS:
        return {"leaf": mean}
    feature, threshold, left_mask = best[0] if len(best) == 1 else best[rng.randrange(len(best))]
    return {
        "feature": feature,
        "threshold": threshold,
        "left": _fit_tree(X[left_mask], residual[left_mask], depth - 1, rng),
        "right": _fit_tree(X[~left_mask], residual[~left_mask], depth - 1, rng),
    }


def _apply_tree(node: dict, X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X), dtype=float)
    stack = [(node, np.ones(len(X), dtype=bool))]
    while stack:
        current, mask = stack.pop()
        if "leaf" in current:
            out[mask] = current["leaf"]
            continue
        go_left = X[:, current["feature"]] <= current["threshold"]
        stack.append((current["left"], mask & go_left))
        stack.append((current["right"], mask & ~go_left))
    return out


@dataclass
class GbrtModel:
    """Additive tree ensemble: base_score + shrinkage * sum of tree outputs."""

    base_score: float
    shrinkage: float
    rounds: int
    seed: int
    trees: list[dict]
    train_mse: list[float]

    def predict_rows(self, X: np.ndarray) -> np.ndarray:
        if not np.all(np.isfinite(X)):
            bad = int(np.nonzero(~np.isfinite(X).all(axis=1))[0][0])
            raise RerankError(f"non-finite feature in row {bad}")
        pred = np.full(len(X), self.base_score, dtype=float)
        for tree in self.trees:
            pred += self.shrinkage * _apply_tree(tree, X)
        return pred

    def predict(self, f: CandidateFeatures) -> float:
        return float(self.predict_rows(f.as_array().reshape(1, -1))[0])

    def save(self, path: str | Path) -> None:
        record = {
            "format": "opsqa-gbrt",
            "version": 1,
            "base_score": self.base_score,
            "shrinkage": self.shrinkage,
            "rounds": self.rounds,
            "seed": self.seed,
            "features": list(FEATURE_NAMES),
            "trees": self.trees,
            "train_mse": self.train_mse,
        }
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(record, handle, ensure_ascii=False, sort_keys=True)
            handle.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "GbrtModel":
        try:
            record = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise RerankError(f"cannot read model file {path}: {exc}") from exc
        if record.get("format") != "opsqa-gbrt" or record.get("version") != 1:
            raise RerankError(f"{path} is not a version-1 model file")
        return cls(
            base_score=record["base_score"],
            shrinkage=record["shrinkage"],
            rounds=record["rounds"],
            seed=record["seed"],
            trees=record["trees"],
            train_mse=record["train_mse"],
        )


def gbrt_train(
    rows: list[tuple[CandidateFeatures, int]],
    rounds: int = 100,
    max_depth: int = 3,
    shrinkage: float = 0.1,
    seed: int = 42,
) -> GbrtModel:
    """Fit the boosted ensemble to (features, binary label) rows.

    Round m fits a depth-bounded tree to the current residuals with exact
    greedy splits; each leaf predicts its mean residual.  The running training
    MSE is recorded per round (it can only go down with mean-residual leaves
    and shrinkage in (0, 1]).
    """
    if not rows:
        raise RerankError("gbrt_train needs at least one row")
    if not 0.0 < shrinkage <= 1.0:
        raise RerankError(f"shrinkage must be in (0, 1], got {shrinkage}")
    X = np.array([f.as_array() for f, _ in rows], dtype=float)
    y = np.array([label for _, label in rows], dtype=float)
    finite = np.isfinite(X).all(axis=1)
    if not finite.all():
        raise RerankError(f"non-finite feature in row {int(np.nonzero(~finite)[0][0])}")

    rng = random.Random(seed)
    base = float(y.mean())
    pred = np.full(len(y), base, dtype=float)
    trees: list[dict] = []
    mse: list[float] = []
    for _ in range(rounds):
        tree = _fit_tree(X, y - pred, max_depth, rng)
        pred += shrinkage * _apply_tree(tree, X)
        trees.append(tree)
        mse.append(float(((y - pred) ** 2).mean()))
    return GbrtModel(
        base_score=base, shrinkage=shrinkage, rounds=rounds, seed=seed, trees=trees, train_mse=mse
    )


def gbrt_predict(model: GbrtModel, f: CandidateFeatures) -> float:
    return model.predict(f)


# --------------------------------------------------------------------------
# Re-ranking
# --------------------------------------------------------------------------


def rerank(
    results: list[RankedResult], combiner: str, model: GbrtModel | None = None
) -> list[RankedResult]:
    """Re-sort candidates by the chosen combiner; ties keep the input order.

    Input order is the retriever ranking, so the stable sort realizes the
    "ties by original retriever rank" rule.  Returns fresh result objects with
    combined_score and rank set; everything else is copied through.
    """
    if combiner not in COMBINERS:
        raise RerankError(f"unknown combiner {combiner!r} (expected one of {COMBINERS})")
    if not results:
        return []
    features = build_features(results)
    if combiner == "retriever_only":
        combined = [f.retriever_raw for f in features]
    elif combiner == "qa_only":
        combined = [f.qa_raw for f in features]
    elif combiner == "multiply":
        combined = [combine_multiply(f) for f in features]
    elif combiner == "zscore_add":
        combined = [combine_zscore_add(f) for f in features]
    else:
        if model is None:
            raise RerankError("gbrt combiner needs a trained model")
        combined = list(model.predict_rows(np.array([f.as_array() for f in features])))

    order = sorted(range(len(results)), key=lambda i: (-combined[i], i))
    return [
        replace(results[i], combined_score=float(combined[i]), rank=rank)
        for rank, i in enumerate(order, 1)
    ]
