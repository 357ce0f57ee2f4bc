"""Anchor selection by farthest point sampling with an adaptive stop threshold.

Selection is greedy max-min over a precomputed distance matrix: the seed is
the token with the largest distance row-sum (most outlying), and each step
adds the token whose minimum distance to the selected set is largest.  The
candidate is examined before insertion: once its min-distance drops below
``tau`` selection stops, so no anchor pair is closer than ``tau``.  All ties
break toward the lowest index, which makes runs reproducible.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .errors import ValidationError
from .tokens import MotionTokenSet
from .validation import check_distance_matrix

DEFAULT_TAU = 0.65
DEFAULT_L_MAX = 64
SEED_RULE_MAX_ROW_SUM = "max-row-sum"


@dataclass
class AnchorSet:
    """Selected token indices in selection order plus the selection settings."""

    indices: list
    tau: float
    seed_rule: str = SEED_RULE_MAX_ROW_SUM
    l_max: int = DEFAULT_L_MAX
    selection_min_dists: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.indices)


def fps_select(dist, tau: float = DEFAULT_TAU, l_max: int = DEFAULT_L_MAX) -> AnchorSet:
    """Greedy max-min selection over a K x K distance matrix.

    Stops when the best remaining candidate's min-distance to the selected
    set falls below ``tau``, when ``l_max`` anchors are selected, or when all
    tokens are selected.  Always selects at least the seed.
    """
    dist = check_distance_matrix(dist)
    if tau < 0:
        raise ValidationError(f"tau must be >= 0, got {tau}")
    if l_max < 1:
        raise ValidationError(f"l_max must be >= 1, got {l_max}")
    k = dist.shape[0]

    seed = int(np.argmax(dist.sum(axis=1)))
    selected = [seed]
    min_dists = [float("inf")]  # seed has no prior selection to compare against
    best = dist[seed].copy()
    limit = min(l_max, k)
    while len(selected) < limit:
        masked = best.copy()
        masked[selected] = -np.inf
        candidate = int(np.argmax(masked))
        candidate_min = float(masked[candidate])
        if candidate_min < tau:
            break
        selected.append(candidate)
        min_dists.append(candidate_min)
        np.minimum(best, dist[candidate], out=best)
    return AnchorSet(indices=selected, tau=float(tau), l_max=int(l_max), selection_min_dists=min_dists)


def audit_selection(anchors: AnchorSet, dist) -> bool:
    """Re-derive every selection step from scratch and check it held.

    Checks are value-level: each selected index must achieve the max-row-sum
    (seed) or argmax-min criterion, every non-seed anchor must clear ``tau``,
    and the sequence must have stopped for a valid reason.
    """
    dist = check_distance_matrix(dist)
    k = dist.shape[0]
    idx = list(anchors.indices)
    if not idx or len(set(idx)) != len(idx):
        return False
    if any(not 0 <= i < k for i in idx):
        return False

    row_sums = dist.sum(axis=1)
    if row_sums[idx[0]] != row_sums.max():
        return False
    for step in range(1, len(idx)):
        prefix = idx[:step]
        min_to_prefix = dist[:, prefix].min(axis=1)
        min_to_prefix[prefix] = -np.inf
        chosen = idx[step]
        if min_to_prefix[chosen] != min_to_prefix.max():
            return False
        if min_to_prefix[chosen] < anchors.tau:
            return False
    # Stop condition: ran out of tokens, hit the cap, or the next best
    # candidate falls under tau.
    if len(idx) == k or len(idx) >= anchors.l_max:
        return True
    min_to_all = dist[:, idx].min(axis=1)
    min_to_all[idx] = -np.inf
    return bool(min_to_all.max() < anchors.tau)


def random_select(dist, tau: float, l_max: int, rng: np.random.Generator) -> AnchorSet:
    """Baseline strategy: uniform random tokens, count-matched to fps_select.

    Using the same anchor count as the greedy selection keeps comparisons
    about the selection criterion rather than the anchor budget.
    """
    dist = check_distance_matrix(dist)
    target = fps_select(dist, tau=tau, l_max=l_max).count
    indices = rng.choice(dist.shape[0], size=target, replace=False)
    return AnchorSet(
        indices=[int(i) for i in indices],
        tau=float(tau),
        seed_rule="uniform-random",
        l_max=int(l_max),
        selection_min_dists=[],
    )


class FarthestPointSampler(TransformerMixin, BaseEstimator):
    """Scikit-learn estimator wrapping greedy max-min selection.

    ``fit`` takes a precomputed square distance matrix; ``indices_`` holds
    the selected rows in selection order.  ``transform`` reduces a distance
    matrix to its columns against the selected anchors, which composes with
    downstream estimators expecting (n_samples, n_anchors) features.
    """

    def __init__(self, tau: float = DEFAULT_TAU, l_max: int = DEFAULT_L_MAX):
        self.tau = tau
        self.l_max = l_max

    def fit(self, X, y=None):
        anchors = fps_select(X, tau=self.tau, l_max=self.l_max)
        self.indices_ = np.asarray(anchors.indices, dtype=np.intp)
        self.n_selected_ = anchors.count
        self.selection_min_dists_ = np.asarray(anchors.selection_min_dists, dtype=np.float64)
        self.seed_rule_ = anchors.seed_rule
        self.n_features_in_ = int(np.asarray(X).shape[0])
        return self

    def transform(self, X):
        if not hasattr(self, "indices_"):
            raise NotFittedError("FarthestPointSampler is not fitted yet")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValidationError(
                f"expected (n_samples, {self.n_features_in_}) distances, got {X.shape}"
            )
        return X[:, self.indices_]

    def fit_predict(self, X, y=None):
        """Fit, then label every token with its nearest anchor's selection rank."""
        self.fit(X)
        X = np.asarray(X, dtype=np.float64)
        return np.argmin(X[:, self.indices_], axis=1)


# ---------------------------------------------------------------------------
# Anchors JSON round-trip
# ---------------------------------------------------------------------------


@dataclass
class AnchorsFile:
    """In-memory form of the anchors JSON document."""

    anchors: AnchorSet
    trajectories: np.ndarray  # (L, N, 2)
    token_features: np.ndarray  # (L, N, C)
    n: int
    h: int
    w: int
    strategy: str = "fps"
    audit_ok: bool | None = None


def anchors_to_dict(
    anchors: AnchorSet,
    token_set: MotionTokenSet,
    strategy: str = "fps",
    audit_ok: bool | None = None,
) -> dict:
    if token_set.trajectory_set is None:
        raise ValidationError("token set carries no trajectories to export")
    trajectories = token_set.trajectory_set.trajectories
    return {
        "tau": anchors.tau,
        "seed_rule": anchors.seed_rule,
        "strategy": strategy,
        "audit_ok": audit_ok,
        "n": token_set.n,
        "h": token_set.trajectory_set.h,
        "w": token_set.trajectory_set.w,
        "indices": [int(i) for i in anchors.indices],
        "trajectories": [
            [[float(u), float(v)] for u, v in trajectories[i].positions] for i in anchors.indices
        ],
        "token_features": [
            [[float(x) for x in row] for row in token_set.tokens[i].features]
            for i in anchors.indices
        ],
    }


def anchors_from_dict(payload: dict) -> AnchorsFile:
    try:
        anchors = AnchorSet(
            indices=[int(i) for i in payload["indices"]],
            tau=float(payload["tau"]),
            seed_rule=str(payload["seed_rule"]),
        )
        trajectories = np.asarray(payload["trajectories"], dtype=np.float64)
        features = np.asarray(payload["token_features"], dtype=np.float64)
        h = int(payload["h"])
        w = int(payload["w"])
        n = int(payload.get("n", trajectories.shape[1] if trajectories.ndim == 3 else 0))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed anchors JSON: {exc}") from exc
    if trajectories.ndim != 3 or trajectories.shape[2] != 2:
        raise ValidationError(f"anchor trajectories must be (L, N, 2), got {trajectories.shape}")
    if features.ndim != 3 or features.shape[0] != trajectories.shape[0]:
        raise ValidationError("anchor features do not match anchor trajectories")
    return AnchorsFile(
        anchors=anchors,
        trajectories=trajectories,
        token_features=features,
        n=n,
        h=h,
        w=w,
        strategy=str(payload.get("strategy", "fps")),
        audit_ok=payload.get("audit_ok"),
    )


def save_anchors(payload: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_anchors(path) -> AnchorsFile:
    with open(path, "r", encoding="utf-8") as fh:
        return anchors_from_dict(json.load(fh))
