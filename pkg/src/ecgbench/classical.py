"""Classical baselines on flattened feature vectors: CART, random forest,
multinomial logistic regression.

All fits are deterministic given (data, hyperparameters, seed).  Ties are
broken towards the lowest feature index, then the lowest threshold, and class
argmaxes towards the lowest class index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nn.losses import softmax

__all__ = [
    "TreeParams",
    "TreeNode",
    "ForestModel",
    "LogisticModel",
    "fit_tree",
    "predict_tree",
    "fit_forest",
    "predict_forest",
    "fit_logistic",
    "predict_logistic",
    "logistic_loss_and_grad",
    "tree_to_arrays",
    "tree_from_arrays",
]

NUM_CLASSES = 5
_FEATURE_BLOCK = 256  # bounded memory for the vectorized split search


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 20
    min_samples_leaf: int = 5
    min_samples_split: int = 10

    def __post_init__(self):
        if min(self.max_depth, self.min_samples_leaf, self.min_samples_split) < 1:
            raise ValueError("tree parameters must all be >= 1")


@dataclass
class TreeNode:
    """Internal node (feature/threshold/children) or leaf (class counts)."""

    class_counts: np.ndarray
    feature: int | None = None
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


@dataclass
class ForestModel:
    trees: list[TreeNode]
    n_features_per_split: int
    seed: int


@dataclass
class LogisticModel:
    """Multinomial softmax regression: weights (5, d) and biases (5,)."""

    weights: np.ndarray
    biases: np.ndarray


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.sum(p * p))


def _class_counts(y: np.ndarray) -> np.ndarray:
    return np.bincount(y, minlength=NUM_CLASSES).astype(np.int64)


def _best_split(X: np.ndarray, y: np.ndarray, feat_idx: np.ndarray,
                min_leaf: int):
    """Exact search over candidate (feature, threshold) pairs.

    Thresholds sit at midpoints of consecutive distinct sorted values.  The
    Gini decrease is computed for every candidate via prefix class counts,
    vectorized over feature blocks; the flat argmax inside a block and the
    strictly-greater comparison across blocks realize the lowest-feature,
    lowest-threshold tie-break (feat_idx must be ascending).
    """
    n = y.size
    parent_counts = _class_counts(y)
    parent_gini = _gini(parent_counts)
    best = None  # (decrease, feature, threshold)
    for start in range(0, feat_idx.size, _FEATURE_BLOCK):
        cols = feat_idx[start:start + _FEATURE_BLOCK]
        xs = X[:, cols]
        order = np.argsort(xs, axis=0, kind="stable")
        sv = np.take_along_axis(xs, order, axis=0)
        sy = y[order]
        # left class counts after each prefix of length i+1, per feature
        left = np.cumsum(sy[:, :, None] == np.arange(NUM_CLASSES), axis=0)
        left = left[:-1].astype(np.float64)              # (n-1, f, 5)
        right = parent_counts.astype(np.float64) - left
        n_left = np.arange(1, n, dtype=np.float64)[:, None]
        n_right = n - n_left
        with np.errstate(invalid="ignore", divide="ignore"):
            gini_left = 1.0 - np.sum((left / n_left[:, :, None]) ** 2, axis=2)
            gini_right = 1.0 - np.sum((right / n_right[:, :, None]) ** 2, axis=2)
        weighted = (n_left * gini_left + n_right * gini_right) / n
        decrease = parent_gini - weighted                # (n-1, f)
        valid = (sv[:-1] < sv[1:]) & (n_left >= min_leaf) & (n_right >= min_leaf)
        decrease[~valid] = -np.inf
        if not np.any(valid):
            continue
        # feature-major flat argmax -> lowest feature, then lowest threshold
        flat = decrease.T.reshape(-1)
        pos = int(np.argmax(flat))
        dec = float(flat[pos])
        # zero-decrease splits are kept: on parity-style data (XOR) the root
        # gain is exactly zero yet the children become separable
        if dec < 0.0:
            continue
        f_local, i = divmod(pos, n - 1)
        threshold = 0.5 * (float(sv[i, f_local]) + float(sv[i + 1, f_local]))
        if best is None or dec > best[0]:
            best = (dec, int(cols[f_local]), threshold)
    return best


def fit_tree(X: np.ndarray, y: np.ndarray, p: TreeParams = TreeParams(),
             rng: np.random.Generator | None = None, *,
             n_features_per_split: int | None = None) -> TreeNode:
    """Grow a CART classifier greedily on Gini impurity decrease.

    ``n_features_per_split`` restricts each split search to that many features
    sampled without replacement from ``rng`` (the random-forest hook); by
    default every feature is searched exactly.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] == 0:
        raise ValueError("X must be (n, d) with d >= 1")
    if X.shape[0] == 0:
        raise ValueError("cannot fit a tree on zero samples")
    if y.size and (y.min() < 0 or y.max() >= NUM_CLASSES):
        raise ValueError("labels must be class codes in [0, 4]")
    if n_features_per_split is not None and rng is None:
        raise ValueError("feature subsampling requires a generator")
    d = X.shape[1]

    def grow(idx: np.ndarray, depth: int) -> TreeNode:
        counts = _class_counts(y[idx])
        node = TreeNode(class_counts=counts)
        if (
            depth >= p.max_depth
            or idx.size < p.min_samples_split
            or np.count_nonzero(counts) <= 1
        ):
            return node
        if n_features_per_split is not None and n_features_per_split < d:
            feats = np.sort(rng.choice(d, size=n_features_per_split, replace=False))
        else:
            feats = np.arange(d)
        found = _best_split(X[idx], y[idx], feats, p.min_samples_leaf)
        if found is None:
            return node
        _, feature, threshold = found
        go_left = X[idx, feature] <= threshold
        node.feature = feature
        node.threshold = threshold
        node.left = grow(idx[go_left], depth + 1)
        node.right = grow(idx[~go_left], depth + 1)
        return node

    return grow(np.arange(X.shape[0]), 0)


def predict_tree(t: TreeNode, x: np.ndarray) -> tuple[int, np.ndarray]:
    """Route one sample; returns (class, leaf-count probabilities)."""
    node = t
    while not node.is_leaf:
        node = node.left if x[node.feature] <= node.threshold else node.right
    probs = node.class_counts / node.class_counts.sum()
    return int(np.argmax(probs)), probs


def fit_forest(X: np.ndarray, y: np.ndarray, n_trees: int,
               p: TreeParams = TreeParams(), seed: int = 0, *,
               bootstrap: bool = True,
               n_features_per_split: int | None = None) -> ForestModel:
    """Bagged trees with per-split feature sampling (default floor(sqrt(d))).

    Each tree gets its own generator derived from (seed, tree index), so the
    model is identical no matter how trees would be scheduled.
    """
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    if n_features_per_split is None:
        n_features_per_split = max(1, int(np.sqrt(d)))
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng([seed, t])
        if bootstrap:
            idx = rng.integers(0, n, size=n)
            xb, yb = X[idx], y[idx]
        else:
            xb, yb = X, y
        sub = None if n_features_per_split >= d else n_features_per_split
        trees.append(fit_tree(xb, yb, p, rng, n_features_per_split=sub))
    return ForestModel(trees=trees, n_features_per_split=n_features_per_split,
                       seed=seed)


def predict_forest(m: ForestModel, x: np.ndarray) -> tuple[int, np.ndarray]:
    """Majority vote; probabilities are vote fractions over the trees."""
    votes = np.zeros(NUM_CLASSES)
    for tree in m.trees:
        cls, _ = predict_tree(tree, x)
        votes[cls] += 1.0
    probs = votes / len(m.trees)
    return int(np.argmax(probs)), probs


def logistic_loss_and_grad(weights: np.ndarray, biases: np.ndarray,
                           X: np.ndarray, targets: np.ndarray, l2: float):
    """Cross-entropy + (l2/2)*||W||^2 with analytic gradients (FD-checked)."""
    n = X.shape[0]
    logits = X @ weights.T + biases
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    loss = float(-(targets * log_probs).sum() / n) + 0.5 * l2 * float(np.sum(weights ** 2))
    delta = (np.exp(log_probs) - targets) / n
    grad_w = delta.T @ X + l2 * weights
    grad_b = delta.sum(axis=0)
    return loss, grad_w, grad_b


def fit_logistic(X: np.ndarray, y: np.ndarray, lr: float = 0.01,
                 epochs: int = 50, batch: int = 64, l2: float = 1e-4,
                 rng: np.random.Generator | None = None) -> LogisticModel:
    """Mini-batch gradient descent on softmax cross-entropy, zero-initialized.

    Expects pre-normalized features.  Raises on a non-finite loss, reporting
    the epoch where training diverged.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, d = X.shape
    targets = np.zeros((n, NUM_CLASSES))
    targets[np.arange(n), y] = 1.0
    weights = np.zeros((NUM_CLASSES, d))
    biases = np.zeros(NUM_CLASSES)
    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            sel = order[start:start + batch]
            loss, grad_w, grad_b = logistic_loss_and_grad(
                weights, biases, X[sel], targets[sel], l2)
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"logistic regression diverged at epoch {epoch}")
            weights -= lr * grad_w
            biases -= lr * grad_b
    return LogisticModel(weights=weights, biases=biases)


def predict_logistic(m: LogisticModel, x: np.ndarray) -> tuple[int, np.ndarray]:
    probs = softmax(m.weights @ x + m.biases)
    return int(np.argmax(probs)), probs


# ---------------------------------------------------------------------------
# Flat-array serialization so checkpoints can hold tree models.
# ---------------------------------------------------------------------------

def tree_to_arrays(root: TreeNode) -> dict[str, np.ndarray]:
    """Breadth-first encoding: feature -1 marks a leaf, children by index."""
    features, thresholds, lefts, rights, counts = [], [], [], [], []
    queue = [root]
    while queue:
        node = queue.pop(0)
        counts.append(node.class_counts)
        if node.is_leaf:
            features.append(-1)
            thresholds.append(0.0)
            lefts.append(-1)
            rights.append(-1)
        else:
            features.append(node.feature)
            thresholds.append(node.threshold)
            lefts.append(len(counts) + len(queue))
            queue.append(node.left)
            rights.append(len(counts) + len(queue))
            queue.append(node.right)
    return {
        "feature": np.array(features, dtype=np.int64),
        "threshold": np.array(thresholds, dtype=np.float64),
        "left": np.array(lefts, dtype=np.int64),
        "right": np.array(rights, dtype=np.int64),
        "counts": np.stack(counts).astype(np.int64),
    }


def tree_from_arrays(arrays: dict[str, np.ndarray]) -> TreeNode:
    features = arrays["feature"]
    nodes = [TreeNode(class_counts=arrays["counts"][i].copy()) for i in range(features.size)]
    for i in range(features.size):
        if features[i] >= 0:
            nodes[i].feature = int(features[i])
            nodes[i].threshold = float(arrays["threshold"][i])
            nodes[i].left = nodes[int(arrays["left"][i])]
            nodes[i].right = nodes[int(arrays["right"][i])]
    return nodes[0]
