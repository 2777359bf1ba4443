"""Histogram gradient-boosted trees on logistic loss.

Second-order boosting with L2 leaf regularisation, level-wise growth to a fixed
depth, and per-feature quantile bins. Small by design: enough to act as a
detector in the insertion test, nothing more.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class _Tree:
    feature: np.ndarray  # int32, -1 for leaves
    threshold: np.ndarray  # int16 bin index; go left when bin <= threshold
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # leaf outputs (already scaled by the learning rate)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class TreeEnsemble:
    n_trees: int = 100
    max_depth: int = 6
    learning_rate: float = 0.1
    n_bins: int = 64
    reg_lambda: float = 1.0
    min_child_weight: float = 1.0
    base_score: float = 0.0
    trees: list[_Tree] = field(default_factory=list)
    bin_edges: list[np.ndarray] = field(default_factory=list)

    # -- binning -----------------------------------------------------------
    def _fit_bins(self, X: np.ndarray) -> None:
        qs = np.linspace(0, 1, self.n_bins + 1)[1:-1]
        cuts = np.quantile(X, qs, axis=0)  # (n_bins - 1, F)
        self.bin_edges = [np.unique(cuts[:, f]) for f in range(X.shape[1])]

    def _bin(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape, dtype=np.uint8)
        for f, edges in enumerate(self.bin_edges):
            out[:, f] = np.searchsorted(edges, X[:, f], side="left")
        return out

    # -- fitting -----------------------------------------------------------
    def _hist(self, flat: np.ndarray, idx: np.ndarray, g: np.ndarray, h: np.ndarray, F: int):
        cells = flat[idx].ravel()
        size = F * self.n_bins
        G = np.bincount(cells, weights=np.repeat(g[idx], F), minlength=size).reshape(F, self.n_bins)
        H = np.bincount(cells, weights=np.repeat(h[idx], F), minlength=size).reshape(F, self.n_bins)
        return G, H

    def _best_split(self, G: np.ndarray, H: np.ndarray):
        lam = self.reg_lambda
        g_tot, h_tot = G[0].sum(), H[0].sum()
        GL = np.cumsum(G, axis=1)[:, :-1]
        HL = np.cumsum(H, axis=1)[:, :-1]
        GR, HR = g_tot - GL, h_tot - HL
        gain = GL**2 / (HL + lam) + GR**2 / (HR + lam) - g_tot**2 / (h_tot + lam)
        ok = (HL >= self.min_child_weight) & (HR >= self.min_child_weight)
        gain = np.where(ok, gain, -np.inf)
        best = int(np.argmax(gain))
        f, b = divmod(best, gain.shape[1])
        return f, b, gain[f, b]

    def _grow(self, Xb: np.ndarray, flat: np.ndarray, g: np.ndarray, h: np.ndarray) -> _Tree:
        F = Xb.shape[1]
        feature, threshold, left, right, value = [], [], [], [], []

        def new_node() -> int:
            feature.append(-1)
            threshold.append(0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            return len(feature) - 1

        root = new_node()
        G, H = self._hist(flat, np.arange(len(g)), g, h, F)
        frontier = [(root, np.arange(len(g)), G, H)]
        for depth in range(self.max_depth + 1):
            nxt = []
            for node, idx, G, H in frontier:
                g_sum, h_sum = G[0].sum(), H[0].sum()
                f, b, gain = (0, 0, -np.inf) if depth == self.max_depth else self._best_split(G, H)
                if not gain > 1e-12:
                    value[node] = -self.learning_rate * g_sum / (h_sum + self.reg_lambda)
                    continue
                go_left = Xb[idx, f] <= b
                li, ri = idx[go_left], idx[~go_left]
                small, large = (li, ri) if len(li) <= len(ri) else (ri, li)
                Gs, Hs = self._hist(flat, small, g, h, F)
                Gl_, Hl_ = G - Gs, H - Hs
                if small is li:
                    (GLc, HLc), (GRc, HRc) = (Gs, Hs), (Gl_, Hl_)
                else:
                    (GLc, HLc), (GRc, HRc) = (Gl_, Hl_), (Gs, Hs)
                ln, rn = new_node(), new_node()
                feature[node], threshold[node], left[node], right[node] = f, b, ln, rn
                nxt += [(ln, li, GLc, HLc), (rn, ri, GRc, HRc)]
            frontier = nxt
        return _Tree(
            np.asarray(feature, dtype=np.int32),
            np.asarray(threshold, dtype=np.int16),
            np.asarray(left, dtype=np.int32),
            np.asarray(right, dtype=np.int32),
            np.asarray(value, dtype=np.float64),
        )

    def fit(self, X: np.ndarray, y: np.ndarray) -> "TreeEnsemble":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if X.ndim != 2 or len(X) == 0 or len(X) != len(y):
            raise ValueError("fit needs a non-empty 2-D feature matrix and matching labels")
        if len(np.unique(y)) < 2:
            raise ValueError("fit needs both classes present in the labels")
        self._fit_bins(X)
        Xb = self._bin(X)
        F = X.shape[1]
        flat = Xb.astype(np.int32) + (np.arange(F, dtype=np.int32) * self.n_bins)[None, :]
        p = float(np.clip(y.mean(), 1e-6, 1 - 1e-6))
        self.base_score = float(np.log(p / (1 - p)))
        margin = np.full(len(y), self.base_score)
        self.trees = []
        for _ in range(self.n_trees):
            prob = _sigmoid(margin)
            g = prob - y
            h = np.maximum(prob * (1 - prob), 1e-16)
            tree = self._grow(Xb, flat, g, h)
            self.trees.append(tree)
            margin += self._apply(tree, Xb)
        return self

    # -- prediction --------------------------------------------------------
    def _apply(self, tree: _Tree, Xb: np.ndarray) -> np.ndarray:
        node = np.zeros(len(Xb), dtype=np.int32)
        rows = np.arange(len(Xb))
        for _ in range(self.max_depth):
            feat = tree.feature[node]
            internal = feat >= 0
            if not internal.any():
                break
            go_left = Xb[rows, np.maximum(feat, 0)] <= tree.threshold[node]
            node = np.where(internal, np.where(go_left, tree.left[node], tree.right[node]), node)
        return tree.value[node]

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        Xb = self._bin(np.asarray(X, dtype=np.float64))
        margin = np.full(len(Xb), self.base_score)
        for tree in self.trees:
            margin += self._apply(tree, Xb)
        return margin

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(self.decision_function(X))


def fit_ensemble(X: np.ndarray, y: np.ndarray, trees: int = 100, depth: int = 6, lr: float = 0.1) -> TreeEnsemble:
    return TreeEnsemble(n_trees=trees, max_depth=depth, learning_rate=lr).fit(X, y)
