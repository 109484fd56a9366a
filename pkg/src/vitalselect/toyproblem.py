"""A 12-feature selection problem with a fully enumerable objective table.

Four features mostly help recognition, four mostly help identification and
four help both. Accuracies are linear in the selected weights, so every
one of the 2^12 - 1 nonempty masks has a distinct objective triple.
"""
import numpy as np

from vitalselect.nsga2 import dominance_matrix

N_FEATURES = 12


def all_masks(n=N_FEATURES):
    codes = np.arange(1, 2 ** n)
    return ((codes[:, None] >> np.arange(n)) & 1).astype(bool)


def mask_code(mask) -> int:
    return int((np.asarray(mask, dtype=np.int64) << np.arange(len(mask))).sum())


class ToyProblem:
    def __init__(self, seed=0, n=N_FEATURES):
        rng = np.random.default_rng(seed)
        q = n // 3
        self.n = n
        self.w_rec = np.r_[rng.uniform(0.5, 1, q), rng.uniform(0.0, 0.1, q), rng.uniform(0.2, 0.5, n - 2 * q)]
        self.w_id = np.r_[rng.uniform(0.0, 0.1, q), rng.uniform(0.5, 1, q), rng.uniform(0.2, 0.5, n - 2 * q)]
        masks = all_masks(n)
        a_r = 0.25 + 0.75 * (masks @ self.w_rec) / self.w_rec.sum()
        a_i = 0.25 + 0.75 * (masks @ self.w_id) / self.w_id.sum()
        self.table = np.c_[a_r, 1.0 - a_i, a_r - a_i]

    def __call__(self, mask):
        return tuple(self.table[mask_code(mask) - 1])

    def pareto_codes(self) -> set:
        """Codes of all Pareto-optimal masks, by brute-force dominance."""
        dominated = dominance_matrix(self.table).any(axis=0)
        return {int(i) + 1 for i in np.flatnonzero(~dominated)}
