"""Comparator methods: unsupervised decomposition plus post-hoc regression,
and principal-component regression on the concatenated or a single block.

All baselines standardize, predict and score exactly like the supervised
fit, so test MSEs are directly comparable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import FitConfig, Ranks, SJiveModel, _as_dataset, fit
from .data import destandardize_outcome
from .errors import ConfigError, RankError, ShapeError
from .linalg import RANK_TOL, _signed_svd
from .predict import estimate_scores, predict


@dataclass
class BaselineModel:
    """One fitted comparator.

    kind picks the layout: "jive_predict" wraps a full decomposition model,
    the PCA kinds hold a single loading matrix (stacked over blocks for
    "concat_pca", one block for "individual_pca") and regression
    coefficients for the score rows.
    """

    kind: str
    rank: int
    coefficients: np.ndarray
    loadings: np.ndarray | None = None
    scores: np.ndarray | None = None
    block: int | None = None
    model: SJiveModel | None = None
    outcome_scaler: object = None

    @property
    def ranks(self):
        return self.model.ranks if self.model is not None else self.rank


def _unsupervised_cfg(ranks: Ranks, cfg: FitConfig | None) -> FitConfig:
    if cfg is None:
        return FitConfig(eta=1.0, ranks=ranks)
    return FitConfig(eta=1.0, ranks=ranks, max_iter=cfg.max_iter, tol=cfg.tol,
                     seed=cfg.seed)


def fit_jive(data, ranks: Ranks, cfg: FitConfig | None = None):
    """Unsupervised joint/individual decomposition: the supervised fit with
    all weight on X and no outcome terms. Coefficients are left unset."""
    return fit(_as_dataset(data), None, _unsupervised_cfg(ranks, cfg))


def fit_jive_predict(data, y, ranks: Ranks, cfg: FitConfig | None = None) -> BaselineModel:
    """Two-step baseline: unsupervised decomposition, then least squares of
    the outcome on the stacked score rows (one parameter per rank)."""
    model, _ = fit(_as_dataset(data), y, _unsupervised_cfg(ranks, cfg))
    theta = np.concatenate([model.theta_joint, *model.theta_indiv])
    return BaselineModel(
        kind="jive_predict",
        rank=ranks.total,
        coefficients=theta,
        model=model,
    )


def fit_pca_regression(data, y, r: int, mode: str, block: int | None = None) -> BaselineModel:
    """Rank-r principal-component regression.

    mode "concatenated" decomposes the stacked blocks; mode "per_block"
    decomposes the single block selected by ``block`` (0-based). The outcome
    is regressed on the r score rows without intercept, and new samples are
    scored by projecting onto the loadings.
    """
    data = _as_dataset(data)
    yv = np.asarray(y.values if hasattr(y, "values") else y, dtype=float).reshape(-1)
    yscaler = y.standardization if hasattr(y, "standardization") else None
    if yv.size != data.n:
        raise ShapeError(f"outcome length {yv.size} does not match n = {data.n}")
    if mode == "concatenated":
        mat = data.stacked()
        which = None
    elif mode == "per_block":
        if block is None or not 0 <= block < data.k:
            raise ConfigError("per_block mode needs a valid 0-based block index")
        mat = data.blocks[block]
        which = block
    else:
        raise ConfigError(f"unknown mode {mode!r}")
    cap = min(mat.shape)
    if not 0 <= r <= cap:
        raise RankError(f"rank {r} outside 0..{cap} for matrix shape {mat.shape}")
    if r == 0:
        loadings = np.zeros((mat.shape[0], 0))
        scores = np.zeros((0, data.n))
        coefs = np.zeros(0)
    else:
        u, s, vt = _signed_svd(mat)
        loadings = u[:, :r]
        scores = s[:r, None] * vt[:r]
        G = scores @ scores.T
        g = scores @ yv
        try:
            coefs = np.linalg.solve(G, g)
            if not np.isfinite(coefs).all():
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            warnings.warn(
                "score Gram matrix is singular; using a pseudoinverse",
                RuntimeWarning,
                stacklevel=2,
            )
            coefs = np.linalg.pinv(G, rcond=RANK_TOL) @ g
    return BaselineModel(
        kind="concat_pca" if mode == "concatenated" else "individual_pca",
        rank=r,
        coefficients=coefs,
        loadings=loadings,
        scores=scores,
        block=which,
        outcome_scaler=yscaler,
    )


def baseline_predict(bm: BaselineModel, new_data, standardized: bool = True) -> np.ndarray:
    """Standardized-scale outcome prediction for new (standardized) blocks."""
    data = _as_dataset(new_data)
    if bm.kind == "jive_predict":
        est = estimate_scores(bm.model, data)
        return predict(bm.model, est, standardized=standardized)
    if bm.kind == "concat_pca":
        mat = data.stacked()
    else:
        if bm.block is None or bm.block >= data.k:
            raise ShapeError("baseline block index outside the supplied data")
        mat = data.blocks[bm.block]
    if mat.shape[0] != bm.loadings.shape[0]:
        raise ShapeError(
            f"new data has {mat.shape[0]} variables, baseline was trained with "
            f"{bm.loadings.shape[0]}"
        )
    scores = bm.loadings.T @ mat
    yhat = bm.coefficients @ scores if bm.rank else np.zeros(mat.shape[1])
    if standardized:
        return yhat
    return destandardize_outcome(yhat, bm.outcome_scaler)


def baseline_training_fit(bm: BaselineModel) -> np.ndarray:
    """In-sample standardized fitted outcome of a PCA baseline."""
    if bm.kind == "jive_predict":
        return bm.model.fitted_outcome()
    if bm.rank == 0:
        return np.zeros(bm.scores.shape[1])
    return bm.coefficients @ bm.scores
