"""Out-of-sample score estimation and outcome prediction.

Loadings from a fitted model are held fixed while joint and individual
scores for new samples are found by alternating exact least-squares updates
of the reconstruction objective sum_i ||X*_i - U_i S_J - W_i S_i||_F^2.
The Gram matrices are pseudo-inverted, so the updates are exact minimizers
of their subproblems for any loading gauge and the objective never
increases across alternations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SJiveModel, _as_dataset
from .data import destandardize_outcome
from .errors import ShapeError, SJiveError
from .linalg import RANK_TOL


@dataclass
class ScoreEstimate:
    """Estimated scores for m new samples."""

    joint_scores: np.ndarray
    indiv_scores: list[np.ndarray]
    iterations: int
    converged: bool


def _check_blocks(model: SJiveModel, data):
    data = _as_dataset(data)
    if data.k != model.k:
        raise ShapeError(f"model has {model.k} blocks, new data has {data.k}")
    for i, (block, u) in enumerate(zip(data.blocks, model.joint_loadings)):
        if block.shape[0] != u.shape[0]:
            raise ShapeError(
                f"block {i + 1}: new data has {block.shape[0]} variables, "
                f"model was trained with {u.shape[0]}"
            )
    return data


def estimate_scores(
    model: SJiveModel,
    new_data,
    tol: float = 1e-8,
    max_iter: int = 500,
) -> ScoreEstimate:
    """Alternate closed-form score updates until the reconstruction
    objective stalls. New blocks must already be standardized with the
    training moments. Individual scores start at zero."""
    data = _check_blocks(model, new_data)
    m = data.n
    U = np.vstack(model.joint_loadings)
    pinv_gram_joint = np.linalg.pinv(U.T @ U, rcond=RANK_TOL) if U.shape[1] else None
    W = model.indiv_loadings
    pinv_gram = [
        np.linalg.pinv(w.T @ w, rcond=RANK_TOL) if w.shape[1] else None for w in W
    ]
    X = data.stacked()
    blocks = data.blocks
    r_j = model.ranks.joint
    s_joint = np.zeros((r_j, m))
    s_ind = [np.zeros((w.shape[1], m)) for w in W]
    offsets, a = [], 0
    for w in W:
        offsets.append((a, a + w.shape[0]))
        a += w.shape[0]

    def resid_objective():
        total = 0.0
        for i, (w, u) in enumerate(zip(W, model.joint_loadings)):
            r = blocks[i] - u @ s_joint - w @ s_ind[i]
            total += float(np.sum(r * r))
        return total

    prev = resid_objective()
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        if pinv_gram_joint is not None:
            R = X.copy()
            for (a, b), w, s in zip(offsets, W, s_ind):
                R[a:b] -= w @ s
            s_joint = pinv_gram_joint @ (U.T @ R)
        for i, (w, u) in enumerate(zip(W, model.joint_loadings)):
            if pinv_gram[i] is None:
                continue
            s_ind[i] = pinv_gram[i] @ (w.T @ (blocks[i] - u @ s_joint))
        obj = resid_objective()
        if prev - obj <= tol * max(prev, 1e-300):
            converged = True
            break
        prev = obj
    return ScoreEstimate(
        joint_scores=s_joint,
        indiv_scores=s_ind,
        iterations=iterations,
        converged=converged,
    )


def predict(model: SJiveModel, scores: ScoreEstimate, standardized: bool = False) -> np.ndarray:
    """Outcome prediction theta1 S_J + sum_i theta2_i S_i for estimated scores.

    By default the result is mapped back to the raw outcome scale with the
    training mean and sd; ``standardized=True`` returns the model-scale
    values (the convention used for test-MSE reporting).
    """
    if model.theta_joint is None:
        raise SJiveError(
            "model has no outcome coefficients; fit with an outcome or use "
            "fit_jive_predict"
        )
    if scores.joint_scores.shape[0] != model.ranks.joint:
        raise ShapeError(
            f"joint scores have rank {scores.joint_scores.shape[0]}, "
            f"model expects {model.ranks.joint}"
        )
    yhat = model.theta_joint @ scores.joint_scores
    for i, (th, s) in enumerate(zip(model.theta_indiv, scores.indiv_scores)):
        if s.shape[0] != th.size:
            raise ShapeError(
                f"block {i + 1} scores have rank {s.shape[0]}, model expects {th.size}"
            )
        yhat = yhat + th @ s
    if standardized:
        return yhat
    return destandardize_outcome(yhat, model.outcome_scaler)
