"""Supervised joint/individual low-rank decomposition fitted by alternating
SVD updates.

The model splits k standardized blocks X_i (p_i x n) into a joint part
U_i S_J shared across blocks and per-block individual parts W_i S_i, while a
linear predictor theta1 S_J + sum_i theta2_i S_i tracks a standardized
outcome y. A weight eta in (0, 1] trades off reconstruction of X against
prediction of y; eta = 1 reduces to the unsupervised decomposition.

Fitting distributes the weights into the data (X scaled by sqrt(eta), y by
sqrt(1 - eta)) so each update is a plain least-squares/SVD step on a stacked
matrix; the weights are divided back out of the returned loadings and
coefficients. After convergence the stacked joint block [U; theta1] and each
stacked individual block [W_i; theta2_i] are rescaled to unit Frobenius norm
with the scores absorbing the scale, which pins down the otherwise free
gauge without changing any fitted value.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .data import (
    BlockScaler,
    MultiSourceDataset,
    Outcome,
    OutcomeScaler,
    compress_dataset,
    decompress_loadings,
)
from .errors import ConfigError, DegeneracyError, RankError, ShapeError, SJiveError
from .linalg import RANK_TOL


@dataclass(frozen=True)
class Ranks:
    """Joint rank plus one individual rank per block; zero means absent."""

    joint: int
    individual: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "individual", tuple(int(r) for r in self.individual))
        if self.joint < 0 or any(r < 0 for r in self.individual):
            raise RankError("ranks must be nonnegative")

    @property
    def total(self) -> int:
        return self.joint + sum(self.individual)

    def validate_for(self, p: tuple[int, ...], n: int) -> None:
        if len(self.individual) != len(p):
            raise RankError(
                f"{len(self.individual)} individual ranks for {len(p)} blocks"
            )
        joint_cap = min(n, *p)
        if self.joint > joint_cap:
            raise RankError(f"joint rank {self.joint} exceeds min(n, p_i) = {joint_cap}")
        for i, (r, pi) in enumerate(zip(self.individual, p)):
            if r > min(n, pi):
                raise RankError(
                    f"block {i + 1} rank {r} exceeds min(n, p_{i + 1}) = {min(n, pi)}"
                )


@dataclass
class FitConfig:
    """Knobs for one fit: weight, ranks, iteration budget, tolerance."""

    eta: float
    ranks: Ranks
    max_iter: int = 1000
    tol: float = 1e-6
    seed: int = 0  # recorded for provenance; the fit itself is deterministic

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ConfigError(f"eta must be in (0, 1], got {self.eta}")
        if self.tol <= 0.0:
            raise ConfigError("tol must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")


@dataclass
class FitReport:
    objective_trace: list[float]
    iterations: int
    converged: bool
    final_objective: float


@dataclass
class SJiveModel:
    """Fitted loadings, scores and outcome coefficients.

    ``theta_joint``/``theta_indiv`` are None for purely unsupervised fits.
    Standardization metadata from the training data rides along so new data
    can be transformed consistently and predictions mapped back to the raw
    outcome scale.
    """

    joint_loadings: list[np.ndarray]
    joint_scores: np.ndarray
    indiv_loadings: list[np.ndarray]
    indiv_scores: list[np.ndarray]
    theta_joint: np.ndarray | None
    theta_indiv: list[np.ndarray] | None
    eta: float
    ranks: Ranks
    block_scalers: list[BlockScaler] | None = None
    outcome_scaler: OutcomeScaler | None = None
    variable_ids: list[list[str]] | None = None
    degenerate: tuple[str, ...] = ()

    @property
    def k(self) -> int:
        return len(self.joint_loadings)

    @property
    def n(self) -> int:
        return self.joint_scores.shape[1]

    @property
    def p(self) -> tuple[int, ...]:
        return tuple(u.shape[0] for u in self.joint_loadings)

    def joint_structure(self) -> list[np.ndarray]:
        return [u @ self.joint_scores for u in self.joint_loadings]

    def individual_structure(self) -> list[np.ndarray]:
        return [w @ s for w, s in zip(self.indiv_loadings, self.indiv_scores)]

    def fitted_blocks(self) -> list[np.ndarray]:
        return [j + a for j, a in zip(self.joint_structure(), self.individual_structure())]

    def fitted_outcome(self) -> np.ndarray | None:
        """Standardized-scale fitted outcome, or None without coefficients."""
        if self.theta_joint is None:
            return None
        yhat = self.theta_joint @ self.joint_scores
        for th, s in zip(self.theta_indiv, self.indiv_scores):
            yhat = yhat + th @ s
        return yhat

    def stacked_joint_frame(self) -> np.ndarray:
        parts = list(self.joint_loadings)
        if self.theta_joint is not None:
            parts.append(self.theta_joint[None, :])
        return np.vstack(parts)

    def stacked_indiv_frame(self, i: int) -> np.ndarray:
        parts = [self.indiv_loadings[i]]
        if self.theta_indiv is not None:
            parts.append(self.theta_indiv[i][None, :])
        return np.vstack(parts)


def _as_dataset(data) -> MultiSourceDataset:
    if isinstance(data, MultiSourceDataset):
        return data
    return MultiSourceDataset.from_arrays(list(data))


def _outcome_values(y):
    if y is None:
        return None, None
    if isinstance(y, Outcome):
        return y.values, y.standardization
    vals = np.asarray(y, dtype=float).reshape(-1)
    return vals, None


def _truncated_left_scores(m: np.ndarray, r: int):
    """Top-r left singular vectors L, scores L^T m, and a row-space basis
    of the scores (columns of the returned basis span row(L^T m)).

    Equivalent to truncating the full signed SVD, but only the kept columns
    are sign-fixed and copied (the discarded ones are dead work in the
    inner loop)."""
    rows, n = m.shape
    if r == 0:
        return np.zeros((rows, 0)), np.zeros((0, n)), np.zeros((n, 0))
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    order = np.argsort(-s, kind="stable")[:r]
    u, s, vt = u[:, order].copy(), s[order].copy(), vt[order].copy()
    for j in range(r):
        i = int(np.argmax(np.abs(u[:, j])))
        if u[i, j] < 0:
            u[:, j] = -u[:, j]
            vt[j, :] = -vt[j, :]
    if s[0] > 0.0:
        keep = s > RANK_TOL * s[0]
    else:
        keep = np.zeros(r, dtype=bool)
    return u, s[:, None] * vt, vt[keep].T


def _block_offsets(p: tuple[int, ...]):
    offsets, a = [], 0
    for pi in p:
        offsets.append((a, a + pi))
        a += pi
    return offsets


def _init_state(stacked, xt, yt, offsets, ranks: Ranks):
    """Joint part from the SVD of the stacked weighted data, then each
    individual part from its block residual projected off the joint rows."""
    n = stacked.shape[1]
    L, S_J, V = _truncated_left_scores(stacked, ranks.joint)
    F, S, ind_x = [], [], []
    y_ind = np.zeros(n)
    for i, (a, b) in enumerate(offsets):
        Ri = np.vstack([
            xt[a:b] - L[a:b] @ S_J,
            (yt - L[-1] @ S_J - y_ind)[None, :],
        ])
        if V.shape[1]:
            Ri -= (Ri @ V) @ V.T
        Fi, Si, _ = _truncated_left_scores(Ri, ranks.individual[i])
        F.append(Fi)
        S.append(Si)
        ind_x.append(Fi[:-1] @ Si)
        y_ind = y_ind + Fi[-1] @ Si
    return L, S_J, V, F, S, ind_x, y_ind


def _state_objective(stacked, offsets, L, S_J, ind_x, y_ind) -> float:
    resid = stacked - L @ S_J
    for (a, b), xc in zip(offsets, ind_x):
        resid[a:b] -= xc
    resid[-1] -= y_ind
    return float(np.sum(resid * resid))


def _als(stacked, xt, yt, offsets, ranks: Ranks, max_iter: int, tol: float):
    n = stacked.shape[1]
    L, S_J, V, F, S, ind_x, y_ind = _init_state(stacked, xt, yt, offsets, ranks)
    trace = [_state_objective(stacked, offsets, L, S_J, ind_x, y_ind)]
    # Absolute stop for exactly representable decompositions, far below any
    # tolerance a caller would use on real data.
    floor = 1e-18 * max(float(np.sum(stacked * stacked)), 1e-300)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        # Joint update: best rank-r_J factors of the data minus all
        # individual contributions, taken in one SVD so loadings and scores
        # stay consistent.
        R = stacked.copy()
        for (a, b), xc in zip(offsets, ind_x):
            R[a:b] -= xc
        R[-1] -= y_ind
        L, S_J, V = _truncated_left_scores(R, ranks.joint)
        # Individual updates: each block residual is projected onto the
        # orthogonal complement of the joint score rows, which keeps
        # row(S_i) perpendicular to row(S_J).
        for i, (a, b) in enumerate(offsets):
            y_others = y_ind - F[i][-1] @ S[i]
            Ri = np.vstack([
                xt[a:b] - L[a:b] @ S_J,
                (yt - L[-1] @ S_J - y_others)[None, :],
            ])
            if V.shape[1]:
                Ri -= (Ri @ V) @ V.T
            Fi, Si, _ = _truncated_left_scores(Ri, ranks.individual[i])
            F[i], S[i] = Fi, Si
            ind_x[i] = Fi[:-1] @ Si
            y_ind = y_others + Fi[-1] @ Si
        obj = _state_objective(stacked, offsets, L, S_J, ind_x, y_ind)
        trace.append(obj)
        prev = trace[-2]
        if prev - obj <= tol * max(prev, 1e-300) or obj <= floor:
            converged = True
            break
    return L, S_J, F, S, trace, iterations, converged


def _regress_outcome_on_scores(yvals, S_J, S_list):
    """Least squares of y on the stacked score rows (no intercept)."""
    Z = np.vstack([S_J, *S_list])
    if Z.shape[0] == 0:
        theta = np.zeros(0)
    else:
        G = Z @ Z.T
        g = Z @ yvals
        try:
            theta = np.linalg.solve(G, g)
            if not np.isfinite(theta).all():
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            warnings.warn(
                "score Gram matrix is singular; using a pseudoinverse",
                RuntimeWarning,
                stacklevel=3,
            )
            theta = np.linalg.pinv(G, rcond=RANK_TOL) @ g
    r_j = S_J.shape[0]
    th1 = theta[:r_j]
    th2, pos = [], r_j
    for s in S_list:
        th2.append(theta[pos : pos + s.shape[0]])
        pos += s.shape[0]
    return th1, th2


def _build_model(L, S_J, F, S, eta, yvals, ranks, cbs, data, yscaler, with_theta):
    offsets = _block_offsets(tuple(cb.scores.shape[0] if cb else b.shape[0]
                                   for cb, b in zip(cbs, data.blocks)))
    rt_eta = np.sqrt(eta)
    U = [L[a:b] / rt_eta for a, b in offsets]
    W = [F[i][:-1] / rt_eta for i in range(len(F))]
    for i, cb in enumerate(cbs):
        if cb is not None:
            U[i] = decompress_loadings(cb, U[i])
            W[i] = decompress_loadings(cb, W[i])
    if not with_theta:
        th1, th2 = None, None
    elif eta < 1.0:
        rt = np.sqrt(1.0 - eta)
        th1 = L[-1] / rt
        th2 = [F[i][-1] / rt for i in range(len(F))]
    else:
        # With all weight on X the outcome row is zero inside the loop, so
        # the coefficients come from a post-hoc regression on the scores.
        th1, th2 = _regress_outcome_on_scores(yvals, S_J, S)
    model = SJiveModel(
        joint_loadings=U,
        joint_scores=S_J.copy(),
        indiv_loadings=W,
        indiv_scores=[s.copy() for s in S],
        theta_joint=th1,
        theta_indiv=th2,
        eta=eta,
        ranks=ranks,
        block_scalers=data.standardization,
        outcome_scaler=yscaler,
        variable_ids=[list(v) for v in data.variable_ids],
    )
    return model


def objective(data, y, model: SJiveModel) -> float:
    """Weighted reconstruction-plus-prediction loss of a model on data.

    eta * sum_i ||X_i - U_i S_J - W_i S_i||_F^2
    + (1 - eta) * ||y - theta1 S_J - sum_i theta2_i S_i||^2.
    """
    data = _as_dataset(data)
    yvals, _ = _outcome_values(y)
    if data.k != model.k:
        raise ShapeError(f"model has {model.k} blocks, data has {data.k}")
    total = 0.0
    for i in range(data.k):
        if data.blocks[i].shape[0] != model.joint_loadings[i].shape[0]:
            raise ShapeError(
                f"block {i + 1}: data has {data.blocks[i].shape[0]} variables, "
                f"model has {model.joint_loadings[i].shape[0]}"
            )
        resid = (
            data.blocks[i]
            - model.joint_loadings[i] @ model.joint_scores
            - model.indiv_loadings[i] @ model.indiv_scores[i]
        )
        total += model.eta * float(np.sum(resid * resid))
    if model.eta < 1.0:
        if yvals is None:
            raise SJiveError("objective with eta < 1 requires an outcome")
        if yvals.size != data.n:
            raise ShapeError(f"outcome length {yvals.size} does not match n = {data.n}")
        yhat = model.fitted_outcome()
        if yhat is None:
            raise SJiveError("model has no outcome coefficients")
        r = yvals - yhat
        total += (1.0 - model.eta) * float(np.sum(r * r))
    return total


def _prepare(data, y, cfg: FitConfig, compress):
    data = _as_dataset(data)
    yvals, yscaler = _outcome_values(y)
    if yvals is None and cfg.eta < 1.0:
        raise ConfigError("eta < 1 requires an outcome")
    if yvals is not None:
        if yvals.size != data.n:
            raise ShapeError(f"outcome length {yvals.size} does not match n = {data.n}")
        if yvals.size > 1 and float(np.std(yvals, ddof=1)) <= 1e-12 * (
            1.0 + abs(float(np.mean(yvals)))
        ):
            raise DegeneracyError("outcome is constant; fit is undefined")
    cfg.ranks.validate_for(data.p, data.n)
    work, cbs = compress_dataset(data, compress)
    xt = np.vstack(work.blocks) * np.sqrt(cfg.eta)
    if yvals is not None and cfg.eta < 1.0:
        yt = yvals * np.sqrt(1.0 - cfg.eta)
    else:
        yt = np.zeros(data.n)
    stacked = np.vstack([xt, yt[None, :]])
    offsets = _block_offsets(work.p)
    return data, yvals, yscaler, work, cbs, xt, yt, stacked, offsets


def initialize(data, y, cfg: FitConfig, compress="auto") -> SJiveModel:
    """Starting model: joint part from one SVD of the weighted stacked data,
    individual parts from the projected block residuals."""
    data, yvals, yscaler, work, cbs, xt, yt, stacked, offsets = _prepare(
        data, y, cfg, compress
    )
    L, S_J, V, F, S, ind_x, y_ind = _init_state(stacked, xt, yt, offsets, cfg.ranks)
    return _build_model(
        L, S_J, F, S, cfg.eta, yvals, cfg.ranks, cbs, data, yscaler,
        with_theta=(cfg.eta < 1.0),
    )


def fit(data, y, cfg: FitConfig, compress="auto"):
    """Fit the decomposition by alternating exact block updates.

    ``compress="auto"`` replaces any block with more variables than samples
    by its SVD score representation during the iterations (the result is
    mapped back to variable space and is equivalent up to floating point).
    Returns (model, report); ``report.converged`` is False when the
    iteration budget ran out, in which case the best model so far is
    returned.
    """
    data, yvals, yscaler, work, cbs, xt, yt, stacked, offsets = _prepare(
        data, y, cfg, compress
    )
    L, S_J, F, S, trace, iterations, converged = _als(
        stacked, xt, yt, offsets, cfg.ranks, cfg.max_iter, cfg.tol
    )
    model = _build_model(
        L, S_J, F, S, cfg.eta, yvals, cfg.ranks, cbs, data, yscaler,
        with_theta=(yvals is not None),
    )
    model = rescale_identifiable(model)
    report = FitReport(
        objective_trace=trace,
        iterations=iterations,
        converged=converged,
        final_objective=trace[-1],
    )
    return model, report


def rescale_identifiable(model: SJiveModel) -> SJiveModel:
    """Scale each stacked loading block to unit Frobenius norm, with the
    scores absorbing the factor so all fitted values are unchanged.

    For supervised fits (eta < 1) the outcome coefficients are part of the
    stacked blocks; at eta = 1 they were obtained post hoc and stay outside
    the norm, so the unsupervised decomposition keeps a gauge that does not
    depend on the outcome. All-zero blocks are left untouched and flagged
    in ``degenerate``.
    """
    in_frame = model.eta < 1.0
    U = [u.copy() for u in model.joint_loadings]
    W = [w.copy() for w in model.indiv_loadings]
    S_J = model.joint_scores.copy()
    S = [s.copy() for s in model.indiv_scores]
    th1 = None if model.theta_joint is None else model.theta_joint.copy()
    th2 = None if model.theta_indiv is None else [t.copy() for t in model.theta_indiv]
    flags = []
    if model.ranks.joint > 0:
        nsq = sum(float(np.sum(u * u)) for u in U)
        if th1 is not None and in_frame:
            nsq += float(np.sum(th1 * th1))
        if nsq == 0.0:
            flags.append("joint")
        else:
            c = np.sqrt(nsq)
            U = [u / c for u in U]
            if th1 is not None:
                th1 = th1 / c
            S_J *= c
    for i, r in enumerate(model.ranks.individual):
        if r == 0:
            continue
        nsq = float(np.sum(W[i] * W[i]))
        if th2 is not None and in_frame:
            nsq += float(np.sum(th2[i] * th2[i]))
        if nsq == 0.0:
            flags.append(f"individual {i + 1}")
            continue
        c = np.sqrt(nsq)
        W[i] = W[i] / c
        if th2 is not None:
            th2[i] = th2[i] / c
        S[i] *= c
    return replace(
        model,
        joint_loadings=U,
        joint_scores=S_J,
        indiv_loadings=W,
        indiv_scores=S,
        theta_joint=th1,
        theta_indiv=th2,
        degenerate=tuple(flags),
    )
