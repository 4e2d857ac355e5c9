"""Model and truth serialization: a zip of CSV matrices plus a JSON manifest.

Floats are written with repr (shortest round-trip form), so a saved model
reproduces its predictions bit-identically after loading.
"""

from __future__ import annotations

import json
import zipfile

import numpy as np

from .core import FitReport, Ranks, SJiveModel
from .data import BlockScaler, OutcomeScaler
from .errors import ParseError
from .simulate import SimTruth

FORMAT_VERSION = 1


def _matrix_to_csv(arr: np.ndarray) -> str:
    arr = np.atleast_2d(np.asarray(arr, dtype=float))
    lines = [",".join(repr(float(v)) for v in row) for row in arr]
    return "\n".join(lines) + ("\n" if lines else "")


def _matrix_from_csv(text: str, shape) -> np.ndarray:
    rows, cols = shape
    if rows == 0 or cols == 0:
        return np.zeros((rows, cols))
    data = []
    for line in text.strip().splitlines():
        data.append([float(v) for v in line.split(",")])
    arr = np.asarray(data, dtype=float)
    if arr.shape != (rows, cols):
        raise ParseError(f"archive matrix has shape {arr.shape}, manifest says {shape}")
    return arr


class _Writer:
    def __init__(self, zf: zipfile.ZipFile):
        self.zf = zf
        self.entries: dict[str, dict] = {}

    def add(self, name: str, arr) -> None:
        arr2 = np.atleast_2d(np.asarray(arr, dtype=float))
        path = f"matrices/{name}.csv"
        self.zf.writestr(path, _matrix_to_csv(arr2))
        self.entries[name] = {"file": path, "shape": list(arr2.shape)}


def _read_matrices(zf: zipfile.ZipFile, entries: dict) -> dict[str, np.ndarray]:
    out = {}
    for name, meta in entries.items():
        text = zf.read(meta["file"]).decode("utf-8")
        out[name] = _matrix_from_csv(text, tuple(meta["shape"]))
    return out


def _scalers_to_json(model: SJiveModel):
    blocks = None
    if model.block_scalers is not None:
        blocks = [
            {
                "means": [repr(float(v)) for v in sc.means],
                "sds": [repr(float(v)) for v in sc.sds],
                "dropped_ids": list(sc.dropped_ids),
                "dropped_idx": list(sc.dropped_idx),
            }
            for sc in model.block_scalers
        ]
    outcome = None
    if model.outcome_scaler is not None:
        outcome = {
            "mean": repr(float(model.outcome_scaler.mean)),
            "sd": repr(float(model.outcome_scaler.sd)),
        }
    return {"blocks": blocks, "outcome": outcome}


def _scalers_from_json(obj):
    blocks = None
    if obj.get("blocks") is not None:
        blocks = [
            BlockScaler(
                means=np.array([float(v) for v in sc["means"]]),
                sds=np.array([float(v) for v in sc["sds"]]),
                dropped_ids=list(sc["dropped_ids"]),
                dropped_idx=[int(v) for v in sc["dropped_idx"]],
            )
            for sc in obj["blocks"]
        ]
    outcome = None
    if obj.get("outcome") is not None:
        outcome = OutcomeScaler(
            mean=float(obj["outcome"]["mean"]), sd=float(obj["outcome"]["sd"])
        )
    return blocks, outcome


def save_model(model: SJiveModel, path, report: FitReport | None = None) -> None:
    """Write a fitted model (and optionally its fit report) to ``path``."""
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        w = _Writer(zf)
        for i in range(model.k):
            w.add(f"joint_loadings_{i + 1}", model.joint_loadings[i])
            w.add(f"indiv_loadings_{i + 1}", model.indiv_loadings[i])
            w.add(f"indiv_scores_{i + 1}", model.indiv_scores[i])
        w.add("joint_scores", model.joint_scores)
        if model.theta_joint is not None:
            w.add("theta_joint", model.theta_joint[None, :])
            for i, th in enumerate(model.theta_indiv):
                w.add(f"theta_indiv_{i + 1}", th[None, :])
        manifest = {
            "format_version": FORMAT_VERSION,
            "kind": "model",
            "k": model.k,
            "p": list(model.p),
            "n": model.n,
            "eta": repr(float(model.eta)),
            "ranks": {"joint": model.ranks.joint, "individual": list(model.ranks.individual)},
            "has_theta": model.theta_joint is not None,
            "degenerate": list(model.degenerate),
            "standardization": _scalers_to_json(model),
            "variable_ids": model.variable_ids,
            "matrices": w.entries,
        }
        if report is not None:
            manifest["report"] = {
                "iterations": report.iterations,
                "converged": report.converged,
                "final_objective": repr(float(report.final_objective)),
                "objective_trace": [repr(float(v)) for v in report.objective_trace],
            }
        zf.writestr("manifest.json", json.dumps(manifest, indent=1))


def load_model(path):
    """Read back a model archive; returns (model, report or None)."""
    with zipfile.ZipFile(path) as zf:
        manifest = json.loads(zf.read("manifest.json").decode("utf-8"))
        if manifest.get("kind") != "model":
            raise ParseError(f"{path} is not a model archive")
        mats = _read_matrices(zf, manifest["matrices"])
    k = manifest["k"]
    ranks = Ranks(
        manifest["ranks"]["joint"], tuple(manifest["ranks"]["individual"])
    )
    blocks_sc, outcome_sc = _scalers_from_json(manifest["standardization"])
    has_theta = manifest["has_theta"]
    model = SJiveModel(
        joint_loadings=[mats[f"joint_loadings_{i + 1}"] for i in range(k)],
        joint_scores=mats["joint_scores"],
        indiv_loadings=[mats[f"indiv_loadings_{i + 1}"] for i in range(k)],
        indiv_scores=[mats[f"indiv_scores_{i + 1}"] for i in range(k)],
        theta_joint=mats["theta_joint"].ravel() if has_theta else None,
        theta_indiv=[mats[f"theta_indiv_{i + 1}"].ravel() for i in range(k)]
        if has_theta
        else None,
        eta=float(manifest["eta"]),
        ranks=ranks,
        block_scalers=blocks_sc,
        outcome_scaler=outcome_sc,
        variable_ids=manifest.get("variable_ids"),
        degenerate=tuple(manifest.get("degenerate", ())),
    )
    report = None
    if "report" in manifest:
        rep = manifest["report"]
        report = FitReport(
            objective_trace=[float(v) for v in rep["objective_trace"]],
            iterations=rep["iterations"],
            converged=rep["converged"],
            final_objective=float(rep["final_objective"]),
        )
    return model, report


def save_truth(truth: SimTruth, path) -> None:
    """Write generator ground truth to a zip archive."""
    k = len(truth.joint_loadings)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        w = _Writer(zf)
        for i in range(k):
            w.add(f"joint_loadings_{i + 1}", truth.joint_loadings[i])
            w.add(f"indiv_loadings_{i + 1}", truth.indiv_loadings[i])
            w.add(f"indiv_scores_{i + 1}", truth.indiv_scores[i])
            w.add(f"theta_indiv_{i + 1}", truth.theta_indiv[i][None, :])
            w.add(f"noise_block_{i + 1}", truth.noise_blocks[i])
            w.add(f"joint_structure_{i + 1}", truth.joint_structure[i])
            w.add(f"indiv_structure_{i + 1}", truth.indiv_structure[i])
        w.add("joint_scores", truth.joint_scores)
        w.add("theta_joint", truth.theta_joint[None, :])
        w.add("noise_outcome", truth.noise_outcome[None, :])
        w.add("outcome_joint", truth.outcome_joint[None, :])
        w.add("outcome_indiv", truth.outcome_indiv[None, :])
        manifest = {
            "format_version": FORMAT_VERSION,
            "kind": "truth",
            "k": k,
            "matrices": w.entries,
        }
        zf.writestr("manifest.json", json.dumps(manifest, indent=1))


def load_truth(path) -> SimTruth:
    with zipfile.ZipFile(path) as zf:
        manifest = json.loads(zf.read("manifest.json").decode("utf-8"))
        if manifest.get("kind") != "truth":
            raise ParseError(f"{path} is not a truth archive")
        mats = _read_matrices(zf, manifest["matrices"])
    k = manifest["k"]
    return SimTruth(
        joint_loadings=[mats[f"joint_loadings_{i + 1}"] for i in range(k)],
        joint_scores=mats["joint_scores"],
        indiv_loadings=[mats[f"indiv_loadings_{i + 1}"] for i in range(k)],
        indiv_scores=[mats[f"indiv_scores_{i + 1}"] for i in range(k)],
        theta_joint=mats["theta_joint"].ravel(),
        theta_indiv=[mats[f"theta_indiv_{i + 1}"].ravel() for i in range(k)],
        noise_blocks=[mats[f"noise_block_{i + 1}"] for i in range(k)],
        noise_outcome=mats["noise_outcome"].ravel(),
        joint_structure=[mats[f"joint_structure_{i + 1}"] for i in range(k)],
        indiv_structure=[mats[f"indiv_structure_{i + 1}"] for i in range(k)],
        outcome_joint=mats["outcome_joint"].ravel(),
        outcome_indiv=mats["outcome_indiv"].ravel(),
    )
