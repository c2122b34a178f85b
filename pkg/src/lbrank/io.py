"""JSON readers and writers for experiments and environments.

Readers raise :class:`~lbrank.errors.LBError` subclasses whose message names
the offending field, so the command line can report it verbatim.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .decision import DecisionProblem
from .errors import LBError, NegativeEntry, RowSumError
from .experiment import FiniteExperiment, Garbling, GridExperiment, WeightedDichotomy
from .moral_hazard import MoralHazardEnv
from .numerics import PiecewiseLinearConvex
from .screening import ScreeningEnv

__all__ = [
    "LOAD_ROW_TOL",
    "read_json",
    "load_experiment",
    "experiment_from_dict",
    "experiment_to_dict",
    "save_experiment",
    "load_decision_problem",
    "load_mh_env",
    "load_screening_env",
    "load_garbling",
    "load_dichotomy",
]

LOAD_ROW_TOL = 1e-6


def read_json(source) -> Any:
    if isinstance(source, Mapping):
        return source
    path = Path(source)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise LBError(f"{path}: cannot read file ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise LBError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def _field(data: Mapping, name: str, where: str = ""):
    if not isinstance(data, Mapping) or name not in data:
        raise LBError(f"missing field '{where}{name}'")
    return data[name]


def _matrix(value, name: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise LBError(f"field '{name}' is not a numeric matrix") from exc
    if arr.ndim != 2 or arr.size == 0 or not np.all(np.isfinite(arr)):
        raise LBError(f"field '{name}' must be a nonempty finite matrix")
    return arr


def _vector(value, name: str) -> np.ndarray:
    try:
        arr = np.atleast_1d(np.array(value, dtype=float))
    except (TypeError, ValueError) as exc:
        raise LBError(f"field '{name}' is not a numeric vector") from exc
    if arr.ndim != 1 or not np.all(np.isfinite(arr)):
        raise LBError(f"field '{name}' must be a finite vector")
    return arr


def _stochastic(mat: np.ndarray, name: str) -> np.ndarray:
    """Accept rows within the load tolerance, then renormalize exactly."""
    if np.any(mat < 0):
        i = int(np.argwhere(mat < 0)[0][0])
        raise NegativeEntry(f"field '{name}': negative entry in row {i}", index=i)
    dev = np.abs(mat.sum(axis=1) - 1.0)
    if np.any(dev > LOAD_ROW_TOL):
        i = int(np.argmax(dev > LOAD_ROW_TOL))
        raise RowSumError(f"field '{name}': row {i} sums to {mat[i].sum():.9g}", index=i)
    return mat / mat.sum(axis=1, keepdims=True)


def experiment_from_dict(data: Mapping):
    states = data.get("states") if isinstance(data, Mapping) else None
    if isinstance(data, Mapping) and "grid" in data:
        return GridExperiment(
            _vector(_field(data, "grid"), "grid"),
            _matrix(_field(data, "densities"), "densities"),
            None if data.get("weights") is None else _vector(data["weights"], "weights"),
            states,
        )
    mat = _stochastic(_matrix(_field(data, "matrix"), "matrix"), "matrix")
    return FiniteExperiment(mat, states, data.get("signals"))


def load_experiment(source):
    """A :class:`FiniteExperiment`, or a :class:`GridExperiment` when the file
    carries ``grid``/``densities``."""
    return experiment_from_dict(read_json(source))


def experiment_to_dict(F: FiniteExperiment) -> dict:
    return {
        "states": list(F.states.labels),
        "signals": list(F.signals),
        "matrix": F.matrix.tolist(),
    }


def save_experiment(F: FiniteExperiment, path) -> None:
    Path(path).write_text(json.dumps(experiment_to_dict(F), indent=2) + "\n", encoding="utf-8")


def load_decision_problem(source) -> DecisionProblem:
    data = read_json(source)
    return DecisionProblem(_matrix(_field(data, "payoff"), "payoff"), data.get("actions"))


def _piecewise(data, name: str) -> PiecewiseLinearConvex:
    return PiecewiseLinearConvex(
        _vector(_field(data, "breakpoints", f"{name}."), f"{name}.breakpoints"),
        _vector(_field(data, "values", f"{name}."), f"{name}.values"),
    )


def load_mh_env(source) -> MoralHazardEnv:
    data = read_json(source)
    cost = _field(data, "cost")
    l = _vector(_field(cost, "l", "cost."), "cost.l")
    Q = cost.get("Q")
    Q = np.zeros((l.size, l.size)) if Q is None else np.array(Q, dtype=float, ndmin=2)
    return MoralHazardEnv(
        _vector(_field(data, "u_bounds"), "u_bounds"),
        Q,
        l,
        _piecewise(_field(data, "gamma"), "gamma"),
        float(cost.get("c0", 0.0)),
    )


def load_screening_env(source) -> ScreeningEnv:
    data = read_json(source)
    return ScreeningEnv(
        types=[_vector(p, "types") for p in _field(data, "types")],
        type_probs=_vector(_field(data, "type_probs"), "type_probs"),
        psi=_vector(_field(data, "psi"), "psi"),
        v1=_matrix(_field(data, "v1"), "v1"),
        v2=_piecewise(_field(data, "v2"), "v2"),
        u1=_matrix(_field(data, "u1"), "u1"),
        m_bounds=_vector(_field(data, "m_bounds"), "m_bounds"),
        alternatives=data.get("alternatives"),
    )


def load_garbling(source) -> Garbling:
    data = read_json(source)
    kernel = data["kernel"] if isinstance(data, Mapping) and "kernel" in data else data
    return Garbling(_stochastic(_matrix(kernel, "kernel"), "kernel"))


def load_dichotomy(source, F: FiniteExperiment) -> WeightedDichotomy:
    """Blocks may be given as state indices or state labels."""
    data = read_json(source)
    labels = list(F.states.labels)

    def block(name):
        out = []
        for s in _field(data, name):
            if isinstance(s, str):
                if s not in labels:
                    raise LBError(f"field '{name}': unknown state {s!r}")
                out.append(labels.index(s))
            else:
                out.append(int(s))
        return out

    return WeightedDichotomy(
        block("omega0"), block("omega1"), _vector(_field(data, "w0"), "w0"), _vector(_field(data, "w1"), "w1")
    )
