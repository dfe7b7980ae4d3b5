"""File formats: dataset CSV/JSON sidecars, parameter and model documents,
scenario and plan serialization, and run manifests.

Floats are written with shortest round-trip repr, so writing and re-reading
reproduces values exactly and identical runs produce identical bytes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .bernstein import BernsteinCurve, derivative_curve, sample_curve
from .model import (
    ArousalModel,
    Dataset,
    MixtureComponent,
    ModelParams,
    ObservationSequence,
    Standardization,
)
from .planner import Circle, PlanResult, PlanningScenario
from .synth import GroundTruth

DATA_HEADER = ("t", "d", "d_dot", "x", "y", "z", "x_dot", "y_dot", "z_dot", "arousal")
TRUTH_HEADER = ("t", "z", "w")
PATH_HEADER = ("t", "x", "y", "z", "speed")


def fmt_float(value: float) -> str:
    return repr(float(value))


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_to_jsonable(obj), fh, indent=2)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# Datasets and ground truth
# ---------------------------------------------------------------------------

def save_dataset(dataset: Dataset, directory) -> list[Path]:
    """One CSV per sequence plus a JSON sidecar with the shared standardization."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    std = dataset.feature_standardization
    written = []
    for seq in dataset.sequences:
        times = seq.times if seq.times is not None else np.arange(len(seq), dtype=float)
        rows = [
            [fmt_float(times[i])] + [fmt_float(v) for v in seq.features[i]] + [fmt_float(seq.targets[i])]
            for i in range(len(seq))
        ]
        csv_path = directory / f"{seq.subject_id}.csv"
        write_csv(csv_path, DATA_HEADER, rows)
        write_json(directory / f"{seq.subject_id}.json", {
            "subject_id": seq.subject_id,
            "standardization": standardization_to_dict(std),
        })
        written.extend([csv_path, directory / f"{seq.subject_id}.json"])
    return written


def load_dataset(directory) -> Dataset:
    directory = Path(directory)
    csv_paths = sorted(p for p in directory.glob("*.csv")
                       if not p.name.endswith(".truth.csv"))
    if not csv_paths:
        raise ValueError(f"no sequence CSV files found in {directory}")
    sequences = []
    std = None
    for csv_path in csv_paths:
        sidecar = csv_path.with_suffix(".json")
        if not sidecar.exists():
            raise ValueError(f"missing sidecar {sidecar.name} for {csv_path.name}")
        meta = read_json(sidecar)
        this_std = standardization_from_dict(meta["standardization"])
        if std is None:
            std = this_std
        elif not (np.allclose(std.mean, this_std.mean)
                  and np.allclose(std.scale, this_std.scale)):
            raise ValueError(
                f"{sidecar.name} disagrees with the dataset standardization")
        data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
        sequences.append(ObservationSequence(
            features=data[:, 1:9], targets=data[:, 9],
            subject_id=str(meta["subject_id"]), times=data[:, 0]))
    return Dataset(sequences=sequences, feature_standardization=std)


def save_ground_truth(truth: GroundTruth, dataset: Dataset, directory) -> list[Path]:
    """Per-sequence latent traces as `<subject>.truth.csv` (states are 1-based)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for seq, z, w in zip(dataset.sequences, truth.z, truth.w):
        times = seq.times if seq.times is not None else np.arange(len(seq), dtype=float)
        rows = [[fmt_float(times[i]), str(int(z[i]) + 1), str(int(w[i]) + 1)]
                for i in range(len(seq))]
        path = directory / f"{seq.subject_id}.truth.csv"
        write_csv(path, TRUTH_HEADER, rows)
        written.append(path)
    return written


def load_ground_truth_traces(directory) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Map subject_id -> (z, w) traces, back in 0-based form."""
    directory = Path(directory)
    out = {}
    for path in sorted(directory.glob("*.truth.csv")):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        subject = path.name[: -len(".truth.csv")]
        out[subject] = (data[:, 1].astype(int) - 1, data[:, 2].astype(int) - 1)
    return out


# ---------------------------------------------------------------------------
# Parameters and fitted-model documents
# ---------------------------------------------------------------------------

def standardization_to_dict(std: Standardization) -> dict:
    return {"mean": std.mean, "scale": std.scale}


def standardization_from_dict(d: dict) -> Standardization:
    return Standardization(np.asarray(d["mean"]), np.asarray(d["scale"]))


def params_to_dict(theta: ModelParams) -> dict:
    return {
        "beta": theta.beta,
        "sigma_sq": theta.sigma_sq,
        "pi1": theta.pi1,
        "A": theta.A,
        "mixture": [
            {"weight": m.weight, "mean": m.mean, "variance": m.variance}
            for m in theta.mixture
        ],
    }


def params_from_dict(d: dict) -> ModelParams:
    return ModelParams(
        beta=np.asarray(d["beta"], dtype=float),
        sigma_sq=float(d["sigma_sq"]),
        pi1=np.asarray(d["pi1"], dtype=float),
        A=np.asarray(d["A"], dtype=float),
        mixture=[
            MixtureComponent(float(m["weight"]), float(m["mean"]),
                             float(m["variance"]))
            for m in d["mixture"]
        ],
    )


@dataclass
class ModelFile:
    """A fitted model on disk: parameters, feature scaling, fit metadata."""

    kind: str  # "hmm" or "mse"
    k: int
    params: ModelParams
    standardization: Standardization
    ll_trace: list[float] | None = None
    iterations: int | None = None
    converged: bool | None = None
    train_log_likelihood: float | None = None

    def arousal_model(self) -> ArousalModel:
        return ArousalModel(self.params.beta, self.standardization)


def save_model_file(path, model: ModelFile) -> None:
    doc = {
        "kind": model.kind,
        "k": model.k,
        "params": params_to_dict(model.params),
        "standardization": standardization_to_dict(model.standardization),
        "ll_trace": model.ll_trace,
        "iterations": model.iterations,
        "converged": model.converged,
        "train_log_likelihood": model.train_log_likelihood,
    }
    write_json(path, doc)


def load_model_file(path) -> ModelFile:
    doc = read_json(path)
    for key in ("kind", "k", "params", "standardization"):
        if key not in doc:
            raise ValueError(f"model file {path} missing field {key!r}")
    return ModelFile(
        kind=doc["kind"],
        k=int(doc["k"]),
        params=params_from_dict(doc["params"]),
        standardization=standardization_from_dict(doc["standardization"]),
        ll_trace=doc.get("ll_trace"),
        iterations=doc.get("iterations"),
        converged=doc.get("converged"),
        train_log_likelihood=doc.get("train_log_likelihood"),
    )


# ---------------------------------------------------------------------------
# Scenarios, curves, plans
# ---------------------------------------------------------------------------

_SCENARIO_REQUIRED = ("human_position", "start", "goal", "v_max", "a_max")
_SCENARIO_OPTIONAL = ("gamma", "b_a", "obstacles", "flight_altitude", "degree",
                      "t_min", "t_max", "safety_margin")


def scenario_from_dict(d: dict) -> PlanningScenario:
    missing = [k for k in _SCENARIO_REQUIRED if k not in d]
    if missing:
        raise ValueError(f"scenario missing required field(s): {', '.join(missing)}")
    unknown = set(d) - set(_SCENARIO_REQUIRED) - set(_SCENARIO_OPTIONAL)
    if unknown:
        raise ValueError(f"scenario has unknown field(s): {', '.join(sorted(unknown))}")
    kwargs = {k: d[k] for k in _SCENARIO_OPTIONAL if k in d and k != "obstacles"}
    obstacles = [Circle(np.asarray(o["center"], dtype=float), float(o["radius"]))
                 for o in d.get("obstacles", [])]
    return PlanningScenario(
        human_position=np.asarray(d["human_position"], dtype=float),
        start=np.asarray(d["start"], dtype=float),
        goal=np.asarray(d["goal"], dtype=float),
        v_max=float(d["v_max"]),
        a_max=float(d["a_max"]),
        obstacles=obstacles,
        **kwargs,
    )


def scenario_to_dict(scenario: PlanningScenario) -> dict:
    return {
        "human_position": scenario.human_position,
        "start": scenario.start,
        "goal": scenario.goal,
        "v_max": scenario.v_max,
        "a_max": scenario.a_max,
        "gamma": scenario.gamma,
        "b_a": scenario.b_a,
        "obstacles": [{"center": o.center, "radius": o.radius}
                      for o in scenario.obstacles],
        "flight_altitude": scenario.flight_altitude,
        "degree": scenario.degree,
        "t_min": scenario.t_min,
        "t_max": scenario.t_max,
        "safety_margin": scenario.safety_margin,
    }


def load_scenario(path) -> PlanningScenario:
    return scenario_from_dict(read_json(path))


def curve_to_dict(curve: BernsteinCurve) -> dict:
    return {"degree": curve.degree, "t_f": curve.t_f,
            "control_points": curve.control_points}


def curve_from_dict(d: dict) -> BernsteinCurve:
    curve = BernsteinCurve(np.asarray(d["control_points"], dtype=float),
                           float(d["t_f"]))
    if curve.degree != int(d["degree"]):
        raise ValueError("curve degree disagrees with its control point count")
    return curve


def plan_result_to_dict(result: PlanResult) -> dict:
    return {
        "curve": curve_to_dict(result.curve),
        "cost": result.cost,
        "constraint_report": {
            "collision": result.report.collision,
            "velocity": result.report.velocity,
            "acceleration": result.report.acceleration,
        },
        "min_human_distance": result.min_human_distance,
        "diagnostics": {
            "iterations": result.diagnostics.iterations,
            "restarts": result.diagnostics.restarts,
            "converged": result.diagnostics.converged,
            "feasible_starts": result.diagnostics.feasible_starts,
        },
    }


def write_path_csv(path, curve: BernsteinCurve, altitude: float,
                   n_samples: int = 200) -> None:
    """Sampled path as t,x,y,z,speed for external plotting."""
    times = np.linspace(0.0, curve.t_f, n_samples + 1)
    points = sample_curve(curve, times)
    speeds = np.linalg.norm(sample_curve(derivative_curve(curve), times), axis=1)
    rows = [
        [fmt_float(t), fmt_float(p[0]), fmt_float(p[1]), fmt_float(altitude), fmt_float(s)]
        for t, p, s in zip(times, points, speeds)
    ]
    write_csv(Path(path), PATH_HEADER, rows)


def write_eval_csv(path, rows: list[tuple[str, int, float]]) -> None:
    """Model-comparison table: model,K,test_log_likelihood."""
    write_csv(Path(path), ("model", "K", "test_log_likelihood"),
               [[name, str(k), fmt_float(ll)] for name, k, ll in rows])


# ---------------------------------------------------------------------------
# Run manifests
# ---------------------------------------------------------------------------

def manifest_path_for(out_path) -> Path:
    out_path = Path(out_path)
    if out_path.is_dir():
        return out_path / "manifest.json"
    return out_path.parent / f"{out_path.stem}.manifest.json"


def write_manifest(out_path, command: str, config: dict, inputs: list,
                   outputs: list, seed: int | None,
                   duration_s: float) -> Path:
    """One manifest per command, written next to its outputs."""
    path = manifest_path_for(out_path)
    write_json(path, {
        "command": command,
        "config": config,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "seed": seed,
        "version": __version__,
        "duration_s": duration_s,
    })
    return path
