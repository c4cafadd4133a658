"""Command-line driver: ``qc-geo <mode> --spec file.json [--out dir] [--threads N]``.

Exit status is 0 on success, 1 for invalid input and 2 when a solver or a
verification fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import ConsistencyError, DomainError, QcGeoError, SingularityError, SolverError, SpecError
from .field_synth import bloch_vectors, fields_many
from .geodesic import BvpConfig, path_oracle, reduced_geodesic, solve_bvp, sweep_fiber
from .lie_rep import GUARD_BAND, GroupTag, check_interior
from .metric import cost_rates, cumulative_length
from .phase_opt import (
    DEFAULT_SHAPE_RATIO,
    PrescribedPath,
    induced_metric,
    optimal_phase,
    optimal_trajectory,
    perturbation_scan,
    surface_oracle,
    sweep_submanifold,
)
from .propagate import verify_trajectory
from .trajectory import Trajectory, as_weights

MODES = ("bvp", "fiber-sweep", "reduced", "phase-opt", "perturb-scan", "verify", "oracle")

_COMMON_KEYS = {"group", "mode", "weights", "seed", "output", "solver", "t_f"}
_MODE_KEYS = {
    "bvp": {"start", "end"},
    "fiber-sweep": {"start", "end", "eta_grid"},
    "reduced": {"start", "end"},
    "phase-opt": {"path", "eta_grid", "oracle"},
    "perturb-scan": {"path", "delta_grid", "shape_ratio"},
    "verify": {"trajectory"},
    "oracle": {"start", "end", "oracle"},
}
_REQUIRED = {
    "bvp": ("start", "end"),
    "fiber-sweep": ("start", "end", "eta_grid"),
    "reduced": ("start", "end"),
    "verify": ("trajectory",),
    "oracle": ("start", "end"),
}
_SOLVER_KEYS = {"steps", "newton_tol", "max_newton_iters", "restarts", "fd_jacobian_eps", "rtol", "atol"}
_ORACLE_KEYS = {"n_knots", "iters", "enabled"}

# Values quoted for the built-in example path; SU(1,1) disagrees with quadrature.
_REPORTED_OPTIMUM = {GroupTag.SU2: -0.461, GroupTag.SU11: -0.309}

TRAJECTORY_HEADER = ["t", "c1", "phi", "eta", "v_c1", "v_phi", "v_eta", "f0", "f1", "f2", "cost_rate", "cum_cost"]
SWEEP_HEADER = ["grid_value", "length", "converged"]

VERIFY_LIMITS = {"final_infidelity": 1e-8, "max_param_deviation": 1e-6, "pseudo_norm_drift": 1e-10,
                 "unitarity_drift": 1e-10}


@dataclass
class ProblemSpec:
    """A validated problem specification with defaults applied."""

    group: GroupTag
    mode: str
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    start: tuple[float, ...] | None = None
    end: tuple[float, ...] | None = None
    eta_grid: list[float] | None = None
    delta_grid: list[float] | None = None
    path: Any = "paper-example"
    shape_ratio: float | None = None
    t_f: float = 1.0
    solver: dict[str, Any] = field(default_factory=dict)
    oracle: dict[str, Any] = field(default_factory=dict)
    trajectory: str | None = None
    output: str | None = None
    seed: int = 0

    def bvp_config(self) -> BvpConfig:
        return BvpConfig(seed=self.seed, **self.solver)

    def echo(self) -> dict[str, Any]:
        d = asdict(self)
        d["group"] = self.group.value
        return d


def _fmt(x: Any) -> str:
    return "%.17g" % float(x)


def _number(key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecError(f"{key} must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise SpecError(f"{key} must be finite")
    return value


def _vector(key: str, value: Any, sizes: Sequence[int]) -> tuple[float, ...]:
    if not isinstance(value, (list, tuple)) or len(value) not in sizes:
        raise SpecError(f"{key} must be a list of {' or '.join(map(str, sizes))} numbers")
    return tuple(_number(f"{key}[{i}]", v) for i, v in enumerate(value))


def _grid(key: str, value: Any) -> list[float]:
    if isinstance(value, dict):
        unknown = set(value) - {"start", "stop", "num"}
        if unknown:
            raise SpecError(f"unknown key in {key}: {sorted(unknown)[0]}")
        try:
            num = value["num"]
            lo, hi = _number(f"{key}.start", value["start"]), _number(f"{key}.stop", value["stop"])
        except KeyError as exc:
            raise SpecError(f"{key} requires start, stop and num (missing {exc.args[0]})") from None
        if isinstance(num, bool) or not isinstance(num, int) or num < 1:
            raise SpecError(f"{key}.num must be a positive integer")
        return [float(x) for x in np.linspace(lo, hi, num)]
    if not isinstance(value, list) or not value:
        raise SpecError(f"{key} must be a nonempty list or {{start, stop, num}}")
    return [_number(f"{key}[{i}]", v) for i, v in enumerate(value)]


def _interior(tag: GroupTag, key: str, point: tuple[float, ...]) -> None:
    try:
        check_interior(tag, point[0], GUARD_BAND, name=f"{key}.c1")
    except DomainError as exc:
        raise SpecError(str(exc)) from None


def parse_spec(source: Any, mode: str | None = None) -> ProblemSpec:
    """Validate a JSON document (path, JSON text or dict) into a :class:`ProblemSpec`.

    Unknown keys are rejected.  ``mode`` from the command line overrides or
    must agree with a ``mode`` key in the document.

    Raises
    ------
    SpecError
        Naming the offending key and the violated constraint.
    """
    if isinstance(source, dict):
        doc = dict(source)
    else:
        text = source
        if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        try:
            doc = json.loads(text)
        except (TypeError, json.JSONDecodeError) as exc:
            raise SpecError(f"spec is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SpecError("spec must be a JSON object")

    doc_mode = doc.get("mode")
    if mode is not None and doc_mode is not None and doc_mode != mode:
        raise SpecError(f"mode: spec says {doc_mode!r} but command line says {mode!r}")
    mode = mode or doc_mode
    if mode not in MODES:
        raise SpecError(f"mode must be one of {', '.join(MODES)}, got {mode!r}")
    allowed = _COMMON_KEYS | _MODE_KEYS[mode]
    for key in doc:
        if key not in allowed:
            raise SpecError(f"unknown key for mode {mode}: {key}")
    for key in _REQUIRED.get(mode, ()):
        if key not in doc:
            raise SpecError(f"missing required key for mode {mode}: {key}")
    if "group" not in doc:
        raise SpecError("missing required key: group")
    try:
        tag = GroupTag.parse(doc["group"])
    except (DomainError, ValueError):
        raise SpecError(f"group must be su2 or su11, got {doc['group']!r}") from None

    spec = ProblemSpec(group=tag, mode=mode)
    if "weights" in doc:
        if not isinstance(doc["weights"], list):
            raise SpecError("weights must be a list of 3 numbers")
        try:
            spec.weights = as_weights([_number("weights", w) for w in doc["weights"]])
        except DomainError as exc:
            raise SpecError(str(exc)) from None
    start_sizes = {"reduced": (2,)}.get(mode, (3,))
    end_sizes = {"reduced": (2,), "fiber-sweep": (2, 3)}.get(mode, (3,))
    if "start" in doc:
        spec.start = _vector("start", doc["start"], start_sizes)
        _interior(tag, "start", spec.start)
    if "end" in doc:
        spec.end = _vector("end", doc["end"], end_sizes)
        _interior(tag, "end", spec.end)
    if "eta_grid" in doc:
        spec.eta_grid = _grid("eta_grid", doc["eta_grid"])
    if "delta_grid" in doc:
        spec.delta_grid = _grid("delta_grid", doc["delta_grid"])
    if "t_f" in doc:
        spec.t_f = _number("t_f", doc["t_f"])
        if spec.t_f <= 0:
            raise SpecError("t_f must be > 0")
    if "shape_ratio" in doc:
        spec.shape_ratio = _number("shape_ratio", doc["shape_ratio"])
        if spec.shape_ratio <= 0:
            raise SpecError("shape_ratio must be > 0")
    if "path" in doc:
        path = doc["path"]
        if path != "paper-example":
            if not isinstance(path, dict) or set(path) != {"t", "c1", "phi"}:
                raise SpecError("path must be 'paper-example' or an object with keys t, c1, phi")
            lengths = {len(path[k]) if isinstance(path[k], list) else -1 for k in ("t", "c1", "phi")}
            if len(lengths) != 1 or -1 in lengths:
                raise SpecError("path.t, path.c1 and path.phi must be lists of equal length")
            path = {k: [_number(f"path.{k}", v) for v in path[k]] for k in ("t", "c1", "phi")}
        spec.path = path
    if "solver" in doc:
        if not isinstance(doc["solver"], dict):
            raise SpecError("solver must be an object")
        for key, value in doc["solver"].items():
            if key not in _SOLVER_KEYS:
                raise SpecError(f"unknown key in solver: {key}")
            if key in ("steps", "max_newton_iters", "restarts"):
                if isinstance(value, bool) or not isinstance(value, int):
                    raise SpecError(f"solver.{key} must be an integer")
            else:
                value = _number(f"solver.{key}", value)
            spec.solver[key] = value
        try:
            BvpConfig(**spec.solver)
        except DomainError as exc:
            raise SpecError(f"solver: {exc}") from None
    if "oracle" in doc:
        if not isinstance(doc["oracle"], dict):
            raise SpecError("oracle must be an object")
        for key, value in doc["oracle"].items():
            if key not in _ORACLE_KEYS:
                raise SpecError(f"unknown key in oracle: {key}")
            if key == "enabled":
                if not isinstance(value, bool):
                    raise SpecError("oracle.enabled must be true or false")
            elif isinstance(value, bool) or not isinstance(value, int) or value < (8 if key == "n_knots" else 1):
                raise SpecError(f"oracle.{key} must be an integer >= {8 if key == 'n_knots' else 1}")
            spec.oracle[key] = value
    if "trajectory" in doc:
        if not isinstance(doc["trajectory"], str):
            raise SpecError("trajectory must be a file path")
        spec.trajectory = doc["trajectory"]
    if "output" in doc:
        if not isinstance(doc["output"], str) or not doc["output"] or os.sep in doc["output"]:
            raise SpecError("output must be a plain file name prefix")
        spec.output = doc["output"]
    if "seed" in doc:
        if isinstance(doc["seed"], bool) or not isinstance(doc["seed"], int) or doc["seed"] < 0:
            raise SpecError("seed must be a nonnegative integer")
        spec.seed = doc["seed"]
    return spec


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trajectory_csv(traj: Trajectory, t_f: float = 1.0) -> str:
    """CSV text of a trajectory on the physical window ``[0, t_f]``."""
    t = traj.times * t_f
    v = traj.velocities / t_f
    f = fields_many(traj.tag, traj.points, v)
    rate = cost_rates(traj.tag, traj.weights, traj.points, v)
    cum = cumulative_length(traj)
    cols = [t, traj.points[:, 0], traj.points[:, 1], traj.points[:, 2], v[:, 0], v[:, 1], v[:, 2],
            f[:, 0], f[:, 1], f[:, 2], rate, cum]
    header = list(TRAJECTORY_HEADER)
    if traj.tag is GroupTag.SU2:
        n = bloch_vectors(traj.points)
        cols += [n[:, 0], n[:, 1], n[:, 2]]
        header += ["n_x", "n_y", "n_z"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*cols):
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def read_trajectory_csv(path: str, tag: GroupTag, weights: Any) -> Trajectory:
    """Load a trajectory CSV written by :func:`trajectory_csv`."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise SpecError(f"trajectory: cannot read {path}: {exc}") from None
    if not rows or rows[0][: len(TRAJECTORY_HEADER)] != TRAJECTORY_HEADER:
        raise SpecError(f"trajectory: {path} lacks the expected header")
    try:
        data = np.array([[float(x) for x in r[:7]] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise SpecError(f"trajectory: malformed number in {path}: {exc}") from None
    if data.shape[0] < 2:
        raise SpecError("trajectory: needs at least two rows")
    traj = Trajectory(tag, weights, data[:, 0], data[:, 1:4], data[:, 4:7])
    try:
        traj.check_interior(GUARD_BAND)
    except DomainError as exc:
        raise SpecError(f"trajectory: {exc}") from None
    return traj


def sweep_csv(pairs: Sequence[tuple[float, float]], converged: Sequence[bool]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for (g, length), ok in zip(pairs, converged):
        w.writerow([_fmt(g), _fmt(length), "1" if ok else "0"])
    return buf.getvalue()


def _path(spec: ProblemSpec) -> PrescribedPath:
    if spec.path == "paper-example":
        return PrescribedPath.paper_example(spec.group, t_f=spec.t_f, weights=spec.weights)
    p = spec.path
    return PrescribedPath.from_samples(spec.group, p["t"], p["c1"], p["phi"], weights=spec.weights)


def _diag(traj: Trajectory) -> dict[str, Any]:
    keys = ("newton_iterations", "restarts_used", "residual", "length", "reduced_length", "eta_opt_final",
            "seed")
    return {k: traj.info[k] for k in keys if k in traj.info}


def _run_mode(spec: ProblemSpec, threads: int) -> tuple[dict[str, str], dict[str, Any]]:
    """Compute the outputs of one mode; returns ``({suffix: text}, diagnostics)``."""
    tag, w = spec.group, spec.weights
    files: dict[str, str] = {}
    diag: dict[str, Any] = {}
    if spec.mode == "bvp":
        traj = solve_bvp(tag, w, spec.start, spec.end, spec.bvp_config())
        files["trajectory.csv"] = trajectory_csv(traj, spec.t_f)
        diag["bvp"] = _diag(traj)
    elif spec.mode == "reduced":
        cfg = spec.bvp_config()
        traj = reduced_geodesic(tag, spec.start, spec.end, cfg.steps, cfg)
        files["trajectory.csv"] = trajectory_csv(traj, spec.t_f)
        diag["reduced"] = _diag(traj)
    elif spec.mode == "fiber-sweep":
        res = sweep_fiber(tag, w, spec.start, spec.end[:2], spec.eta_grid, spec.bvp_config(), threads)
        files["sweep.csv"] = sweep_csv(res.grid, res.converged)
        files["trajectory.csv"] = trajectory_csv(res.trajectory, spec.t_f)
        diag["sweep"] = {"argmin_eta": res.argmin_eta, "argmin_length": res.argmin_length,
                         "failures": [e for e in res.errors if e]}
        diag["best"] = _diag(res.trajectory)
    elif spec.mode == "phase-opt":
        path = _path(spec)
        eta = optimal_phase(path)
        metric = induced_metric(path)
        grid = spec.eta_grid or [float(x) for x in np.linspace(-1.0, 0.2, 25)]
        res = sweep_submanifold(metric, grid, threads=threads)
        files["sweep.csv"] = sweep_csv(res.grid, res.converged)
        files["trajectory.csv"] = trajectory_csv(optimal_trajectory(path), spec.t_f)
        files["geodesic.csv"] = trajectory_csv(res.trajectory, spec.t_f)
        diag["phase"] = {
            "quadrature_eta_final": float(eta[-1]),
            "sweep_argmin_eta": res.argmin_eta,
            "sweep_argmin_length": res.argmin_length,
            "max_pointwise_gap": float(np.abs(res.trajectory.points[:, 2] - eta).max()),
            "failures": [e for e in res.errors if e],
        }
        if spec.path == "paper-example":
            diag["phase"]["reported_eta_final"] = _REPORTED_OPTIMUM[tag]
        if spec.oracle.get("enabled", True):
            length, eta_end = surface_oracle(metric, spec.oracle.get("n_knots", 50), spec.oracle.get("iters", 400))
            diag["phase"]["oracle_eta_final"] = eta_end
            diag["phase"]["oracle_length"] = length
    elif spec.mode == "perturb-scan":
        path = _path(spec)
        ratio = spec.shape_ratio if spec.shape_ratio is not None else DEFAULT_SHAPE_RATIO[tag]
        grid = spec.delta_grid or [float(x) for x in np.linspace(-0.5, 0.5, 11)]
        pairs = perturbation_scan(path, grid, ratio, threads)
        files["sweep.csv"] = sweep_csv(pairs, [True] * len(pairs))
        files["trajectory.csv"] = trajectory_csv(optimal_trajectory(path, 0.0, ratio), spec.t_f)
        i = min(range(len(pairs)), key=lambda k: pairs[k][1])
        diag["scan"] = {"shape_ratio": ratio, "argmin_delta": pairs[i][0], "min_length": pairs[i][1]}
    elif spec.mode == "verify":
        traj = read_trajectory_csv(spec.trajectory, tag, w)
        report = verify_trajectory(traj).as_dict()
        files["report.json"] = json.dumps(report, indent=2, sort_keys=True) + "\n"
        failed = [k for k, lim in VERIFY_LIMITS.items() if not report[k] < lim]
        diag["verify"] = dict(report, failed=failed)
        if failed:
            raise _VerificationFailed(files, diag, failed)
    elif spec.mode == "oracle":
        cfg = spec.oracle
        length = path_oracle(tag, w, spec.start, spec.end, cfg.get("n_knots", 50), cfg.get("iters", 400))
        diag["oracle"] = {"length": length}
        try:
            traj = solve_bvp(tag, w, spec.start, spec.end, spec.bvp_config())
            diag["oracle"]["bvp_length"] = traj.info["length"]
            diag["oracle"]["relative_gap"] = (length - traj.info["length"]) / max(traj.info["length"], 1e-300)
        except QcGeoError as exc:
            diag["oracle"]["bvp_error"] = str(exc)
    return files, diag


class _VerificationFailed(Exception):
    def __init__(self, files, diag, failed):
        super().__init__(f"verification failed: {', '.join(failed)}")
        self.files, self.diag = files, diag


def _version() -> str:
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:
        return "0.1.0"


def run(spec: ProblemSpec, out_dir: str = ".", threads: int = 1) -> tuple[int, list[str]]:
    """Execute ``spec`` and write its artifacts; returns ``(exit_status, written_paths)``."""
    os.makedirs(out_dir, exist_ok=True)
    prefix = os.path.join(out_dir, spec.output or spec.mode)
    t0 = time.perf_counter()
    status, error = 0, None
    try:
        files, diag = _run_mode(spec, threads)
    except _VerificationFailed as exc:
        files, diag, status, error = exc.files, exc.diag, 2, str(exc)
    except (SingularityError, SolverError, ConsistencyError) as exc:
        files, diag, status, error = {}, {}, 2, str(exc)
    written = []
    for suffix, text in files.items():
        path = f"{prefix}_{suffix}"
        _atomic_write(path, text)
        written.append(path)
    manifest = {
        "spec": spec.echo(),
        "version": _version(),
        "wall_time_s": time.perf_counter() - t0,
        "threads": threads,
        "status": status,
        "error": error,
        "diagnostics": diag,
        "outputs": [os.path.basename(p) for p in written],
    }
    path = f"{prefix}_manifest.json"
    _atomic_write(path, json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n")
    written.append(path)
    return status, written


def _json_default(x: Any) -> Any:
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serialisable: {type(x).__name__}")


def _threads(arg: int | None) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("QC_GEO_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise SpecError(f"QC_GEO_THREADS must be an integer, got {env!r}") from None
    return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qc-geo", description=__doc__.splitlines()[0])
    p.add_argument("mode", choices=MODES)
    p.add_argument("--spec", required=True, help="JSON problem specification")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--threads", type=int, default=None, help="worker threads for sweeps (env QC_GEO_THREADS)")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads is not None and args.threads < 1:
            raise SpecError("--threads must be >= 1")
        threads = _threads(args.threads)
        spec = parse_spec(args.spec if os.path.exists(args.spec) else _missing(args.spec), args.mode)
        status, written = run(spec, args.out, threads)
    except (SpecError, DomainError) as exc:
        print(f"qc-geo: error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    if status:
        print(f"qc-geo: {spec.mode} failed (status {status})", file=sys.stderr)
    return status


def _missing(path: str):
    raise SpecError(f"spec file not found: {path}")


if __name__ == "__main__":
    sys.exit(main())
