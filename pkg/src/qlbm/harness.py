"""Experiment configuration, orchestration, error metrics and file output."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, LayoutError
from .lattice import GaussianParams, analytic_gaussian, classical_run, initial_gaussian, max_velocity
from .qcore import MAX_POSITION_QUBITS
from .qlbm_linear import LinearRunConfig, run_linear
from .qlbm_nonlinear import NonlinearRunConfig, run_nonlinear

log = logging.getLogger(__name__)

MODES = ("linear-q", "nonlinear-q", "classical-linear", "classical-nonlinear", "analytic", "compare")
COLLISIONS = ("linear", "nonlinear")
BACKENDS = ("exact", "shots")
CSV_COLUMNS = ("rho_quantum", "rho_classical", "rho_analytic")


@dataclass
class ExperimentConfig:
    mode: str = "compare"
    collision: str = "linear"
    M: int = 5
    steps: int = 20
    u: float = 0.3
    shots: int = 900_000
    seed: int = 0
    backend: str = "exact"
    update_velocity: bool = False
    rho0: float = 0.1
    ambient: float = 0.1
    x0: float | None = None
    sigma0: float = 4.0
    D: float = 1 / 6
    out: str = "qlbm_out"
    plot: bool = False

    @property
    def n_cells(self) -> int:
        return 1 << self.M

    @property
    def gaussian(self) -> GaussianParams:
        return GaussianParams(self.rho0, self.ambient, self.x0, self.sigma0, self.D)

    @property
    def solver_collision(self) -> str:
        """Collision model actually run (``compare`` and ``analytic`` use ``collision``)."""
        if self.mode in ("linear-q", "classical-linear"):
            return "linear"
        if self.mode in ("nonlinear-q", "classical-nonlinear"):
            return "nonlinear"
        return self.collision


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _convert(key: str, raw):
    kind = _FIELD_TYPES[key]
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind.startswith("float"):
            if key == "x0" and raw.lower() in ("", "none", "auto"):
                return None
            if "/" in raw:
                num, den = raw.split("/")
                return float(num) / float(den)
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {raw!r} as {kind}") from None
    return raw


def _read_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    """Check cross-field invariants and fill ``x0`` with the domain centre."""
    for key, choices in (("mode", MODES), ("collision", COLLISIONS), ("backend", BACKENDS)):
        if getattr(cfg, key) not in choices:
            raise ConfigError(f"{key} must be one of {choices}, got {getattr(cfg, key)!r}")
    if not 1 <= cfg.M <= MAX_POSITION_QUBITS:
        raise LayoutError(f"M must lie in [1, {MAX_POSITION_QUBITS}], got {cfg.M}")
    if cfg.steps < 0:
        raise ConfigError(f"steps must be >= 0, got {cfg.steps}")
    if cfg.shots < 1:
        raise ConfigError(f"shots must be >= 1, got {cfg.shots}")
    if cfg.x0 is None:
        cfg.x0 = cfg.n_cells / 2
    try:
        cfg.gaussian
    except DomainError as e:
        raise ConfigError(str(e)) from None
    if cfg.mode != "analytic":
        coll = cfg.solver_collision
        umax = max_velocity(coll)
        if abs(cfg.u) > umax + 1e-12:
            rule = (
                "theta1 = 2 arccos(sqrt(0.5 (1 + u/cs^2))) requires |u| <= cs^2 = 1/3"
                if coll == "linear"
                else "theta3 = 2 arccos(u + 0.5), theta4 = 2 arccos(u - 0.5) require |u| <= 0.5"
            )
            raise ConfigError(f"u = {cfg.u} is not admissible for {coll} collision: {rule}")
    return cfg


def parse_config(path=None, text: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Build a validated config from a key-value file and/or overrides (overrides win)."""
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config file: {e}") from None
    if text is not None:
        values.update(_read_text(text))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = set(values) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = ExperimentConfig(**{k: _convert(k, v) for k, v in values.items()})
    return validate(cfg)


def format_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {repr(v) if isinstance(v, float) else v}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------


@dataclass
class ErrorReport:
    l2: float
    linf: float
    l2_relative: float
    residuals: np.ndarray

    def summary(self) -> dict:
        return {"l2": self.l2, "linf": self.linf, "l2_relative": self.l2_relative}


def error_report(values, reference) -> ErrorReport:
    values = np.asarray(values, dtype=float)
    reference = np.asarray(reference, dtype=float)
    r = values - reference
    l2 = float(np.linalg.norm(r))
    ref = float(np.linalg.norm(reference))
    return ErrorReport(l2, float(np.max(np.abs(r))), l2 / ref if ref > 0 else float("inf"), r)


def checksum(a) -> str:
    return hashlib.sha256(np.ascontiguousarray(a, dtype=float).tobytes()).hexdigest()


# --------------------------------------------------------------------------
# running
# --------------------------------------------------------------------------


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    x: np.ndarray
    fields: dict
    errors: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)


def _quantum(cfg: ExperimentConfig, rho0: np.ndarray, meta: dict) -> np.ndarray:
    if cfg.solver_collision == "linear":
        run = LinearRunConfig(M=cfg.M, steps=cfg.steps, u=cfg.u, shots=cfg.shots,
                              seed=cfg.seed, backend=cfg.backend)
        res = run_linear(run, rho0.copy())
        if cfg.backend == "shots":
            meta["stderr_max"] = float(res.stderr[cfg.steps].max())
            meta["substreams"] = [f"linear/steps{cfg.steps}/ensemble"]
    else:
        run = NonlinearRunConfig(M=cfg.M, steps=cfg.steps, readout=cfg.backend, shots=cfg.shots,
                                 seed=cfg.seed, update_velocity=cfg.update_velocity)
        res = run_nonlinear(run, rho0.copy(), cfg.u)
        if cfg.backend == "shots":
            meta["substreams"] = [f"nonlinear/step{t}" for t in range(cfg.steps)]
    meta["quantum_seconds"] = res.elapsed
    return res.final


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run the solvers selected by ``cfg.mode`` on one shared initial field."""
    cfg = validate(cfg)
    n = cfg.n_cells
    p = cfg.gaussian
    rho0 = initial_gaussian(p, n)
    rho0.setflags(write=False)
    before = checksum(rho0)
    x = np.arange(n)
    fields = {}
    meta = {"initial_checksum": before, "initial_mass": float(rho0.sum())}
    m = cfg.mode
    coll = cfg.solver_collision

    if m in ("linear-q", "nonlinear-q", "compare"):
        fields["rho_quantum"] = _quantum(cfg, rho0, meta)
    if m in ("classical-linear", "classical-nonlinear", "compare"):
        fields["rho_classical"], _ = classical_run(rho0.copy(), cfg.u, cfg.steps, coll,
                                                   cfg.update_velocity)
    if m in ("analytic", "compare"):
        fields["rho_analytic"] = analytic_gaussian(x, cfg.steps, p, cfg.u, n)
    if checksum(rho0) != before:
        raise RuntimeError("initial field was modified by a solver")

    errors = {}
    if "rho_quantum" in fields and "rho_classical" in fields:
        errors["quantum_vs_classical"] = error_report(fields["rho_quantum"], fields["rho_classical"])
    if "rho_analytic" in fields:
        for name in ("rho_quantum", "rho_classical"):
            if name in fields:
                key = name.removeprefix("rho_") + "_vs_analytic"
                errors[key] = error_report(fields[name], fields["rho_analytic"])
    for k, e in errors.items():
        log.info("%s: linf=%.3e l2=%.3e", k, e.linf, e.l2)
    return ExperimentResult(cfg, x, fields, errors, meta)


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------


def format_csv(result: ExperimentResult) -> str:
    cols = [c for c in CSV_COLUMNS if c in result.fields]
    rows = [",".join(("x",) + tuple(cols))]
    for i, xi in enumerate(result.x):
        rows.append(",".join([str(int(xi))] + [repr(float(result.fields[c][i])) for c in cols]))
    return "\n".join(rows) + "\n"


def emit_outputs(result: ExperimentResult, out_dir=None) -> dict:
    """Write ``results.csv``, ``config.txt``, ``manifest.json`` and optionally ``plot.svg``."""
    cfg = result.config
    out = Path(out_dir if out_dir is not None else cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {"csv": out / "results.csv", "config": out / "config.txt", "manifest": out / "manifest.json"}
        paths["csv"].write_bytes(format_csv(result).encode("utf-8"))
        paths["config"].write_bytes(format_config(cfg).encode("utf-8"))
        manifest = {
            "config": dataclasses.asdict(cfg),
            "seed": cfg.seed,
            "metrics": {k: e.summary() for k, e in result.errors.items()},
            "meta": result.meta,
        }
        paths["manifest"].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        if cfg.plot:
            paths["plot"] = out / "plot.svg"
            _plot(result, paths["plot"])
    except OSError as e:
        raise ConfigError(f"cannot write outputs to {out}: {e}") from None
    return paths


def _plot(result: ExperimentResult, path: Path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    styles = {"rho_quantum": ("o", "quantum"), "rho_classical": ("-", "classical LBM"),
              "rho_analytic": ("--", "analytical")}
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, (style, label) in styles.items():
        if name in result.fields:
            ax.plot(result.x, result.fields[name], style, label=label, mfc="none")
    ax.set_xlabel("x [cells]")
    ax.set_ylabel("density")
    ax.set_title(f"{result.config.mode}, {result.config.solver_collision}, t = {result.config.steps}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
