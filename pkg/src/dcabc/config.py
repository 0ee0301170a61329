"""JSON experiment configurations: model, dataset, weights, schedules and run settings.

Relative paths inside a config are resolved against the config file's
directory.  A config may point at another config for its pilot run, in
which case the pilot is executed in-process (it is deterministic, so the
resulting weights are the same every time).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .core import CloneSchedule, ConfigError, Dataset, DeltaSchedule, RandomSource
from .kernels import (
    FEATURE_MAPS,
    SummaryProjection,
    WeightMatrix,
    pilot_weights,
    semi_automatic_summaries,
)
from .models import DiscreteToyModel, GandKModel, Gbm2dModel, GompertzModel, Prior
from .models.base import Model
from .samplers import AbcDcConfig, DcResult, abc_mcmc, dc_mcmc, dynamic_abc_dc, static_abc_dc

logger = logging.getLogger(__name__)

DATA_STREAM = 99
ALGORITHMS = ("abc_mcmc", "static_abc_dc", "dynamic_abc_dc", "dc_mcmc")
MODELS = {"gandk": GandKModel, "gompertz": GompertzModel, "gbm2d": Gbm2dModel,
          "toy": DiscreteToyModel}


@dataclass
class ExperimentConfig:
    """A parsed experiment file.  ``raw`` keeps the document for echoing into results."""

    path: Path | None
    raw: dict
    name: str
    seed: int

    @property
    def base_dir(self) -> Path:
        return self.path.parent if self.path is not None else Path.cwd()

    def resolve(self, p: str | Path) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def get(self, key: str, default: Any = None) -> Any:
        return self.raw.get(key, default)

    def section(self, key: str) -> dict:
        value = self.raw.get(key)
        if value is None:
            raise ConfigError(f"{self.name}: missing '{key}' section")
        return value


def load_config(path, seed: int | None = None) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(raw, path, seed)


def config_from_dict(raw: dict, path: Path | None = None, seed: int | None = None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw = dict(raw)
    if seed is not None:
        raw["seed"] = int(seed)
    name = raw.get("name") or (path.stem if path else "experiment")
    model = raw.get("model", {})
    model_name = model.get("name") if isinstance(model, dict) else model
    if model_name not in MODELS:
        raise ConfigError(f"{name}: unknown model {model_name!r}; expected one of {sorted(MODELS)}")
    algo = raw.get("algorithm")
    if algo is not None and algo not in ALGORITHMS:
        raise ConfigError(f"{name}: unknown algorithm {algo!r}; expected one of {ALGORITHMS}")
    return ExperimentConfig(path, raw, name, int(raw.get("seed", 0)))


# -- builders ----------------------------------------------------------------

def build_model(cfg: ExperimentConfig) -> Model:
    spec = cfg.raw["model"]
    spec = {"name": spec} if isinstance(spec, str) else dict(spec)
    name = spec.pop("name")
    spec.pop("notes", None)
    prior = spec.pop("prior", None)
    if prior is not None:
        spec["prior"] = Prior.from_json(prior)
    try:
        return MODELS[name](**spec)
    except TypeError as exc:
        raise ConfigError(f"{cfg.name}: bad options for model {name}: {exc}") from exc


def load_dataset(cfg: ExperimentConfig, model: Model) -> Dataset:
    spec = cfg.section("dataset")
    if "path" in spec:
        path = cfg.resolve(spec["path"])
        if not path.exists():
            raise ConfigError(f"dataset file not found: {path}")
        return Dataset.from_csv(path)
    if "simulate" in spec:
        sim = spec["simulate"]
        theta = np.asarray(sim["theta"], dtype=float)
        if theta.size != model.dim:
            raise ConfigError(f"{cfg.name}: dataset theta has {theta.size} entries, "
                              f"model {model.name} has {model.dim}")
        return model.simulate(theta, RandomSource(int(sim.get("seed", 0)), DATA_STREAM))
    raise ConfigError(f"{cfg.name}: dataset needs 'path' or 'simulate'")


def delta_schedule(doc) -> DeltaSchedule:
    if isinstance(doc, (int, float)):
        return DeltaSchedule.constant(float(doc))
    return DeltaSchedule(tuple((int(s), float(d)) for s, d in doc))


def clone_schedule(doc) -> CloneSchedule:
    return CloneSchedule(tuple((int(s), int(k)) for s, k in doc))


@dataclass
class PilotOutput:
    weights: WeightMatrix
    method: str
    projection: SummaryProjection | None = None
    result: DcResult | None = None
    initial_weights: WeightMatrix | None = None
    info: dict = field(default_factory=dict)

    def weights_json(self) -> dict:
        doc = {"method": self.method, **self.weights.to_json()}
        if self.initial_weights is not None:
            doc["initial_omega"] = [float(v) for v in self.initial_weights.scales]
        return doc


def fit_projection(model: Model, spec: dict, seed: int) -> SummaryProjection:
    """Semi-automatic summaries: regress parameters on features of prior simulations."""
    n = int(spec.get("n_sims", 20000))
    features = spec.get("features", "raw_and_squares")
    if features not in FEATURE_MAPS:
        raise ConfigError(f"unknown feature map {features!r}")
    rng = RandomSource(seed, (DATA_STREAM, 1))
    theta = model.prior.sample_many(n, rng.child(0))
    obs = np.concatenate([model.simulate_batch(t, [rng.child(1, i)]) for i, t in enumerate(theta)])
    return semi_automatic_summaries(theta, FEATURE_MAPS[features](obs), features)


def predictive_weights(model: Model, theta0, summaries, n: int, seed: int) -> WeightMatrix:
    """Scales equal to the sd of summaries simulated at ``theta0``."""
    rngs = [RandomSource(seed, (DATA_STREAM, 2, i)) for i in range(n)]
    theta0 = np.asarray(theta0, dtype=float)
    if summaries is None:
        sims = model.simulate_summaries(theta0, rngs)
    else:
        sims = summaries.batch(model.simulate_batch(theta0, rngs))
    return WeightMatrix.from_scales(sims.std(axis=0, ddof=1))


def run_pilot(cfg: ExperimentConfig, model: Model | None = None, data: Dataset | None = None,
              threads: int = 1) -> PilotOutput:
    """K = 1 ABC-MCMC whose chain summaries set the kernel weights."""
    model = model or build_model(cfg)
    data = data if data is not None else load_dataset(cfg, model)
    spec = cfg.section("pilot")
    projection = None
    if "projection" in spec:
        projection = fit_projection(model, spec["projection"], cfg.seed)
    d_s = projection.dim if projection is not None else model.n_summaries
    init = spec.get("initial_weights", "unit")
    if init == "unit":
        w0 = WeightMatrix.unit(d_s)
    elif init == "predictive":
        w0 = predictive_weights(model, cfg.section("theta0"), projection,
                                int(spec.get("predictive_sims", 200)), cfg.seed)
    else:
        w0 = WeightMatrix.from_scales(init)
    method = spec.get("method", "mad")
    result = abc_mcmc(model, data, delta_schedule(spec["delta_schedule"]), int(spec["iterations"]),
                      RandomSource(cfg.seed, (DATA_STREAM, 3)), summaries=projection,
                      kernel=cfg.get("kernel", "gaussian"), weights=w0,
                      theta0=cfg.get("theta0"), adapt_interval=cfg.get("adapt_interval", 1000),
                      threads=threads, stagnation_window=0)
    summaries = result.trace.summaries
    if spec.get("final_delta_only", True):
        summaries = summaries[result.trace.final_regime.start - 1:]
    weights = pilot_weights(summaries, method, burnin=int(spec.get("burnin", 0)))
    return PilotOutput(weights, method, projection, result, w0 if init != "unit" else None)


def resolve_weights(cfg: ExperimentConfig, model: Model, data: Dataset,
                    threads: int = 1) -> tuple[WeightMatrix | None, SummaryProjection | None, dict]:
    """Weights and summary map for a run, plus a provenance note for the result file."""
    spec = cfg.get("weights", "unit")
    projection = None
    if cfg.get("projection"):
        path = cfg.resolve(cfg.get("projection"))
        if not path.exists():
            raise ConfigError(f"projection file not found: {path}")
        projection = SummaryProjection.load(path)
    if spec == "unit" or spec is None:
        return None, projection, {"source": "unit"}
    if not isinstance(spec, dict):
        raise ConfigError(f"{cfg.name}: weights must be 'unit' or an object")
    if "omega" in spec or "diagonal" in spec:
        return WeightMatrix.from_json(spec), projection, {"source": "inline"}
    if "file" in spec:
        path = cfg.resolve(spec["file"])
        if not path.exists():
            raise ConfigError(f"weights file not found: {path}")
        return WeightMatrix.from_json(json.loads(path.read_text())), projection, {
            "source": str(spec["file"])}
    if "pilot" in spec:
        pilot_cfg = load_config(cfg.resolve(spec["pilot"]))
        pilot_model = build_model(pilot_cfg)
        pilot_data = load_dataset(pilot_cfg, pilot_model)
        out = run_pilot(pilot_cfg, pilot_model, pilot_data, threads)
        return out.weights, out.projection or projection, {
            "source": f"pilot:{spec['pilot']}", "omega": out.weights.scales.tolist()}
    raise ConfigError(f"{cfg.name}: weights need 'omega', 'file' or 'pilot'")


def run_experiment(cfg: ExperimentConfig, model: Model, data: Dataset,
                   weights: WeightMatrix | None, projection: SummaryProjection | None,
                   threads: int = 1, seed: int | None = None,
                   theta0=None) -> DcResult:
    """Dispatch to the configured sampler."""
    algo = cfg.get("algorithm")
    seed = cfg.seed if seed is None else seed
    rng = RandomSource(seed)
    theta0 = cfg.get("theta0") if theta0 is None else theta0
    common = dict(summaries=projection, kernel=cfg.get("kernel", "gaussian"), weights=weights,
                  theta0=theta0, threads=threads)
    burnin = float(cfg.get("burnin_fraction", 0.1))
    adapt = cfg.get("adapt_interval", 1000)
    window = int(cfg.get("stagnation_window", 5000))
    if algo == "abc_mcmc":
        return abc_mcmc(model, data, delta_schedule(cfg.section("delta_schedule")),
                        int(cfg.section("iterations")), rng, adapt_interval=adapt,
                        burnin_fraction=burnin, stagnation_window=window, **common)
    if algo == "static_abc_dc":
        return static_abc_dc(model, data, float(cfg.section("delta")), int(cfg.section("clones")),
                             int(cfg.section("iterations")), rng, adapt_interval=adapt,
                             burnin_fraction=burnin, stagnation_window=window, **common)
    if algo == "dynamic_abc_dc":
        config = AbcDcConfig(
            delta_schedule(cfg.section("delta_schedule")),
            clone_schedule(cfg.section("clone_schedule")),
            int(cfg.section("iterations")),
            burnin_fraction=burnin,
            adapt_interval=adapt,
            use_regression_adjustment=bool(cfg.get("regression_adjustment", False)),
            center_rule=cfg.get("center_rule", "mean"),
            master_seed=seed,
            stagnation_window=window,
        )
        return dynamic_abc_dc(model, data, config, rng=rng, **common)
    if algo == "dc_mcmc":
        return dc_mcmc(model, data, int(cfg.section("clones")), int(cfg.section("iterations")),
                       rng=rng, theta0=theta0, burnin_fraction=burnin, threads=threads)
    raise ConfigError(f"{cfg.name}: no algorithm given")


def theta_from_result(path: Path) -> np.ndarray:
    doc = json.loads(Path(path).read_text())
    if "theta_hat" not in doc:
        raise ConfigError(f"{path}: no theta_hat in result file")
    return np.asarray(doc["theta_hat"], dtype=float)


def json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")
