"""Run configuration: schema, validation, named presets.

A run config is one JSON file; every path inside it is resolved relative
to the config file's directory.  ``seed`` is mandatory and drives every
random stream in the pipeline through fixed stream ids.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .classifier import TrainConfig
from .distributions import distribution_from_spec
from .errors import ConfigError
from .serialize import config_sha256, read_json

SAMPLER_KINDS = ("ar", "imh", "sir", "is")

# Pipeline-level stream ids; training adds its own (11-13) on top of the
# same seed.
STREAM_TARGET_DATA = 0
STREAM_INSTRUMENTAL_DATA = 1
STREAM_SHUFFLE = 2
STREAM_SAMPLER = 20
STREAM_REFERENCE = 30
STREAM_PROJECTIONS = 31

NAMED_INTEGRANDS = {
    "one": lambda x: np.ones(x.shape[0]),
    "x0": lambda x: x[:, 0],
    "x0_squared": lambda x: x[:, 0] ** 2,
    "norm_squared": lambda x: np.sum(x * x, axis=1),
}


@dataclass
class RunConfig:
    experiment: str
    seed: int
    target_spec: dict
    instrumental_spec: object  # dict or the string "moment_fit"
    n1: int
    n0: int
    train: dict
    sampler: dict
    evaluation: dict
    output_dir: str
    sha256: str
    raw: dict = field(repr=False, default=None)

    @property
    def moment_fit_instrumental(self) -> bool:
        return self.instrumental_spec == "moment_fit"

    def target(self):
        return distribution_from_spec(self.target_spec)

    def train_config(self) -> TrainConfig:
        t = self.train
        return TrainConfig(
            epochs=t["epochs"],
            batch_size=t["batch_size"],
            learning_rate=t["learning_rate"],
            optimizer=t["optimizer"],
            beta1=t["beta1"],
            beta2=t["beta2"],
            adam_eps=t["adam_eps"],
            seed=t["seed"],
            early_stop_patience=t["early_stop_patience"],
            validation_fraction=t["validation_fraction"],
        )


def _require(cond, message):
    if not cond:
        raise ConfigError(message)


def _positive_int(d, key, default=None, minimum=1):
    v = d.get(key, default)
    _require(v is not None, f"missing required field {key!r}")
    _require(isinstance(v, int) and not isinstance(v, bool) and v >= minimum,
             f"{key} must be an integer >= {minimum}, got {v!r}")
    return v


def _resolve_train(section, default_seed) -> dict:
    if section is None:
        section = {}
    _require(isinstance(section, dict), "train must be an object")
    out = {
        "epochs": section.get("epochs", 200),
        "batch_size": section.get("batch_size", 128),
        "learning_rate": section.get("learning_rate", 1e-3),
        "optimizer": section.get("optimizer", "adam"),
        "beta1": section.get("beta1", 0.9),
        "beta2": section.get("beta2", 0.999),
        "adam_eps": section.get("adam_eps", 1e-8),
        "seed": section.get("seed", default_seed),
        "early_stop_patience": section.get("early_stop_patience", 20),
        "validation_fraction": section.get("validation_fraction", 0.1),
        "hidden_layers": list(section.get("hidden_layers", [64, 64])),
        "activation": section.get("activation", "tanh"),
    }
    try:
        TrainConfig(**{k: v for k, v in out.items() if k not in ("hidden_layers", "activation")})
    except ValueError as exc:
        raise ConfigError(f"train: {exc}") from exc
    _require(out["activation"] in ("tanh", "relu"),
             f"train.activation must be tanh or relu, got {out['activation']!r}")
    return out


def _resolve_sampler(section) -> dict:
    _require(isinstance(section, dict), "sampler must be an object")
    kind = section.get("kind")
    _require(kind in SAMPLER_KINDS, f"sampler.kind must be one of {SAMPLER_KINDS}, got {kind!r}")
    out = {"kind": kind}
    if kind == "ar":
        out["n_target"] = _positive_int(section, "n_target", default=10_000)
        out["max_proposals"] = section.get("max_proposals")
        if out["max_proposals"] is not None:
            _require(isinstance(out["max_proposals"], int) and out["max_proposals"] >= 1,
                     "sampler.max_proposals must be a positive integer")
    elif kind == "imh":
        out["n_steps"] = _positive_int(section, "n_steps", default=50_000)
        out["burn_in"] = section.get("burn_in")
        if out["burn_in"] is None:
            out["burn_in"] = out["n_steps"] // 10
        _require(isinstance(out["burn_in"], int) and 0 <= out["burn_in"] < out["n_steps"],
                 "sampler.burn_in must satisfy 0 <= burn_in < n_steps")
    elif kind == "sir":
        out["n_proposals"] = _positive_int(section, "n_proposals", default=100_000)
        out["m_resampled"] = _positive_int(section, "m_resampled", default=10_000)
        out["scheme"] = section.get("scheme", "multinomial")
        _require(out["scheme"] in ("multinomial", "systematic"),
                 f"sampler.scheme must be multinomial or systematic, got {out['scheme']!r}")
    else:  # is
        out["n"] = _positive_int(section, "n", default=100_000, minimum=2)
        out["f"] = section.get("f", "x0_squared")
        _require(out["f"] in NAMED_INTEGRANDS,
                 f"sampler.f must be one of {sorted(NAMED_INTEGRANDS)}, got {out['f']!r}")
    return out


def _resolve_evaluation(section) -> dict:
    if section is None:
        section = {}
    _require(isinstance(section, dict), "evaluation must be an object")
    out = {
        "n_reference": section.get("n_reference", 10_000),
        "n_projections": section.get("n_projections", 10),
        "alpha": section.get("alpha", 0.001),
    }
    _require(isinstance(out["n_reference"], int) and out["n_reference"] >= 1,
             "evaluation.n_reference must be a positive integer")
    _require(isinstance(out["n_projections"], int) and out["n_projections"] >= 0,
             "evaluation.n_projections must be a nonnegative integer")
    _require(isinstance(out["alpha"], (int, float)) and 0 < out["alpha"] < 1,
             "evaluation.alpha must lie in (0, 1)")
    grid = section.get("ratio_grid", {})
    _require(isinstance(grid, dict), "evaluation.ratio_grid must be an object")
    out["ratio_grid"] = {
        "lo": grid.get("lo", -6.0),
        "hi": grid.get("hi", 6.0),
        "n_nodes": grid.get("n_nodes", 500),
    }
    _require(isinstance(out["ratio_grid"]["n_nodes"], int) and out["ratio_grid"]["n_nodes"] >= 2,
             "evaluation.ratio_grid.n_nodes must be an integer >= 2")
    _require(out["ratio_grid"]["lo"] < out["ratio_grid"]["hi"],
             "evaluation.ratio_grid needs lo < hi")
    return out


def config_from_dict(doc: dict, base_dir: str) -> RunConfig:
    _require(isinstance(doc, dict), "config root must be a JSON object")
    seed = doc.get("seed")
    _require(isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0,
             "seed is mandatory and must be a nonnegative integer")
    target_spec = doc.get("target")
    _require(target_spec is not None, "missing required field 'target'")
    try:
        distribution_from_spec(target_spec)
    except ConfigError as exc:
        raise ConfigError(f"target: {exc}") from exc
    instrumental = doc.get("instrumental")
    _require(instrumental is not None, "missing required field 'instrumental'")
    if instrumental != "moment_fit":
        try:
            inst = distribution_from_spec(instrumental)
        except ConfigError as exc:
            raise ConfigError(f"instrumental: {exc}") from exc
        _require(inst.dim == distribution_from_spec(target_spec).dim,
                 "target and instrumental dimensions differ")
    n1 = _positive_int(doc, "n1")
    n0 = _positive_int(doc, "n0")
    train = _resolve_train(doc.get("train"), default_seed=seed)
    sampler = _resolve_sampler(doc.get("sampler", {"kind": "ar"}))
    evaluation = _resolve_evaluation(doc.get("evaluation"))
    output_dir = doc.get("output_dir", "out")
    _require(isinstance(output_dir, str) and output_dir, "output_dir must be a nonempty string")
    for v in (train["learning_rate"], evaluation["alpha"]):
        _require(math.isfinite(v), "numeric config fields must be finite")
    return RunConfig(
        experiment=str(doc.get("experiment", "run")),
        seed=seed,
        target_spec=target_spec,
        instrumental_spec=instrumental,
        n1=n1,
        n0=n0,
        train=train,
        sampler=sampler,
        evaluation=evaluation,
        output_dir=os.path.normpath(os.path.join(base_dir, output_dir)),
        sha256=config_sha256(doc),
        raw=doc,
    )


def load_run_config(path) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    doc = read_json(path)
    return config_from_dict(doc, base_dir=os.path.dirname(os.path.abspath(path)))


def _ring_mixture_spec(n_modes=8, radius=6.0, sigma=0.6) -> dict:
    comps = []
    for k in range(n_modes):
        angle = 2.0 * math.pi * k / n_modes
        comps.append({
            "kind": "gaussian",
            "mean": [radius * math.cos(angle), radius * math.sin(angle)],
            "cov": [[sigma ** 2, 0.0], [0.0, sigma ** 2]],
        })
    return {
        "kind": "gaussian_mixture",
        "weights": [1.0 / n_modes] * n_modes,
        "components": comps,
    }


def preset_config(name: str) -> dict:
    """Built-in demo configs, keyed by preset name."""
    if name == "gaussian-1d":
        return {
            "experiment": "gaussian-1d",
            "seed": 1001,
            "target": {"kind": "gaussian", "mean": [0.0], "cov": [[1.0]]},
            "instrumental": {"kind": "gaussian", "mean": [0.0], "cov": [[4.0]]},
            "n1": 4000,
            "n0": 4000,
            "train": {"epochs": 150, "early_stop_patience": 15},
            "sampler": {"kind": "ar", "n_target": 4000},
            "evaluation": {"n_reference": 4000, "n_projections": 0},
            "output_dir": ".",
        }
    if name == "gmm-2d":
        return {
            "experiment": "gmm-2d",
            "seed": 2002,
            "target": _ring_mixture_spec(),
            "instrumental": "moment_fit",
            "n1": 20000,
            "n0": 20000,
            "train": {"epochs": 300, "early_stop_patience": 30},
            "sampler": {"kind": "sir", "n_proposals": 100_000, "m_resampled": 20_000},
            "evaluation": {
                "n_reference": 20000,
                "n_projections": 10,
                "ratio_grid": {"lo": -10.0, "hi": 10.0, "n_nodes": 500},
            },
            "output_dir": ".",
        }
    if name == "two-moons":
        return {
            "experiment": "two-moons",
            "seed": 3003,
            "target": {"kind": "two_moons", "noise_scale": 0.1},
            "instrumental": "moment_fit",
            "n1": 8000,
            "n0": 8000,
            "train": {"epochs": 200, "early_stop_patience": 20},
            "sampler": {"kind": "sir", "n_proposals": 50_000, "m_resampled": 8000},
            "evaluation": {
                "n_reference": 8000,
                "n_projections": 10,
                "ratio_grid": {"lo": -3.0, "hi": 3.0, "n_nodes": 500},
            },
            "output_dir": ".",
        }
    if name == "rings":
        return {
            "experiment": "rings",
            "seed": 4004,
            "target": {"kind": "rings", "radii": [1.0, 2.5], "noise_scale": 0.08},
            "instrumental": "moment_fit",
            "n1": 8000,
            "n0": 8000,
            "train": {"epochs": 200, "early_stop_patience": 20},
            "sampler": {"kind": "sir", "n_proposals": 50_000, "m_resampled": 8000},
            "evaluation": {
                "n_reference": 8000,
                "n_projections": 10,
                "ratio_grid": {"lo": -3.5, "hi": 3.5, "n_nodes": 500},
            },
            "output_dir": ".",
        }
    raise ConfigError(
        f"unknown preset {name!r}; choose from gaussian-1d, gmm-2d, two-moons, rings"
    )
