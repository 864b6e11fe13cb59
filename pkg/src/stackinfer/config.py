"""Experiment configuration: schema validation and model construction.

Configs are single JSON documents with five fixed blocks (follower, leader,
grid, rng, output) plus one study block. Validation walks the document
against a declarative schema, rejects unknown keys, and reports the full
field path of the first violation.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .core import FollowerModel, LeaderModel, Sinusoid, Tabulated, TimeGrid, build_grid


class ConfigError(ValueError):
    """Configuration rejected; the message carries the offending field path."""


_NUMBER = (int, float)


def _expect(cond: bool, path: str, message: str):
    if not cond:
        raise ConfigError(f"{path}: {message}")


def _check_block(block: Any, path: str, required: dict, optional: dict | None = None) -> dict:
    _expect(isinstance(block, dict), path, "must be an object")
    optional = optional or {}
    allowed = set(required) | set(optional)
    for key in block:
        _expect(key in allowed, f"{path}.{key}", "unknown key")
    for key in required:
        _expect(key in block, f"{path}.{key}", "missing required key")
    out = {}
    for key, validator in {**required, **optional}.items():
        if key in block:
            out[key] = validator(block[key], f"{path}.{key}")
    return out


def _number(value, path):
    _expect(isinstance(value, _NUMBER) and not isinstance(value, bool), path, "must be a number")
    _expect(math.isfinite(float(value)), path, "must be finite")
    return float(value)


def _positive(value, path):
    v = _number(value, path)
    _expect(v > 0, path, "must be > 0")
    return v


def _nonnegative(value, path):
    v = _number(value, path)
    _expect(v >= 0, path, "must be >= 0")
    return v


def _integer(value, path):
    _expect(isinstance(value, int) and not isinstance(value, bool), path, "must be an integer")
    return value


def _positive_int(value, path):
    v = _integer(value, path)
    _expect(v > 0, path, "must be > 0")
    return v


def _boolean(value, path):
    _expect(isinstance(value, bool), path, "must be a boolean")
    return value


def _string(value, path):
    _expect(isinstance(value, str), path, "must be a string")
    return value


def _number_list(value, path):
    _expect(isinstance(value, list) and len(value) > 0, path, "must be a nonempty array")
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _pair_list(value, path):
    _expect(isinstance(value, list) and len(value) > 0, path, "must be a nonempty array")
    out = []
    for i, v in enumerate(value):
        _expect(isinstance(v, list) and len(v) == 2, f"{path}[{i}]", "must be a pair")
        out.append((_nonnegative(v[0], f"{path}[{i}][0]"), _nonnegative(v[1], f"{path}[{i}][1]")))
    return out


def _int_list(value, path):
    _expect(isinstance(value, list) and len(value) > 0, path, "must be a nonempty array")
    return [_integer(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _target(value, path):
    _expect(isinstance(value, dict), path, "must be an object")
    kind = value.get("kind")
    _expect(kind in ("sinusoid", "tabulated"), f"{path}.kind", "must be 'sinusoid' or 'tabulated'")
    if kind == "sinusoid":
        spec = _check_block(
            value,
            path,
            {"kind": _string, "amplitude": _number},
            {"omega": _number, "cycles": _number, "phase": _number},
        )
        _expect(
            ("omega" in spec) != ("cycles" in spec),
            path,
            "exactly one of 'omega' or 'cycles' is required",
        )
        return spec
    spec = _check_block(value, path, {"kind": _string, "values": _number_list})
    return spec


_FOLLOWER_SCHEMA = {
    "a_drift": _number,
    "b_control": _number,
    "sigma": _nonnegative,
    "x0": _number,
    "q_track": _nonnegative,
    "r_control": _positive,
    "entropy_weight": _positive,
    "dilation": _number,
}

_LEADER_SCHEMA = {
    "a_drift": _number,
    "b_control": _number,
    "sigma": _nonnegative,
    "x0": _number,
    "q_track": _positive,
    "r_control": _positive,
    "q_terminal": _positive,
    "inference_weight": _nonnegative,
    "target": _target,
}

_OPTIMIZER_OPTIONAL = {
    "objective": _string,
    "batch_size": _positive_int,
    "budget": _positive_int,
    "step_scale": _positive,
    "perturb_scale": _positive,
    "eval_every": _positive_int,
    "eval_paths": _positive_int,
    "common_random_numbers": _boolean,
}


def _optimizer(value, path):
    spec = _check_block(value, path, {}, _OPTIMIZER_OPTIONAL)
    if "objective" in spec:
        _expect(
            spec["objective"] in ("fisher", "variance"),
            f"{path}.objective",
            "must be 'fisher' or 'variance'",
        )
    return spec


STUDY_SCHEMAS = {
    "benchmark-compare": (
        {},
        {
            "n_eval_paths": _positive_int,
            "n_display_paths": _positive_int,
            "optimizer": _optimizer,
            "policy_file": _string,
        },
    ),
    "tradeoff-sweep": (
        {"ratios": _number_list},
        {"n_paths": _positive_int},
    ),
    "objective-compare": (
        {"pairs": _pair_list},
        {"n_paths": _positive_int, "optimizer": _optimizer},
    ),
    "estimator-study": (
        {"inference_weights": _number_list},
        {"n_replays": _positive_int, "path_seed_index": _integer},
    ),
    "multi-period": (
        {"inference_weights": _number_list, "n_episodes": _positive_int},
        {"variance_threshold": _positive},
    ),
    "discrete-convergence": (
        {},
        {
            "fine_exponent": _positive_int,
            "levels": _int_list,
            "n_sigma_replications": _positive_int,
        },
    ),
    "wellposedness": ({}, {"probe_horizon": _positive}),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment configuration plus the raw document."""

    raw: dict
    follower: dict
    leader: dict
    grid: dict
    rng: dict
    output: dict
    study: dict

    @property
    def study_name(self) -> str:
        return self.study["name"]

    @property
    def master_seed(self) -> int:
        return self.rng["master_seed"]

    @property
    def bit_exact(self) -> bool:
        return self.rng.get("bit_exact", True)

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def build_grid(self) -> TimeGrid:
        return build_grid(self.grid["horizon"], self.grid["n_steps"])

    def build_follower(self) -> FollowerModel:
        return FollowerModel(**self.follower)

    def build_leader(self, grid: TimeGrid, **overrides) -> LeaderModel:
        spec = {**self.leader, **overrides}
        tgt = spec.pop("target")
        if isinstance(tgt, dict):
            tgt = self._build_target(tgt, grid)
        return LeaderModel(target=tgt, **spec)

    def _build_target(self, spec: dict, grid: TimeGrid):
        if spec["kind"] == "sinusoid":
            omega = spec.get("omega")
            if omega is None:
                omega = 2.0 * math.pi * spec["cycles"] / grid.horizon
            return Sinusoid(
                amplitude=spec["amplitude"], omega=omega, phase=spec.get("phase", 0.0)
            )
        values = spec["values"]
        if len(values) != grid.n_nodes:
            raise ConfigError(
                f"leader.target.values: needs {grid.n_nodes} entries for this grid, "
                f"got {len(values)}"
            )
        return Tabulated(grid=grid, table=np.asarray(values))


def validate_config(doc: Any) -> ExperimentConfig:
    """Validate a parsed JSON document and return the typed configuration."""
    _expect(isinstance(doc, dict), "config", "must be a JSON object")
    top = _check_block(
        doc,
        "config",
        {
            "follower": lambda v, p: _check_block(v, p, _FOLLOWER_SCHEMA),
            "leader": lambda v, p: _check_block(v, p, _LEADER_SCHEMA),
            "grid": lambda v, p: _check_block(
                v, p, {"horizon": _positive, "n_steps": _positive_int}
            ),
            "rng": lambda v, p: _check_block(
                v, p, {"master_seed": _integer}, {"bit_exact": _boolean}
            ),
            "study": lambda v, p: v,
        },
        {
            "output": lambda v, p: _check_block(
                v,
                p,
                {},
                {"directory": _string, "formats": lambda vv, pp: vv},
            ),
        },
    )
    top.setdefault("output", {})
    study = top["study"]
    _expect(isinstance(study, dict), "config.study", "must be an object")
    name = study.get("name")
    _expect(
        isinstance(name, str) and name in STUDY_SCHEMAS,
        "config.study.name",
        f"must be one of {sorted(STUDY_SCHEMAS)}",
    )
    required, optional = STUDY_SCHEMAS[name]
    checked = _check_block(study, "config.study", {"name": _string, **required}, optional)
    fmts = top["output"].get("formats", ["csv", "json"])
    _expect(
        isinstance(fmts, list) and all(f in ("csv", "json") for f in fmts),
        "config.output.formats",
        "must be an array of 'csv'/'json'",
    )
    top["output"]["formats"] = fmts
    return ExperimentConfig(
        raw=doc,
        follower=top["follower"],
        leader=top["leader"],
        grid=top["grid"],
        rng=top["rng"],
        output=top["output"],
        study=checked,
    )


def load_config(path: str) -> ExperimentConfig:
    """Read and validate a config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON in {path}: {exc}") from exc
    return validate_config(doc)
