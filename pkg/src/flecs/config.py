"""Run configuration: validation, TOML loading, and resolved-value echo."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from typing import Any, Optional

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

__all__ = ["ConfigError", "RunConfig", "load_config", "config_from_dict"]

OUTPUT_ROOT_ENV = "FLECS_OUTPUT_ROOT"


class ConfigError(ValueError):
    """Invalid run configuration; message names the offending field."""


@dataclass
class RunConfig:
    """Everything one experiment needs, with validated defaults.

    Defaults reproduce the reference logistic-regression setting: reg_mu=1e-5,
    memory size 16, truncation interval [1e-3, 1e8], unit step size, full
    blend weight, and top-k compression with k resolved to 4d at build time.
    """

    # problem
    problem_kind: str = "libsvm"  # libsvm | synthetic_quadratic
    dataset_path: Optional[str] = None
    d_hint: int = 0
    objective: str = "logreg_l2"  # logreg_l2 | logreg_nonconvex | quadratic
    reg_mu: float = 1e-5
    synthetic_d: int = 50
    synthetic_mu: float = 1e-2
    synthetic_l: float = 1.0

    # partition
    workers: int = 4
    partition_mode: str = "contiguous"  # contiguous | sorted_by_label | shuffled
    partition_seed: int = 0

    # sketch
    sketch_family: str = "gaussian"  # gaussian | coordinate
    sketch_m: int = 16

    # compressor
    compressor: str = "top_k"  # identity | top_k | rand_k | dither
    compressor_k: int = 0  # 0 resolves to 4*d once the dimension is known
    dither_levels: int = 128

    # hessian learning
    hessian_rule: str = "lsr1"  # lsr1 | direct | regularized
    beta: float = 1.0
    hessian_init: str = "local_hessian"  # zero | local_hessian

    # direction
    direction_rule: str = "trunc_inv"  # trunc_inv | fedsonia | regularized
    omega: float = 1e-3
    omega_cap: float = 1e8
    rho: Optional[float] = None  # None resolves to 1/omega_cap

    # run control
    alpha: float = 1.0
    max_iterations: int = 500
    tol: float = 1e-12
    seed: int = 0
    baseline: str = "flecs"  # flecs | gd | fednl_lite
    output_dir: Optional[str] = None
    checkpoint_every: int = 0  # 0 disables checkpointing
    deterministic_timing: bool = False
    max_state_bytes: int = 8 * 1024**3

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        def fail(name: str, msg: str) -> None:
            raise ConfigError(f"{name}: {msg}")

        choices = {
            "problem_kind": ("libsvm", "synthetic_quadratic"),
            "objective": ("logreg_l2", "logreg_nonconvex", "quadratic"),
            "partition_mode": ("contiguous", "sorted_by_label", "shuffled"),
            "sketch_family": ("gaussian", "coordinate"),
            "compressor": ("identity", "top_k", "rand_k", "dither"),
            "hessian_rule": ("lsr1", "direct", "regularized"),
            "direction_rule": ("trunc_inv", "fedsonia", "regularized"),
            "hessian_init": ("zero", "local_hessian"),
            "baseline": ("flecs", "gd", "fednl_lite"),
        }
        for name, allowed in choices.items():
            if getattr(self, name) not in allowed:
                fail(name, f"must be one of {allowed}, got {getattr(self, name)!r}")

        if self.problem_kind == "libsvm" and not self.dataset_path:
            fail("dataset_path", "required for libsvm problems")
        if self.problem_kind == "synthetic_quadratic":
            if self.objective != "quadratic":
                fail("objective", "synthetic_quadratic problems use the quadratic objective")
            if not (0 < self.synthetic_mu <= self.synthetic_l):
                fail("synthetic_mu", "need 0 < mu <= L")
        elif self.objective == "quadratic":
            fail("objective", "quadratic objective needs a synthetic_quadratic problem")

        if self.reg_mu < 0:
            fail("reg_mu", "must be >= 0")
        if self.workers < 1:
            fail("workers", "must be >= 1")
        if self.sketch_m < 1:
            fail("sketch_m", "must be >= 1")
        if self.compressor_k < 0:
            fail("compressor_k", "must be >= 1 (or 0 for the 4d default)")
        if self.dither_levels < 1:
            fail("dither_levels", "must be >= 1")
        if not (0.0 < self.beta <= 1.0):
            fail("beta", "must be in (0, 1]")
        if not (0.0 < self.omega <= self.omega_cap):
            fail("omega", "need 0 < omega <= omega_cap")
        if self.rho is not None and self.rho <= 0:
            fail("rho", "must be positive")
        if self.alpha <= 0:
            fail("alpha", "must be positive")
        if self.max_iterations < 1:
            fail("max_iterations", "must be >= 1")
        if self.tol < 0:
            fail("tol", "must be >= 0")
        if self.checkpoint_every < 0:
            fail("checkpoint_every", "must be >= 0")
        if self.hessian_rule == "regularized" and self.direction_rule != "regularized":
            fail(
                "direction_rule",
                "the regularized hessian rule pairs only with the regularized direction",
            )

    @property
    def rho_resolved(self) -> float:
        return self.rho if self.rho is not None else 1.0 / self.omega_cap

    def resolved_dict(self) -> dict[str, Any]:
        """All fields with defaults materialized, for echoing next to outputs."""
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["rho"] = self.rho_resolved
        return out


_SECTION_FIELDS = {
    "problem": (
        "problem_kind",
        "dataset_path",
        "d_hint",
        "objective",
        "reg_mu",
        "synthetic_d",
        "synthetic_mu",
        "synthetic_l",
    ),
    "partition": ("workers", "partition_mode", "partition_seed"),
    "sketch": ("sketch_family", "sketch_m"),
    "compressor": ("compressor", "compressor_k", "dither_levels"),
    "hessian": ("hessian_rule", "beta", "hessian_init"),
    "direction": ("direction_rule", "omega", "omega_cap", "rho"),
    "run": (
        "alpha",
        "max_iterations",
        "tol",
        "seed",
        "baseline",
        "output_dir",
        "checkpoint_every",
        "deterministic_timing",
        "max_state_bytes",
    ),
}

# TOML keys are shorter than the flat field names inside their own section.
_KEY_ALIASES = {
    ("problem", "kind"): "problem_kind",
    ("problem", "path"): "dataset_path",
    ("problem", "mu"): "synthetic_mu",
    ("problem", "l"): "synthetic_l",
    ("problem", "d"): "synthetic_d",
    ("partition", "mode"): "partition_mode",
    ("partition", "seed"): "partition_seed",
    ("sketch", "family"): "sketch_family",
    ("sketch", "m"): "sketch_m",
    ("compressor", "kind"): "compressor",
    ("compressor", "k"): "compressor_k",
    ("compressor", "levels"): "dither_levels",
    ("hessian", "rule"): "hessian_rule",
    ("direction", "rule"): "direction_rule",
}


def config_from_dict(raw: dict[str, Any]) -> RunConfig:
    """Build a config from nested TOML-style tables."""
    known = {f.name for f in fields(RunConfig)}
    flat: dict[str, Any] = {}
    for section, content in raw.items():
        if not isinstance(content, dict):
            raise ConfigError(f"{section}: top-level keys must be tables")
        if section not in _SECTION_FIELDS:
            raise ConfigError(f"{section}: unknown section")
        for key, value in content.items():
            name = _KEY_ALIASES.get((section, key), key)
            if name not in known or name not in _SECTION_FIELDS[section]:
                raise ConfigError(f"{section}.{key}: unknown option")
            flat[name] = value
    try:
        return RunConfig(**flat)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    cfg = config_from_dict(raw)
    if cfg.output_dir is not None and not os.path.isabs(cfg.output_dir):
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root:
            cfg.output_dir = os.path.join(root, cfg.output_dir)
    return cfg
