from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from hyperfill.domain.kinds import CheckName, SpaceFormat, SpaceKind
from hyperfill.domain.rules import validate_besov, validate_filling
from hyperfill.services.numerics import THREADS_ENV

DEFAULT_OUTPUT_DIR = Path("reports")
DEFAULT_CORPUS_SIZE = 10
DEFAULT_MAX_CENTERS = 16
DEFAULT_PATH_BUDGET = 2

# checks that never touch the function corpus
CORPUS_FREE_CHECKS = frozenset(
    {
        CheckName.STRUCTURE,
        CheckName.CLOSED_FORMS,
        CheckName.HULL_MASS,
        CheckName.DOUBLING,
        CheckName.LOWER_DECAY,
        CheckName.LEVEL_MASS,
        CheckName.BALL_MASS,
        CheckName.FILLING_DISTANCE,
        CheckName.HULL_APPROXIMATION,
        CheckName.THETA_Q,
    }
)


@dataclass(frozen=True)
class SpaceSource:
    kind: SpaceKind | None = None
    params: dict[str, Any] = field(default_factory=dict)
    path: Path | None = None
    format: SpaceFormat | None = None

    @property
    def generated(self) -> bool:
        return self.kind is not None


@dataclass(frozen=True)
class FillingConfig:
    alpha: float = 2.0
    tau: float = 4.0
    n_min: int | None = None
    n_max: int | None = None


@dataclass(frozen=True)
class BesovConfig:
    p: float = 2.0
    theta: float = 0.5


@dataclass(frozen=True)
class RunConfig:
    space: SpaceSource
    filling: FillingConfig = field(default_factory=FillingConfig)
    besov: BesovConfig = field(default_factory=BesovConfig)
    seed: int | None = None
    checks: tuple[CheckName, ...] = tuple(CheckName)
    output_dir: Path = DEFAULT_OUTPUT_DIR
    corpus_size: int = DEFAULT_CORPUS_SIZE
    max_centers: int = DEFAULT_MAX_CENTERS
    path_budget: int = DEFAULT_PATH_BUDGET
    refine_space: bool = False
    xlsx: bool = False
    threads: int = 1


class ConfigError(RuntimeError):
    pass


def load_run_config(path: Path) -> RunConfig:
    return run_config_from_mapping(read_run_mapping(path), base_dir=path.parent)


def read_run_mapping(path: Path) -> dict[str, Any]:
    if not path.exists():
        raise ConfigError(f"Run config not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"Run config {path} is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("Run config must be a mapping.")
    return data


def run_config_from_mapping(
    data: dict[str, Any], base_dir: Path | None = None, require_seed: bool = True
) -> RunConfig:
    base_dir = base_dir or Path(".")
    space = _parse_space(data.get("space"), base_dir)
    filling = _parse_filling(data.get("filling") or {})
    besov = _parse_besov(data.get("besov") or {})
    checks = _parse_checks(data.get("checks"))
    seed = _optional_int(data.get("seed"), "seed")
    needs_corpus = any(check not in CORPUS_FREE_CHECKS for check in checks)
    if require_seed and seed is None and needs_corpus:
        raise ConfigError("Run config seed is required for corpus-based checks.")
    output_raw = data.get("output_dir", str(DEFAULT_OUTPUT_DIR))
    if not isinstance(output_raw, str) or not output_raw:
        raise ConfigError("Run config output_dir must be a string.")
    return RunConfig(
        space=space,
        filling=filling,
        besov=besov,
        seed=seed,
        checks=checks,
        output_dir=_resolve(output_raw, base_dir),
        corpus_size=_int_at_least(data.get("corpus_size", DEFAULT_CORPUS_SIZE), "corpus_size", 2),
        max_centers=_int_at_least(data.get("max_centers", DEFAULT_MAX_CENTERS), "max_centers", 1),
        path_budget=_int_at_least(data.get("path_budget", DEFAULT_PATH_BUDGET), "path_budget", 1),
        refine_space=_flag(data.get("refine_space", False), "refine_space"),
        xlsx=_flag(data.get("xlsx", False), "xlsx"),
        threads=_int_at_least(data.get("threads", 1), "threads", 1),
    )


def write_run_config(config: RunConfig, path: Path) -> Path:
    space: dict[str, Any]
    if config.space.generated:
        space = {"kind": config.space.kind.value, "params": dict(config.space.params)}
    else:
        space = {"path": str(config.space.path)}
        if config.space.format is not None:
            space["format"] = config.space.format.value
    payload = {
        "space": space,
        "filling": {
            "alpha": config.filling.alpha,
            "tau": config.filling.tau,
            "n_min": config.filling.n_min,
            "n_max": config.filling.n_max,
        },
        "besov": {"p": config.besov.p, "theta": config.besov.theta},
        "seed": config.seed,
        "checks": [check.value for check in config.checks],
        "output_dir": str(config.output_dir),
        "corpus_size": config.corpus_size,
        "max_centers": config.max_centers,
        "path_budget": config.path_budget,
        "refine_space": config.refine_space,
        "xlsx": config.xlsx,
        "threads": config.threads,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(payload, sort_keys=False), encoding="utf-8")
    return path


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        if flag < 1:
            raise ConfigError("--threads must be >= 1.")
        return flag
    raw = os.getenv(THREADS_ENV)
    if raw is None or raw == "":
        return 1
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be an integer (got {raw!r}).") from exc
    if value < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1.")
    return value


def _parse_space(space_data: Any, base_dir: Path) -> SpaceSource:
    if not isinstance(space_data, dict):
        raise ConfigError("Run config space section is required (kind+params or path).")
    kind_raw = space_data.get("kind")
    path_raw = space_data.get("path")
    if (kind_raw is None) == (path_raw is None):
        raise ConfigError("Run config space must set exactly one of space.kind and space.path.")
    if kind_raw is not None:
        normalized = str(kind_raw).replace("-", "_")
        if normalized not in {kind.value for kind in SpaceKind}:
            raise ConfigError(
                f"Run config space.kind must be one of: {', '.join(k.value for k in SpaceKind)}."
            )
        params = space_data.get("params") or {}
        if not isinstance(params, dict):
            raise ConfigError("Run config space.params must be a mapping.")
        return SpaceSource(kind=SpaceKind(normalized), params=dict(params))
    if not isinstance(path_raw, str):
        raise ConfigError("Run config space.path must be a string.")
    format_raw = space_data.get("format")
    space_format = None
    if format_raw is not None:
        if format_raw not in {fmt.value for fmt in SpaceFormat}:
            raise ConfigError("Run config space.format must be csv or json.")
        space_format = SpaceFormat(format_raw)
    return SpaceSource(path=_resolve(path_raw, base_dir), format=space_format)


def _parse_filling(filling_data: Any) -> FillingConfig:
    if not isinstance(filling_data, dict):
        raise ConfigError("Run config filling must be a mapping.")
    config = FillingConfig(
        alpha=_number(filling_data.get("alpha", 2.0), "filling.alpha"),
        tau=_number(filling_data.get("tau", 4.0), "filling.tau"),
        n_min=_optional_int(filling_data.get("n_min"), "filling.n_min"),
        n_max=_optional_int(filling_data.get("n_max"), "filling.n_max"),
    )
    validate_filling(config.alpha, config.tau, config.n_min, config.n_max)
    return config


def _parse_besov(besov_data: Any) -> BesovConfig:
    if not isinstance(besov_data, dict):
        raise ConfigError("Run config besov must be a mapping.")
    config = BesovConfig(
        p=_number(besov_data.get("p", 2.0), "besov.p"),
        theta=_number(besov_data.get("theta", 0.5), "besov.theta"),
    )
    validate_besov(config.p, config.theta)
    return config


def _parse_checks(checks_data: Any) -> tuple[CheckName, ...]:
    if checks_data is None or checks_data == "all":
        return tuple(CheckName)
    if isinstance(checks_data, str):
        checks_data = [part.strip() for part in checks_data.split(",") if part.strip()]
    if not isinstance(checks_data, list) or not checks_data:
        raise ConfigError("Run config checks must be a non-empty list of check names.")
    known = {check.value for check in CheckName}
    unknown = [str(name) for name in checks_data if name not in known]
    if unknown:
        raise ConfigError(f"Run config checks has unknown names: {', '.join(unknown)}.")
    # keep the canonical order so bundles do not depend on how checks were listed
    selected = set(checks_data)
    return tuple(check for check in CheckName if check.value in selected)


def _number(value: Any, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, int | float):
        raise ConfigError(f"Run config {key} must be a number.")
    return float(value)


def _optional_int(value: Any, key: str) -> int | None:
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"Run config {key} must be an integer.")
    return value


def _int_at_least(value: Any, key: str, minimum: int) -> int:
    number = _optional_int(value, key)
    if number is None or number < minimum:
        raise ConfigError(f"Run config {key} must be an integer >= {minimum}.")
    return number


def _flag(value: Any, key: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"Run config {key} must be true or false.")
    return value


def _resolve(raw: str, base_dir: Path) -> Path:
    path = Path(raw)
    if path.is_absolute():
        return path
    return (base_dir / path).resolve()
