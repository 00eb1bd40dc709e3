from pathlib import Path

import pytest

from hyperfill.config import (
    CORPUS_FREE_CHECKS,
    ConfigError,
    load_run_config,
    resolve_threads,
    run_config_from_mapping,
    write_run_config,
)
from hyperfill.domain.kinds import CheckName, SpaceFormat, SpaceKind
from hyperfill.domain.rules import ValidationError


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def test_missing_run_config(tmp_path: Path) -> None:
    with pytest.raises(ConfigError, match="Run config not found"):
        load_run_config(tmp_path / "nope.yaml")


def test_run_config_must_be_a_mapping(tmp_path: Path) -> None:
    path = _write(tmp_path / "run.yaml", "- a\n- b\n")
    with pytest.raises(ConfigError, match="must be a mapping"):
        load_run_config(path)
    bad = _write(tmp_path / "bad.yaml", "space: [unclosed\n")
    with pytest.raises(ConfigError, match="not valid YAML"):
        load_run_config(bad)


def test_relative_paths_resolve_against_the_config_file(tmp_path: Path) -> None:
    path = _write(
        tmp_path / "configs" / "run.yaml",
        "space:\n  path: ../data/points.csv\n  format: csv\nseed: 3\noutput_dir: ../out\n",
    )
    config = load_run_config(path)
    assert config.space.path == (tmp_path / "data" / "points.csv").resolve()
    assert config.space.format is SpaceFormat.CSV
    assert config.output_dir == (tmp_path / "out").resolve()


def test_generated_space_and_defaults() -> None:
    config = run_config_from_mapping(
        {"space": {"kind": "interval-grid", "params": {"n": 32}}, "seed": 0}
    )
    assert config.space.kind is SpaceKind.INTERVAL_GRID
    assert config.space.params == {"n": 32}
    assert config.filling.alpha == 2.0
    assert config.filling.tau == 4.0
    assert config.besov.p == 2.0
    assert config.checks == tuple(CheckName)
    assert config.threads == 1


def test_space_needs_exactly_one_source() -> None:
    with pytest.raises(ConfigError, match="exactly one"):
        run_config_from_mapping({"space": {"kind": "cantor", "path": "x.csv"}, "seed": 1})
    with pytest.raises(ConfigError, match="space section is required"):
        run_config_from_mapping({"seed": 1})
    with pytest.raises(ConfigError, match="space.kind must be one of"):
        run_config_from_mapping({"space": {"kind": "torus"}, "seed": 1})


def test_seed_is_required_only_for_corpus_checks() -> None:
    space = {"kind": "cantor", "params": {"level": 3}}
    with pytest.raises(ConfigError, match="seed is required"):
        run_config_from_mapping({"space": space})
    config = run_config_from_mapping({"space": space, "checks": "structure,doubling"})
    assert config.seed is None
    assert set(config.checks) <= CORPUS_FREE_CHECKS
    relaxed = run_config_from_mapping({"space": space}, require_seed=False)
    assert relaxed.seed is None


def test_checks_parse_into_canonical_order() -> None:
    space = {"kind": "cantor"}
    config = run_config_from_mapping({"space": space, "seed": 1, "checks": ["holder", "structure"]})
    assert config.checks == (CheckName.STRUCTURE, CheckName.HOLDER)
    with pytest.raises(ConfigError, match="unknown names: bogus"):
        run_config_from_mapping({"space": space, "seed": 1, "checks": "structure,bogus"})
    with pytest.raises(ConfigError, match="non-empty list"):
        run_config_from_mapping({"space": space, "seed": 1, "checks": []})


def test_filling_and_besov_parameters_are_validated() -> None:
    space = {"kind": "cantor"}
    with pytest.raises(ValidationError, match="tau must satisfy"):
        run_config_from_mapping({"space": space, "seed": 1, "filling": {"tau": 3.0}})
    with pytest.raises(ConfigError, match="filling.alpha must be a number"):
        run_config_from_mapping({"space": space, "seed": 1, "filling": {"alpha": "two"}})
    with pytest.raises(ValidationError, match="theta"):
        run_config_from_mapping({"space": space, "seed": 1, "besov": {"theta": 1.0}})
    with pytest.raises(ConfigError, match="corpus_size must be an integer >= 2"):
        run_config_from_mapping({"space": space, "seed": 1, "corpus_size": 1})


def test_written_config_loads_back(tmp_path: Path) -> None:
    original = run_config_from_mapping(
        {
            "space": {"kind": "snowflake", "params": {"n": 16, "eps": 0.5}},
            "filling": {"alpha": 3.0, "tau": 5.0, "n_min": -1, "n_max": 5},
            "besov": {"p": 3.0, "theta": 0.25},
            "seed": 9,
            "checks": ["doubling", "trace_decay"],
            "corpus_size": 5,
            "xlsx": True,
        },
        base_dir=tmp_path,
    )
    path = write_run_config(original, tmp_path / "copy" / "run.yaml")
    loaded = load_run_config(path)
    assert loaded == original


def test_resolve_threads(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv("HYPERFILL_THREADS", raising=False)
    assert resolve_threads(None) == 1
    assert resolve_threads(4) == 4
    monkeypatch.setenv("HYPERFILL_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(2) == 2
    monkeypatch.setenv("HYPERFILL_THREADS", "many")
    with pytest.raises(ConfigError, match="must be an integer"):
        resolve_threads(None)
    with pytest.raises(ConfigError, match=">= 1"):
        resolve_threads(0)
