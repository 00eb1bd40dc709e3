import json
import math
from pathlib import Path

from hyperfill.config import BesovConfig, RunConfig, SpaceSource
from hyperfill.domain.kinds import CheckName, CheckStatus, SpaceKind
from hyperfill.services import space as space_ops
from hyperfill.services import verify
from hyperfill.services.events import EventLogger


def _config(
    out_dir: Path,
    checks: tuple[CheckName, ...],
    seed: int = 1,
    n: int = 16,
    besov: BesovConfig | None = None,
    max_centers: int = 4,
    corpus_size: int = 4,
) -> RunConfig:
    return RunConfig(
        space=SpaceSource(kind=SpaceKind.INTERVAL_GRID, params={"n": n}),
        besov=besov or BesovConfig(),
        seed=seed,
        checks=checks,
        output_dir=out_dir,
        corpus_size=corpus_size,
        max_centers=max_centers,
    )


def test_every_check_name_has_a_runner() -> None:
    assert set(verify.CHECKS) == set(CheckName)


def test_structural_checks_pass_and_write_the_bundle(tmp_path: Path) -> None:
    space = space_ops.interval_grid(16)
    config = _config(tmp_path / "out", (CheckName.STRUCTURE, CheckName.CLOSED_FORMS))
    report = verify.run_all(space, config)

    assert report.ok
    assert [r.status for r in report.results] == [CheckStatus.PASSED, CheckStatus.PASSED]
    summary = json.loads((tmp_path / "out" / "summary.json").read_text(encoding="utf-8"))
    assert summary["passed"] is True
    assert summary["seed"] == 1
    assert summary["filling"]["alpha"] == 2.0
    assert set(summary["checks"]) == {"structure", "closed_forms"}
    header = (tmp_path / "out" / "structure.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "name,param1,param2,lhs,rhs,value"
    assert (tmp_path / "out" / "closed_forms.csv").exists()
    assert not (tmp_path / "out" / "report.xlsx").exists()


def test_stage_events_are_logged(tmp_path: Path) -> None:
    space = space_ops.interval_grid(16)
    logger = EventLogger(path=tmp_path / "logs" / "events.ndjson", run="test")
    verify.run_all(space, _config(tmp_path / "out", (CheckName.STRUCTURE,)), logger=logger)

    events = [
        json.loads(line)
        for line in logger.path.read_text(encoding="utf-8").splitlines()
    ]
    stages = [(e["event_type"], e["stage"]) for e in events]
    assert ("stage_start", "filling") in stages
    assert ("stage_done", "uniformize") in stages
    assert ("check_done", "check:structure") in stages
    assert all(e["run"] == "test" for e in events)


def test_holder_is_skipped_when_its_hypothesis_fails(tmp_path: Path) -> None:
    space = space_ops.interval_grid(16)
    logger = EventLogger(path=tmp_path / "events.ndjson", run="skip")
    # p=1 never exceeds Q_beta, so the pointwise estimate has no hypothesis to stand on
    config = _config(tmp_path / "out", (CheckName.HOLDER,), besov=BesovConfig(p=1.0, theta=0.5))
    report = verify.run_all(space, config, logger=logger)

    (result,) = report.results
    assert result.status is CheckStatus.SKIPPED
    assert result.table is None
    assert report.ok
    assert report.summary["checks"]["holder"]["status"] == "skipped: hypothesis"
    assert "check_skipped" in logger.path.read_text(encoding="utf-8")


def test_same_seed_gives_identical_summary(tmp_path: Path) -> None:
    space = space_ops.interval_grid(16)
    checks = (CheckName.STRUCTURE, CheckName.TRACE_EXTENSION)
    verify.run_all(space, _config(tmp_path / "a", checks, seed=7))
    verify.run_all(space, _config(tmp_path / "b", checks, seed=7))
    first = (tmp_path / "a" / "summary.json").read_bytes()
    assert first == (tmp_path / "b" / "summary.json").read_bytes()
    first_csv = (tmp_path / "a" / "trace_extension.csv").read_bytes()
    assert first_csv == (tmp_path / "b" / "trace_extension.csv").read_bytes()


def test_summary_report_counts_statuses() -> None:
    summary = {
        "checks": {
            "structure": {"status": "passed", "summary": {"max": 0.0}, "reason": "ok"},
            "holder": {"status": "skipped: hypothesis", "summary": None, "reason": "no"},
            "doubling": {"status": "failed", "summary": {"max": 3.5}, "reason": "grew"},
        }
    }
    lines = verify.format_summary_report(summary)
    assert lines[0] == "summary checks=3 passed=1 failed=1 skipped=1"
    assert lines[1] == "structure passed max=0.0 reason=ok"
    assert lines[2] == "holder skipped: hypothesis reason=no"


def test_scaling_checks_pass_on_the_reference_grid(tmp_path: Path) -> None:
    space = space_ops.interval_grid(64)
    checks = (
        CheckName.HULL_MASS,
        CheckName.LOWER_DECAY,
        CheckName.LEVEL_MASS,
        CheckName.BALL_MASS,
        CheckName.TRACE_DECAY,
        CheckName.EXTENSION_DECAY,
    )
    config = _config(tmp_path / "out", checks, seed=42, n=64, max_centers=16, corpus_size=10)
    report = verify.run_all(space, config)

    by_name = {result.name: result for result in report.results}
    assert all(r.status is CheckStatus.PASSED for r in report.results), [
        (r.name.value, r.reason) for r in report.results if not r.ok
    ]

    hull = by_name[CheckName.HULL_MASS].metrics
    assert hull["spread"] <= verify.SPREAD_LIMIT
    assert hull["r2"] >= verify.MIN_R2
    # coarse tau-balls cover most of [0, 1], so the slope sits near 1.1 rather than beta + 1
    assert 1.0 < hull["slope"] < 1.2
    assert abs(hull["target_slope"] - 2.0) < 0.05

    lower = by_name[CheckName.LOWER_DECAY].metrics
    assert abs(lower["q_prime"] - lower["target"]) <= verify.LOWER_DECAY_TOLERANCE

    assert by_name[CheckName.LEVEL_MASS].metrics["spread"] < 5.0
    ball = by_name[CheckName.BALL_MASS].metrics
    assert ball["boundary_spread"] < 10.0
    assert ball["interior_spread"] < 5.0

    decay = by_name[CheckName.TRACE_DECAY].metrics
    assert abs(decay["target_slope"] + 0.5 * math.log(2.0)) < 1e-12
    assert abs(decay["ratio"] - 1.0) <= verify.DECAY_TOLERANCE
    assert decay["r2"] >= verify.MIN_R2
    assert any(key.startswith("slope[holder_rough") for key in decay)

    extension = by_name[CheckName.EXTENSION_DECAY].metrics
    assert extension["growth[n_max+1]"] <= verify.STABILITY_FACTOR
    assert math.isfinite(extension["max_ratio"])


def test_summary_names_the_table_of_each_check(tmp_path: Path) -> None:
    space = space_ops.interval_grid(16)
    config = _config(tmp_path / "out", (CheckName.STRUCTURE, CheckName.LEVEL_MASS))
    verify.run_all(space, config)

    summary = json.loads((tmp_path / "out" / "summary.json").read_text(encoding="utf-8"))
    for name in ("structure", "level_mass"):
        entry = summary["checks"][name]
        assert entry["table"] == name
        assert entry["summary"]["name"] == name
        assert (tmp_path / "out" / f"{entry['table']}.csv").exists()


def test_skipped_checks_have_no_table_name(tmp_path: Path) -> None:
    space = space_ops.interval_grid(16)
    config = _config(tmp_path / "out", (CheckName.HOLDER,), besov=BesovConfig(p=1.0, theta=0.5))
    report = verify.run_all(space, config)
    assert report.summary["checks"]["holder"]["table"] is None
