import json

import pytest

from shortcutlab.harness import default_config, run_experiment
from shortcutlab.plotting import FORMAT_COLORS, PlotFormat, PlotSpec, make_plot
from shortcutlab.rewards import ConfigError


@pytest.fixture(scope="module")
def logs(tmp_path_factory):
    root = tmp_path_factory.mktemp("logs")
    paths = []
    for i, beta in enumerate((0.1, 0.3)):
        cfg = default_config("HierarchyFlat", seed=1)
        cfg.steps = 30
        cfg.optimizer.beta = beta
        cfg.out_dir = str(root / f"arm{i}")
        run_experiment(cfg)
        paths.append(str(root / f"arm{i}" / "log.jsonl"))
    return paths


def test_hierarchy_plot_has_three_coloured_curves(logs, tmp_path):
    out = make_plot(PlotSpec(runs=logs[:1], out=str(tmp_path / "h.svg")))
    text = out.read_text()
    assert text.count("<polyline") == 3
    for name in ("F1Nested", "F2Nested", "F3Nested"):
        assert name in text and FORMAT_COLORS[name] in text


def test_leash_plot_has_three_panels(logs, tmp_path):
    text = make_plot(PlotSpec(runs=logs, out=str(tmp_path / "l.svg"))).read_text()
    for metric in ("kl_to_reference", "mean_total_reward", "mean_completion_length"):
        assert f">{metric}</text>" in text
    assert text.count("<polyline") == 6


def test_plots_are_deterministic(logs, tmp_path):
    a = make_plot(PlotSpec(runs=logs, out=str(tmp_path / "a.svg"))).read_bytes()
    b = make_plot(PlotSpec(runs=logs, out=str(tmp_path / "b.svg"))).read_bytes()
    assert a == b


def test_csv_rows_equal_steps(logs, tmp_path):
    out = make_plot(PlotSpec(runs=logs[:1], metrics=["mean_total_reward", "mean_reward_per_format.F1Nested"], out=str(tmp_path / "x.csv"), format=PlotFormat.CSV))
    rows = out.read_text().splitlines()
    assert len(rows) == 31
    assert rows[0].split(",")[0] == "step"


def test_csv_is_smoothed(logs, tmp_path):
    out = make_plot(PlotSpec(runs=logs[:1], metrics=["mean_total_reward"], smoothing=1, out=str(tmp_path / "raw.csv"), format=PlotFormat.CSV))
    values = [float(r.split(",")[1]) for r in out.read_text().splitlines()[1:]]
    raw = [json.loads(line)["mean_total_reward"] for line in open(logs[0]).read().splitlines()[1:]]
    assert values == pytest.approx(raw, rel=1e-5)


def test_missing_metric(logs, tmp_path):
    with pytest.raises(ConfigError):
        make_plot(PlotSpec(runs=logs, metrics=["nope"], out=str(tmp_path / "n.svg")))
    with pytest.raises(ConfigError):
        make_plot(PlotSpec(runs=logs, metrics=["mean_reward_per_format.Strict"], out=str(tmp_path / "n.svg")))
