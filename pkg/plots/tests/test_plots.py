import os

import matplotlib.pyplot as plt
import pytest

from pavl.cli import main as pavl_main

from pavl_plots.cli import main, render_all, render_one
from pavl_plots.figures import FIGURE_IDS, build
from pavl_plots.io import MissingInputError, load_aggregate, load_config_hash

CONFIG = """
n_values = 300, 600, 1200
dense_count = 5
coarse_count = 9
runs_per_point = 6
master_seed = 11
"""


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    """A small but complete pipeline output directory."""
    root = tmp_path_factory.mktemp("pipeline")
    cfg = root / "desk.cfg"
    cfg.write_text(CONFIG)
    out = root / "results"
    assert pavl_main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    assert pavl_main(["fit", "--aggregate", str(out / "aggregate.csv"),
                      "--runs", str(out / "runs.csv"), "--out", str(out)]) == 0
    assert pavl_main(["pareto", "--aggregate", str(out / "aggregate.csv"),
                      "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def rendered(pipeline_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("figures")
    done, skipped = render_all(str(pipeline_dir), str(out))
    return out, done, skipped


def test_all_sixteen_figures_render(rendered):
    out, done, skipped = rendered
    assert skipped == []
    assert len(done) == 16
    for figure_id in FIGURE_IDS:
        path = out / (figure_id + ".svg")
        assert path.is_file() and path.stat().st_size > 0


def test_rotations_figure_has_log_p_axis_and_per_n_curves(pipeline_dir):
    fig = build("rotations_vs_p", str(pipeline_dir))
    try:
        ax = fig.axes[0]
        assert ax.get_xscale() == "log"
        labels = [t.get_text() for t in ax.get_legend().get_texts()]
        for n in (300, 600, 1200):
            assert "n=%d" % n in labels
    finally:
        plt.close(fig)


@pytest.mark.parametrize("figure_id", ["avg_depth_vs_p", "efficiency_curve",
                                       "sigma_vs_p_and_collapse",
                                       "height_exceedance"])
def test_log_p_axes_where_sweeps_are_log_spaced(pipeline_dir, figure_id):
    fig = build(figure_id, str(pipeline_dir))
    try:
        assert fig.axes[0].get_xscale() == "log"
    finally:
        plt.close(fig)


def test_sigma_tails_has_log_vertical_axis(pipeline_dir):
    fig = build("sigma_tails", str(pipeline_dir))
    try:
        assert fig.axes[0].get_yscale() == "log"
    finally:
        plt.close(fig)


def test_footer_embeds_config_hash(pipeline_dir):
    digest = load_config_hash(str(pipeline_dir))
    assert digest
    fig = build("pareto_frontier", str(pipeline_dir))
    try:
        texts = [t.get_text() for t in fig.texts]
        assert any(digest in t for t in texts)
    finally:
        plt.close(fig)


def test_rerun_produces_identical_axes(pipeline_dir):
    figs = [build("rotations_vs_p", str(pipeline_dir)) for _ in range(2)]
    try:
        a, b = (f.axes[0] for f in figs)
        assert a.get_xlim() == b.get_xlim()
        assert a.get_ylim() == b.get_ylim()
        assert figs[0].get_size_inches().tolist() == \
            figs[1].get_size_inches().tolist()
    finally:
        for f in figs:
            plt.close(f)


def test_inputs_are_not_mutated(pipeline_dir, tmp_path):
    before = {name: (pipeline_dir / name).read_bytes()
              for name in os.listdir(pipeline_dir)}
    render_all(str(pipeline_dir), str(tmp_path))
    after = {name: (pipeline_dir / name).read_bytes()
             for name in os.listdir(pipeline_dir)}
    assert before == after


def test_render_one_png(pipeline_dir, tmp_path):
    target = tmp_path / "fig.png"
    render_one("collapse_attempts", str(pipeline_dir), str(target))
    assert target.stat().st_size > 0


def test_unknown_figure_id(pipeline_dir, tmp_path, capsys):
    code = main(["render", "--in", str(pipeline_dir),
                 "--out", str(tmp_path), "--only", "nonexistent_figure"])
    assert code == 2
    assert "unknown figure id" in capsys.readouterr().err


def test_missing_input_dir(tmp_path):
    assert main(["render", "--in", str(tmp_path / "nope"),
                 "--out", str(tmp_path / "o")]) == 2


def test_empty_input_dir_skips_everything(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    code = main(["render", "--in", str(empty), "--out", str(tmp_path / "o")])
    assert code == 1
    err = capsys.readouterr().err
    assert err.count("skipped") == 16


def test_cli_only_flag(pipeline_dir, tmp_path):
    code = main(["render", "--in", str(pipeline_dir),
                 "--out", str(tmp_path), "--only", "sigma_ecdfs"])
    assert code == 0
    assert (tmp_path / "sigma_ecdfs.svg").stat().st_size > 0


def test_loaders_raise_on_missing_files(tmp_path):
    with pytest.raises(MissingInputError):
        load_aggregate(str(tmp_path))


def test_aggregate_loader_types(pipeline_dir):
    rows = load_aggregate(str(pipeline_dir))
    assert rows
    assert isinstance(rows[0]["n"], int)
    assert isinstance(rows[0]["p"], float)
