import pytest

from biasbench.core import BiasSettings
from biasbench.fileio import DatasetManifest, ManifestEntry
from biasbench.metrics.heatmap import metric_heatmap, render_heatmap_png, write_heatmap_csv


def manifest_with_metric(on_vals, off_vals, fo_vals=(0,), value=None):
    grid = {
        "diff_on": list(on_vals),
        "diff_off": list(off_vals),
        "fo": list(fo_vals),
        "hpf": [0],
        "refr": [0],
    }
    entries = []
    for on in on_vals:
        for off in off_vals:
            for fo in fo_vals:
                b = BiasSettings(on, off, fo, 0, 0)
                v = value(b) if value else 1.0
                entries.append(
                    ManifestEntry(b, f"{on}_{off}_{fo}.bbe", 1000, 0, metrics={"er": v})
                )
    return DatasetManifest(scene_id="s", grid=grid, entries=entries).validate()


class TestMetricHeatmap:
    def test_single_cell_equals_metric(self):
        m = manifest_with_metric([5], [7], value=lambda b: 42.0)
        grid, v0, v1 = metric_heatmap(m, "er", ("diff_off", "diff_on"))
        assert grid.shape == (1, 1)
        assert grid[0, 0] == 42.0
        assert (v0, v1) == ([7], [5])

    def test_cell_count_is_axis_product(self):
        m = manifest_with_metric([0, 10, 20], [0, 40])
        grid, v0, v1 = metric_heatmap(m, "er", ("diff_off", "diff_on"))
        assert grid.shape == (2, 3)
        assert grid.size == len(v0) * len(v1)

    def test_mean_over_remaining_axes(self):
        m = manifest_with_metric([0], [0], fo_vals=(0, 10), value=lambda b: 2.0 if b.fo else 4.0)
        grid, _, _ = metric_heatmap(m, "er", ("diff_off", "diff_on"))
        assert grid[0, 0] == pytest.approx(3.0)

    def test_values_placed_at_right_cells(self):
        m = manifest_with_metric([0, 10], [0, 40], value=lambda b: b.diff_on + 100 * b.diff_off)
        grid, v0, v1 = metric_heatmap(m, "er", ("diff_off", "diff_on"))
        for i, off in enumerate(v0):
            for j, on in enumerate(v1):
                assert grid[i, j] == on + 100 * off

    def test_missing_metric_rejected(self):
        m = manifest_with_metric([0], [0])
        with pytest.raises(ValueError, match="no cached metric"):
            metric_heatmap(m, "tl", ("diff_off", "diff_on"))

    def test_unknown_axis_rejected(self):
        m = manifest_with_metric([0], [0])
        with pytest.raises(ValueError, match="axis"):
            metric_heatmap(m, "er", ("diff_off", "gain"))


def test_csv_and_png_outputs(tmp_path):
    m = manifest_with_metric([0, 10], [0, 40], value=lambda b: float(b.diff_on))
    grid, v0, v1 = metric_heatmap(m, "er", ("diff_off", "diff_on"))
    write_heatmap_csv(tmp_path / "h.csv", grid, v0, v1, ("diff_off", "diff_on"))
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert len(lines) == 3  # header + 2 rows
    assert lines[0].endswith("0,10")
    render_heatmap_png(tmp_path / "h.png", grid, v0, v1, ("diff_off", "diff_on"))
    assert (tmp_path / "h.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
