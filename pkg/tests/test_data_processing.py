# tests/test_data_processing.py

import io
import json

import numpy as np
import pandas as pd
import pytest
from matplotlib import colormaps

from charting import GRAY, LABEL_PALETTE, colorize_channel, colorize_labels, colormap, overlay_mask
from data_processing import (
    SCHEMA_VERSION,
    read_basin_csv,
    read_json,
    read_pgm_labels,
    read_table_csv,
    to_json_text,
    write_basin_csv,
    write_basin_pgm,
    write_json,
    write_ppm,
    write_table_csv,
)
from error_handler import DomainError, UsageError
from fractal_geometry import BasinGrid, GridSpec


def _grid(channel=False):
    spec = GridSpec(-1.0, 1.0, 0.0, 3.0, 4, 3)
    labels = np.array([[0, 1, 1, 2], [1, 1, 3, 0], [4, 0, 1, 1]], dtype=np.uint8)
    values = None
    if channel:
        values = np.where(labels == 1, np.arange(12, dtype=float).reshape(3, 4), np.nan)
    return BasinGrid(spec, labels, channel=values)


# =========================================================================
# PGM / PPM
# =========================================================================

def test_pgm_keeps_labels_and_puts_y_max_on_top(tmp_path):
    grid = _grid()
    path = write_basin_pgm(grid, tmp_path / "out" / "basin.pgm")
    assert path.read_bytes().startswith(b"P5")
    np.testing.assert_array_equal(read_pgm_labels(path), grid.labels)


def test_ppm_rejects_bad_shape(tmp_path):
    with pytest.raises(UsageError):
        write_ppm(np.zeros((3, 4)), tmp_path / "bad.ppm")


def test_ppm_header(tmp_path):
    path = write_ppm(colorize_labels(_grid()), tmp_path / "basin.ppm")
    data = path.read_bytes()
    assert data.startswith(b"P6")
    assert data.endswith(bytes(GRAY) + bytes(LABEL_PALETTE[1]) * 2 + bytes(LABEL_PALETTE[2]))

# =========================================================================
# CSV
# =========================================================================

def test_basin_csv_round_trip_with_channel(tmp_path):
    grid = _grid(channel=True)
    path = write_basin_csv(grid, tmp_path / "basin.csv", seed=42)
    text = path.read_text(encoding="utf-8")
    assert text.startswith(f"# schema: basin_grid v{SCHEMA_VERSION}\n")
    assert "# rng_seed: 42" in text

    back = read_basin_csv(path)
    assert back.spec == grid.spec
    np.testing.assert_array_equal(back.labels, grid.labels)
    np.testing.assert_array_equal(np.isnan(back.channel), np.isnan(grid.channel))
    np.testing.assert_allclose(back.channel[grid.labels == 1], grid.channel[grid.labels == 1])


def test_basin_csv_without_channel(tmp_path):
    back = read_basin_csv(write_basin_csv(_grid(), tmp_path / "basin.csv"))
    assert back.channel is None


def test_basin_csv_row_count_checked(tmp_path):
    path = write_basin_csv(_grid(), tmp_path / "basin.csv")
    lines = path.read_text(encoding="utf-8").splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n", encoding="utf-8")
    with pytest.raises(UsageError):
        read_basin_csv(path)


def test_table_csv_schema_mismatch(tmp_path):
    df = pd.DataFrame({"bin": [0, 1], "count": [3, 4]})
    path = write_table_csv(df, tmp_path / "hist.csv", "histogram", seed=7)
    assert list(read_table_csv(path, "histogram", ["bin", "count"])["count"]) == [3, 4]
    with pytest.raises(UsageError):
        read_table_csv(path, "basin_points", ["x", "y"])
    with pytest.raises(UsageError):
        read_table_csv(path, "histogram", ["bin", "density"])


def test_table_csv_to_stream():
    buf = io.StringIO()
    write_table_csv(pd.DataFrame({"x": [0.5]}), buf, "basin_points")
    assert buf.getvalue().splitlines() == [f"# schema: basin_points v{SCHEMA_VERSION}", "x", "0.5"]


def test_table_csv_without_schema_line(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("x,y\n0,0\n", encoding="utf-8")
    with pytest.raises(UsageError):
        read_table_csv(path, "basin_points", ["x", "y"])

# =========================================================================
# JSON
# =========================================================================

def test_json_text_has_schema_version_and_string_infinities():
    data = json.loads(to_json_text({"eta_star": float("inf"), "values": np.array([1.0, np.nan]),
                                    "count": np.int64(3)}))
    assert data["schema_version"] == SCHEMA_VERSION
    assert data["eta_star"] == "inf"
    assert data["values"] == [1.0, "nan"]
    assert data["count"] == 3


def test_write_json_to_stdout(capsys):
    assert write_json({"ok": True}) is None
    assert json.loads(capsys.readouterr().out) == {"schema_version": SCHEMA_VERSION, "ok": True}


def test_read_json_requires_schema_version(tmp_path):
    path = write_json({"a": 1}, tmp_path / "r.json")
    assert read_json(path)["a"] == 1
    bare = tmp_path / "bare.json"
    bare.write_text("{}", encoding="utf-8")
    with pytest.raises(UsageError):
        read_json(bare)

# =========================================================================
# 着色
# =========================================================================

def test_colorize_labels_uses_palette():
    rgb = colorize_labels(_grid())
    assert rgb.shape == (3, 4, 3)
    assert tuple(rgb[0, 0]) == GRAY
    assert tuple(rgb[0, 3]) == LABEL_PALETTE[2]


def test_colorize_labels_unknown_label():
    grid = BasinGrid(GridSpec(0, 1, 0, 1, 1, 1), np.array([[9]], dtype=np.uint8))
    with pytest.raises(DomainError):
        colorize_labels(grid)


def test_colorize_channel_grays_out_unconverged():
    grid = _grid(channel=True)
    rgb = colorize_channel(grid)
    assert tuple(rgb[0, 0]) == GRAY
    assert tuple(rgb[2, 0]) == GRAY
    converged = grid.labels == 1
    assert np.all(np.any(rgb[converged] != GRAY, axis=-1))


def test_colorize_channel_requires_channel():
    with pytest.raises(DomainError):
        colorize_channel(_grid())


def test_colormap_uses_matplotlib_viridis():
    rgb = colormap(np.array([0.0, 0.5, 1.0, 2.0]))
    expected = colormaps["viridis"](np.array([0.0, 0.5, 1.0, 1.0]), bytes=True)[:, :3]
    assert rgb.dtype == np.uint8
    np.testing.assert_array_equal(rgb, expected)
    assert tuple(rgb[0]) == (68, 1, 84)


def test_colormap_by_name():
    gray = colormap(np.array([0.0, 1.0]), "gray")
    assert tuple(gray[0]) == (0, 0, 0)
    assert tuple(gray[1]) == (255, 255, 255)
    with pytest.raises(UsageError):
        colormap(np.array([0.5]), "no-such-map")


def test_overlay_mask_copies():
    rgb = colorize_labels(_grid())
    mask = np.zeros((3, 4), dtype=bool)
    mask[1, 2] = True
    out = overlay_mask(rgb, mask, (255, 255, 255))
    assert tuple(out[1, 2]) == (255, 255, 255)
    assert tuple(rgb[1, 2]) == LABEL_PALETTE[3]
