import json

import numpy as np
import pytest

from mcdart.fileio import (FileFormatError, read_pgm, read_raw, read_sinogram, read_spectra_csv,
                           write_pgm, write_raw, write_sinogram, write_spectra_csv)
from mcdart.projector import GridSpec, ParallelGeometry
from mcdart.segmentation import MaterialSpectra


def test_pgm_round_trip(tmp_path, rng):
    labels = rng.integers(0, 11, 6 * 4)
    write_pgm(tmp_path / "a.pgm", labels, 6, 4)
    out, w, h = read_pgm(tmp_path / "a.pgm")
    assert (w, h) == (6, 4) and np.array_equal(out, labels)
    with pytest.raises(ValueError):
        write_pgm(tmp_path / "b.pgm", labels, 5, 4)


def test_pgm_with_comment_and_errors(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# made by hand\n2 1\n255\n\x01\x02")
    assert read_pgm(p)[0].tolist() == [1, 2]
    p.write_bytes(b"P2\n2 1\n255\n1 2")
    with pytest.raises(FileFormatError) as e:
        read_pgm(p)
    assert e.value.offset == 0
    p.write_bytes(b"P5\n2 x\n255\n\x01\x02")
    assert pytest.raises(FileFormatError, read_pgm, p).value.offset == 5
    p.write_bytes(b"P5\n2 2\n255\n\x01\x02")
    assert pytest.raises(FileFormatError, read_pgm, p).value.offset == 13


def test_spectra_round_trip(tmp_path, rng):
    sp = MaterialSpectra.from_materials(rng.random((4, 3)))
    write_spectra_csv(tmp_path / "s.csv", sp)
    assert read_spectra_csv(tmp_path / "s.csv") == sp


def test_spectra_background_rows_optional(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("label,channel,mu\n1,0,0.5\n1,1,0.25\n2,0,1.0\n2,1,0.75\n")
    assert read_spectra_csv(p).table.tolist() == [[0, 0], [0.5, 0.25], [1.0, 0.75]]


@pytest.mark.parametrize("body, offset", [
    ("label,channel,mu\n1,0,0.5\n1,0\n", 25),
    ("label,channel,mu\n1,0,0.5\n1,0,0.7\n", 25),
    ("label,channel,mu\n1,0,x\n", 17),
    ("lbl,channel,mu\n1,0,0.5\n", 0),
    ("label,channel,mu\n1,0,0.5\n0,0,0.2\n", 25),
    ("label,channel,mu\n1,0,-0.5\n", 17),
])
def test_malformed_spectra_report_offsets(tmp_path, body, offset):
    p = tmp_path / "s.csv"
    p.write_text(body)
    with pytest.raises(FileFormatError) as e:
        read_spectra_csv(p)
    assert e.value.offset == offset


def test_missing_spectra_entry(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("label,channel,mu\n1,0,0.5\n2,1,0.5\n")
    with pytest.raises(FileFormatError, match="missing entry"):
        read_spectra_csv(p)


def test_sinogram_round_trip(tmp_path, rng):
    grid, geo = GridSpec(8, 8), ParallelGeometry.equidistant(5, 9)
    sino = rng.random(geo.l)
    write_sinogram(tmp_path / "s.raw", sino, grid, geo, 2)
    out, meta = read_sinogram(tmp_path / "s.raw")
    assert np.array_equal(out, sino)
    assert meta["channel"] == 2 and meta["width"] == 9 and meta["height"] == 5
    assert meta["geometry"]["angles"] == list(geo.angles)


def test_raw_size_and_sidecar_errors(tmp_path):
    write_raw(tmp_path / "r.raw", np.arange(6.0), 3, 2)
    (tmp_path / "r.raw").write_bytes((tmp_path / "r.raw").read_bytes()[:20])
    assert pytest.raises(FileFormatError, read_raw, tmp_path / "r.raw").value.offset == 16
    (tmp_path / "r.json").write_text('{"width": 3, "height": ')
    assert pytest.raises(FileFormatError, read_raw, tmp_path / "r.raw").value.offset == 23
    (tmp_path / "r.json").write_text(json.dumps({"width": 3}))
    with pytest.raises(FileFormatError, match="height"):
        read_raw(tmp_path / "r.raw")
    with pytest.raises(FileNotFoundError):
        read_raw(tmp_path / "missing.raw")
