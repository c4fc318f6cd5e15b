import numpy as np
import pytest

from elsd.detection import Box, Detection, GtBox
from elsd.errors import DataFormatError
from elsd.io import (
    RunManifest,
    load_frames,
    load_matrix,
    read_dets_csv,
    read_gt_csv,
    read_pgm,
    save_matrix,
    write_dets_csv,
    write_frames,
    write_gt_csv,
    write_pgm,
)
from elsd.linalg import FrameMatrix


class TestPgm:
    def test_round_trip_8bit(self, tmp_path):
        rng = np.random.default_rng(0)
        img = rng.random((6, 9))
        path = tmp_path / "a.pgm"
        write_pgm(path, img, maxval=255)
        back = read_pgm(path)
        assert back.shape == (6, 9)
        assert np.max(np.abs(back - img)) <= 0.5 / 255 + 1e-12

    def test_round_trip_16bit(self, tmp_path):
        rng = np.random.default_rng(1)
        img = rng.random((5, 4))
        path = tmp_path / "b.pgm"
        write_pgm(path, img, maxval=65535)
        back = read_pgm(path)
        assert np.max(np.abs(back - img)) <= 0.5 / 65535 + 1e-12

    def test_constant_255_frames_load_as_ones(self, tmp_path):
        for i in range(2):
            data = b"P5\n4 4\n255\n" + bytes([255] * 16)
            (tmp_path / f"f{i}.pgm").write_bytes(data)
        fm = load_frames(tmp_path)
        assert fm.data.shape == (16, 2)
        assert np.all(fm.data == 1.0)

    def test_ascii_p2(self, tmp_path):
        (tmp_path / "c.pgm").write_text("P2\n# a comment\n3 2\n10\n"
                                        "0 5 10\n10 5 0\n")
        img = read_pgm(tmp_path / "c.pgm")
        assert img.shape == (2, 3)
        assert np.allclose(img[0], [0.0, 0.5, 1.0])

    def test_16bit_is_big_endian(self, tmp_path):
        img = np.array([[1.0]])
        path = tmp_path / "d.pgm"
        write_pgm(path, img, maxval=65535)
        raw = path.read_bytes()
        assert raw.endswith(b"\xff\xff") and b"65535" in raw
        write_pgm(path, np.array([[0.5]]), maxval=65535)
        raw = path.read_bytes()
        sample = raw[len(b"P5\n1 1\n65535\n"):]
        assert int.from_bytes(sample, "big") == round(0.5 * 65535)

    def test_mixed_geometry_names_file(self, tmp_path):
        write_pgm(tmp_path / "f0.pgm", np.zeros((4, 4)))
        write_pgm(tmp_path / "f1.pgm", np.zeros((5, 5)))
        with pytest.raises(DataFormatError, match="f1.pgm"):
            load_frames(tmp_path)

    def test_empty_set(self, tmp_path):
        with pytest.raises(DataFormatError, match="no frames"):
            load_frames(tmp_path)

    def test_truncated(self, tmp_path):
        (tmp_path / "t.pgm").write_bytes(b"P5\n4 4\n255\n\x00\x00")
        with pytest.raises(DataFormatError, match="truncated"):
            read_pgm(tmp_path / "t.pgm")

    def test_lexicographic_order(self, tmp_path):
        for name, v in [("b.pgm", 0.5), ("a.pgm", 0.0), ("c.pgm", 1.0)]:
            write_pgm(tmp_path / name, np.full((2, 2), v), maxval=255)
        fm = load_frames(tmp_path)
        assert np.allclose(fm.data.mean(axis=0), [0.0, 0.5, 1.0], atol=1e-2)


class TestRawMatrix:
    def test_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(2)
        M = rng.normal(size=(7, 5))
        path = tmp_path / "m.mat"
        save_matrix(path, M)
        back = load_matrix(path)
        assert np.array_equal(back, M)
        save_matrix(tmp_path / "m2.mat", back)
        assert (tmp_path / "m.mat").read_bytes() \
            == (tmp_path / "m2.mat").read_bytes()

    def test_bad_magic(self, tmp_path):
        (tmp_path / "x.mat").write_bytes(b"NOTAMATX" + b"\x00" * 16)
        with pytest.raises(DataFormatError, match="magic"):
            load_matrix(tmp_path / "x.mat")

    def test_truncated(self, tmp_path):
        rng = np.random.default_rng(3)
        path = tmp_path / "y.mat"
        save_matrix(path, rng.normal(size=(4, 4)))
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(DataFormatError, match="expected"):
            load_matrix(path)

    def test_geometry_sidecar(self, tmp_path):
        M = np.arange(12.0).reshape(6, 2)
        path = tmp_path / "z.mat"
        save_matrix(path, M, geometry=(2, 3))
        fm = load_frames(path)
        assert (fm.height, fm.width) == (2, 3)
        assert np.array_equal(fm.data, M)

    def test_raw_without_geometry(self, tmp_path):
        path = tmp_path / "w.mat"
        save_matrix(path, np.ones((4, 2)))
        with pytest.raises(DataFormatError, match="geometry"):
            load_frames(path)
        fm = load_frames(path, geometry=(2, 2))
        assert fm.height == 2

    def test_column_major_layout(self, tmp_path):
        M = np.array([[1.0, 3.0], [2.0, 4.0]])
        path = tmp_path / "c.mat"
        save_matrix(path, M)
        raw = path.read_bytes()
        values = np.frombuffer(raw[24:], dtype="<f8")
        assert np.array_equal(values, [1.0, 2.0, 3.0, 4.0])


class TestFramesRoundTrip:
    def test_write_load(self, tmp_path):
        rng = np.random.default_rng(4)
        fm = FrameMatrix(rng.random((24, 3)), 4, 6)
        write_frames(tmp_path / "frames", fm)
        back = load_frames(tmp_path / "frames")
        assert (back.height, back.width, back.n_frames) == (4, 6, 3)
        assert np.max(np.abs(back.data - fm.data)) <= 0.5 / 65535 + 1e-12


class TestCsv:
    def test_gt_round_trip(self, tmp_path):
        gt = [
            [GtBox(0, Box(1, 2, 3, 3)), GtBox(1, Box(7, 8, 2, 2))],
            [],
            [GtBox(0, Box(2, 2, 3, 3))],
        ]
        path = tmp_path / "gt.csv"
        write_gt_csv(path, gt)
        assert read_gt_csv(path, n_frames=3) == gt

    def test_dets_round_trip(self, tmp_path):
        dets = [
            [Detection(Box(1, 2, 3, 3), 1.25), Detection(Box(5, 5, 2, 2), 0.5)],
            [Detection(Box(0, 0, 4, 4), 2.0)],
        ]
        path = tmp_path / "dets.csv"
        write_dets_csv(path, dets)
        assert read_dets_csv(path) == dets

    def test_missing_column(self, tmp_path):
        (tmp_path / "bad.csv").write_text("frame_id,x,y\n0,1,2\n")
        with pytest.raises(DataFormatError, match="missing columns"):
            read_gt_csv(tmp_path / "bad.csv")


class TestManifest:
    def test_round_trip(self, tmp_path):
        m = RunManifest(command=["elsd", "decompose"], version="0.1.0",
                        config={"tau": 1e-7}, results={"rank_B": 3})
        m.write(tmp_path)
        back = RunManifest.read(tmp_path)
        assert back == m

    def test_missing(self, tmp_path):
        with pytest.raises(DataFormatError):
            RunManifest.read(tmp_path)
