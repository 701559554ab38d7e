import numpy as np
import pytest

from fshbmap.errors import FormatError, InvalidInputError
from fshbmap.images import make_phantom, pgm_bytes, read_pgm, write_pgm


class TestPhantom:
    def test_range_and_shape(self):
        img = make_phantom(32, 24, seed=3)
        assert img.shape == (24, 32)
        assert img.min() >= 0 and img.max() <= 1

    def test_seeded(self):
        np.testing.assert_array_equal(make_phantom(16, 16, seed=1), make_phantom(16, 16, seed=1))
        assert not np.array_equal(make_phantom(16, 16, seed=1), make_phantom(16, 16, seed=2))

    def test_not_constant(self):
        assert make_phantom(16, 16).std() > 0.05

    def test_rejects_empty(self):
        with pytest.raises(InvalidInputError):
            make_phantom(0, 4)


class TestPgm:
    @pytest.mark.parametrize("maxval", [255, 65535])
    def test_round_trip(self, tmp_path, maxval):
        img = np.random.default_rng(0).integers(0, maxval + 1, size=(5, 7)) / maxval
        path = tmp_path / "a.pgm"
        write_pgm(path, img, maxval=maxval)
        np.testing.assert_array_equal(read_pgm(path), img)

    def test_write_clips(self, tmp_path):
        path = tmp_path / "c.pgm"
        write_pgm(path, np.array([[-0.5, 0.5, 1.5]]))
        np.testing.assert_allclose(read_pgm(path), [[0.0, 128 / 255, 1.0]])

    def test_ascii_with_comments(self, tmp_path):
        path = tmp_path / "p2.pgm"
        path.write_text("P2\n# a comment\n3 2\n# another\n4\n0 1 2\n3 4 0\n")
        np.testing.assert_allclose(read_pgm(path), np.array([[0, 1, 2], [3, 4, 0]]) / 4)

    def test_bytes_header(self):
        data = pgm_bytes(np.zeros((2, 3)))
        assert data.startswith(b"P5\n3 2\n255\n") and len(data) == len(b"P5\n3 2\n255\n") + 6

    def test_no_leftover_temp_file(self, tmp_path):
        write_pgm(tmp_path / "x.pgm", np.zeros((2, 2)))
        assert [p.name for p in tmp_path.iterdir()] == ["x.pgm"]

    @pytest.mark.parametrize("content", [
        b"P6\n2 2\n255\n" + bytes(12),
        b"P5\n2 2\n",
        b"P5\n2 2\n255\n\x00\x01",
        b"P2\n2 1\n10\n3 x\n",
        b"P2\n2 1\n10\n3 11\n",
        b"",
    ])
    def test_malformed(self, tmp_path, content):
        path = tmp_path / "bad.pgm"
        path.write_bytes(content)
        with pytest.raises(FormatError):
            read_pgm(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_pgm(tmp_path / "missing.pgm")
