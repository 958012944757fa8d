import gzip
import io
import json
import struct

import numpy as np
from numpy.testing import assert_array_equal
import pytest

from legendre.cli import main
from legendre.datasets import list_labelled, load_labelled, mnist_to_tensors, parse_idx, read_idx
from legendre.engine import fisher_matrix
from legendre.errors import ParseError
from legendre.tensor import read_tensor_csv, write_tensor_csv
from legendre.validation import run_validate


def idx_bytes(arr):
    arr = np.asarray(arr, dtype=np.uint8)
    return bytes([0, 0, 0x08, arr.ndim]) + b"".join(struct.pack(">I", n) for n in arr.shape) + arr.tobytes()


@pytest.fixture
def tensor_file(tmp_path):
    x = np.random.default_rng(0).random((5, 5, 4))
    path = tmp_path / "t.csv"
    write_tensor_csv(path, x)
    return path


class TestDecompose:
    def test_writes_outputs(self, tensor_file, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["decompose", "-c", "3", "-n", "-d", "4", "-b", "1", "-i", str(tensor_file), "--out", str(out)]) == 0
        header, row = capsys.readouterr().out.strip().splitlines()
        assert header.split("\t") == ["N_par", "N_iter", "running_time", "RMSE"]
        rep = json.loads((out / "report.json").read_text())
        assert rep["N_par"] == int(row.split("\t")[0]) == 12
        assert rep["converged"] and rep["method"] == "natural"
        assert read_tensor_csv(out / "reconstructed.csv").shape == (5, 5, 4)
        assert (out / "basis.csv").read_text().startswith("# basis mode=random core_size=3")

    def test_implied_subcommand(self, tensor_file, capsys):
        assert main(["-c", "2", "-n", "-i", str(tensor_file), "--no-time"]) == 0
        assert capsys.readouterr().out.startswith("N_par\tN_iter\tRMSE")

    def test_byte_stable_without_time(self, tensor_file, tmp_path, capsys):
        texts = []
        for name in ("a", "b"):
            main(["-c", "3", "-n", "-b", "2", "-i", str(tensor_file), "--no-time", "--out", str(tmp_path / name)])
            texts.append(capsys.readouterr().out)
        assert texts[0] == texts[1]
        for f in ("report.json", "reconstructed.csv", "basis.csv"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_missing_file(self, tmp_path):
        assert main(["-c", "3", "-n", "-i", str(tmp_path / "nope.csv")]) == 2

    def test_bad_depth(self, tensor_file):
        assert main(["-c", "3", "-n", "-d", "7", "-i", str(tensor_file)]) == 1

    def test_usage_error(self, tensor_file):
        with pytest.raises(SystemExit) as exc:
            main(["decompose", "-i", str(tensor_file)])
        assert exc.value.code == 1

    def test_malformed_file(self, tmp_path):
        (tmp_path / "bad.csv").write_text("2 2\n1,2,3\n")
        assert main(["-c", "1", "-n", "-i", str(tmp_path / "bad.csv")]) == 2

    def test_no_command(self):
        assert main([]) == 1


class TestValidate:
    def test_passes(self, capsys):
        assert main(["validate"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 6 and all(ln.startswith("PASS") for ln in lines)

    def test_faulty_fisher_is_caught(self):
        buf = io.StringIO()
        flipped = lambda eta, basis, joins=None: -fisher_matrix(eta, basis, joins)  # noqa: E731
        assert not run_validate(fisher=flipped, out=buf)
        lines = buf.getvalue().splitlines()
        assert any(ln.startswith("FAIL hessian:") for ln in lines)
        assert any(ln.startswith("PASS gradient:") for ln in lines)


class TestDatasets:
    def test_parse_idx(self, tmp_path):
        arr = np.arange(24, dtype=np.uint8).reshape(2, 3, 4)
        assert_array_equal(parse_idx(idx_bytes(arr)), arr)
        (tmp_path / "a.gz").write_bytes(gzip.compress(idx_bytes(arr)))
        assert_array_equal(read_idx(tmp_path / "a.gz"), arr)

    def test_bad_idx(self):
        with pytest.raises(ParseError):
            parse_idx(b"\x01\x02\x08\x01")
        with pytest.raises(ParseError):
            parse_idx(idx_bytes(np.zeros(4))[:-1])

    @pytest.mark.parametrize("layout,count,names", [
        ("stack", 3, 10),
        ("single", 2, 20),
        ("batch", 4, 20),
    ])
    def test_layouts(self, tmp_path, layout, count, names):
        rng = np.random.default_rng(1)
        labels = np.tile(np.arange(10), 5)
        images = rng.integers(0, 256, size=(50, 4, 4))
        paths = mnist_to_tensors(images, labels, tmp_path, layout, count, batch_size=2)
        assert len(paths) == names
        if layout == "stack":
            t = read_tensor_csv(tmp_path / "test3.csv")
            assert t.shape == (4, 4, 3)
            assert_array_equal(t[..., 1], images[13])
        else:
            got, tensors = load_labelled(tmp_path)
            assert got == sorted(got)
            if layout == "batch":
                assert tensors[0].shape == (4, 4, 2)
                assert_array_equal(tensors[0][..., 1], images[10])

    def test_list_labelled_orders_numerically(self, tmp_path):
        for name in ("test1_10.csv", "test1_2.csv", "test0_5.csv", "other.csv"):
            write_tensor_csv(tmp_path / name, np.ones((2, 2)))
        assert [p.name for _, p in list_labelled(tmp_path)] == ["test0_5.csv", "test1_2.csv", "test1_10.csv"]

    def test_mnist_command(self, tmp_path, capsys):
        labels = np.tile(np.arange(10), 2).astype(np.uint8)
        images = np.random.default_rng(2).integers(0, 256, size=(20, 3, 3)).astype(np.uint8)
        (tmp_path / "img").write_bytes(idx_bytes(images))
        (tmp_path / "lab.gz").write_bytes(gzip.compress(idx_bytes(labels)))
        code = main(["mnist-to-tensors", "--images", str(tmp_path / "img"), "--labels", str(tmp_path / "lab.gz"),
                     "--out", str(tmp_path / "out"), "--layout", "single", "--count", "2"])
        assert code == 0
        assert len(list((tmp_path / "out").glob("test*_*.csv"))) == 20


class TestCluster:
    def test_perfect_split(self, tmp_path, capsys):
        rng = np.random.default_rng(3)
        for d in range(3):
            for n in range(3):
                x = np.full((4, 4), 0.01)
                x[d] = 1.0 + 0.01 * rng.random(4)
                write_tensor_csv(tmp_path / f"test{d}_{n}.csv", x)
        out = tmp_path / "res"
        code = main(["cluster", str(tmp_path), "-c", "2", "-n", "-k", "3", "--kind", "unfolded-p",
                     "--kind", "last-dkl", "--out", str(out)])
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "kind\tAMI\tARI"
        assert lines[1] == "unfolded-p\t1.00000\t1.00000"
        assert (out / "metrics.csv").exists()
        table = (out / "contingency_unfolded-p.csv").read_text().splitlines()
        assert table[0] == "unfolded-p,D0,D1,D2" and len(table) == 4

    def test_empty_directory(self, tmp_path):
        assert main(["cluster", str(tmp_path), "-c", "2"]) == 2
