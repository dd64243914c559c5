import csv
import io
import json
import math

import numpy as np
import pytest

from capnet import bounds
from capnet.cli import main
from capnet.network import (Dataset, load_network, profile, save_dataset,
                            save_network)
from conftest import make_net


@pytest.fixture
def inputs(tmp_path, rng):
    net = make_net([np.eye(2), np.eye(2)])
    data = Dataset(points=np.array([[1.0, 0.0], [0.0, 1.0], [0.6, -0.8]]))
    net_path = tmp_path / "net.json"
    data_path = tmp_path / "data.json"
    save_network(net, str(net_path))
    save_dataset(data, str(data_path))
    return str(net_path), str(data_path), net, data


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestReport:
    def test_identity_net_values(self, inputs, capsys, tmp_path):
        net_path, data_path, net, data = inputs
        out = tmp_path / "report.csv"
        code, _, _ = run(["report", "--network", net_path, "--data", data_path,
                          "--format", "csv", "--out", str(out)], capsys)
        assert code == 0
        rows = list(csv.reader(io.StringIO(out.read_text())))
        assert rows[0] == ["name", "value", "exact_constants", "citation"]
        byname = {r[0]: r for r in rows[1:]}
        prof = profile(net, 2.0)
        want = bounds.bound_frobenius_exp_depth(prof, data.radius, data.m)
        assert float(byname["frobenius-exp-depth"][1]) == pytest.approx(want)
        want2 = bounds.bound_frobenius_sqrt_depth(prof, data)
        assert float(byname["frobenius-sqrt-depth"][1]) == pytest.approx(want2)

    def test_missing_file_exit_2_names_path(self, capsys, tmp_path):
        bogus = str(tmp_path / "nope.json")
        code, _, err = run(["report", "--network", bogus, "--data", bogus], capsys)
        assert code == 2
        assert "nope.json" in err

    def test_csv_roundtrips_at_17_digits(self, inputs, capsys, tmp_path):
        net_path, data_path, _, _ = inputs
        out = tmp_path / "r.csv"
        run(["report", "--network", net_path, "--data", data_path,
             "--format", "csv", "--out", str(out)], capsys)
        for row in list(csv.reader(io.StringIO(out.read_text())))[1:]:
            if row[1] != "inapplicable":
                assert format(float(row[1]), ".17g") == row[1]

    def test_usage_error_exit_1(self, capsys):
        code = main(["report"])  # missing required --network
        capsys.readouterr()
        assert code == 1

    def test_bad_json_exit_2(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{]")
        data = tmp_path / "d.json"
        data.write_text(json.dumps({"points": [[1.0]]}))
        code, _, err = run(["report", "--network", str(bad), "--data", str(data)],
                           capsys)
        assert code == 2 and "bad.json" in err

    def test_dimension_mismatch_exit_2(self, inputs, capsys, tmp_path):
        net_path, _, _, _ = inputs  # network expects dimension 2
        data3 = tmp_path / "d3.json"
        data3.write_text(json.dumps({"points": [[1.0, 0.0, 0.0]]}))
        code, _, err = run(["report", "--network", net_path, "--data", str(data3)],
                           capsys)
        assert code == 2 and "does not match" in err

    def test_zero_layer_network_exit_2(self, inputs, capsys, tmp_path):
        _, data_path, _, _ = inputs
        zero_net = make_net([np.zeros((2, 2)), np.eye(2)])
        zp = tmp_path / "zero.json"
        save_network(zero_net, str(zp))
        code, _, err = run(["report", "--network", str(zp), "--data", data_path],
                           capsys)
        assert code == 2 and "zero layer" in err


class TestCompress:
    def test_writes_network_and_certificate(self, inputs, capsys, tmp_path):
        net_path, data_path, _, _ = inputs
        out = tmp_path / "compressed.json"
        code, stdout, _ = run(["compress", "--network", net_path, "--data", data_path,
                               "--r", "2", "--out", str(out)], capsys)
        assert code == 0
        assert "theorem_bound=" in stdout
        loaded = load_network(str(out))
        assert loaded.depth == 2
        cert = json.loads((tmp_path / "compressed.json.cert.json").read_text())
        assert set(cert) >= {"r_requested", "r_prime", "p", "lemma_bound",
                             "theorem_bound", "degenerate_zero"}

    def test_needs_b_or_data(self, inputs, capsys):
        net_path, _, _, _ = inputs
        code, _, err = run(["compress", "--network", net_path, "--r", "1"], capsys)
        assert code == 2 and "--B" in err

    def test_user_supplied_b(self, inputs, capsys):
        net_path, _, _, _ = inputs
        code, stdout, _ = run(["compress", "--network", net_path, "--r", "2",
                               "--B", "2.0"], capsys)
        assert code == 0 and "(user)" in stdout


class TestRademacherCmd:
    def test_structured_output(self, inputs, capsys, tmp_path, rng):
        _, data_path, _, _ = inputs
        scalar_net = make_net([rng.standard_normal((2, 2)), rng.standard_normal((1, 2))])
        net_path = tmp_path / "scalar.json"
        save_network(scalar_net, str(net_path))
        code, stdout, _ = run(["rademacher", "--network", str(net_path),
                               "--data", data_path, "--samples", "4",
                               "--restarts", "1", "--steps", "10",
                               "--format", "structured"], capsys)
        assert code == 0
        obj = json.loads(stdout)
        assert obj["method"] == "monte-carlo"
        assert obj["value"] >= 0.0

    def test_vector_valued_net_rejected(self, inputs, capsys):
        net_path, data_path, _, _ = inputs  # identity net has 2 outputs
        code, _, err = run(["rademacher", "--network", net_path,
                            "--data", data_path, "--samples", "2"], capsys)
        assert code == 2 and "scalar" in err


class TestLowerboundCmd:
    def test_csv_table(self, capsys, tmp_path):
        out = tmp_path / "lb.csv"
        code, _, _ = run(["lowerbound", "--h-grid", "2", "--m-grid", "8",
                          "--p-grid", "1,2,inf", "--out", str(out)], capsys)
        assert code == 0
        rows = list(csv.reader(io.StringIO(out.read_text())))
        assert rows[0] == ["h", "m", "p", "diag_value", "scalar_value",
                           "bound_lower", "ratio"]
        assert len(rows) == 4
        for row in rows[1:]:
            assert 0.2 <= float(row[6]) <= 2.0


class TestSweep:
    def test_depth_columns(self, capsys, tmp_path):
        out = tmp_path / "sweep.csv"
        code, _, _ = run(["sweep", "--depths", "2,3,4,8,32,64", "--m", "16",
                          "--out", str(out)], capsys)
        assert code == 0
        rows = list(csv.reader(io.StringIO(out.read_text())))
        header, body = rows[0], rows[1:]
        assert header[0] == "depth"
        ney = [float(r[1]) for r in body]
        assert ney[1] / ney[0] == 2.0  # depth 3 vs 2, exactly
        sqd = [float(r[2]) for r in body]
        want = (math.sqrt(2 * math.log(2) * 3) + 1) / (math.sqrt(2 * math.log(2) * 2) + 1)
        assert sqd[1] / sqd[0] == pytest.approx(want, rel=1e-12)
        free = [float(r[3]) for r in body]
        assert free[-1] == free[-2]  # plateau once the first branch is active

    def test_random_family_runs(self, capsys, tmp_path):
        out = tmp_path / "sweep2.csv"
        code, _, _ = run(["sweep", "--depths", "2,4", "--family", "random",
                          "--m", "8", "--out", str(out)], capsys)
        assert code == 0

    def test_depth_one_columns_near_coincide(self, capsys, tmp_path):
        out = tmp_path / "sweep1.csv"
        code, _, _ = run(["sweep", "--depths", "1", "--m", "16",
                          "--out", str(out)], capsys)
        assert code == 0
        row = list(csv.reader(io.StringIO(out.read_text())))[1]
        vals = [float(row[1]), float(row[2]), float(row[3])]
        assert max(vals) <= 8.0 * min(vals)


class TestVerifyCmd:
    def test_cover_suite_passes(self, capsys):
        code, stdout, _ = run(["verify", "--suite", "cover"], capsys)
        assert code == 0
        assert stdout.count("PASS") == 2 and "FAIL" not in stdout

    def test_union_suite_passes(self, capsys):
        code, stdout, _ = run(["verify", "--suite", "union"], capsys)
        assert code == 0 and "PASS" in stdout


class TestWorkerCap:
    def test_env_parsing(self, monkeypatch):
        from capnet.cli import worker_cap
        monkeypatch.delenv("CAPNET_THREADS", raising=False)
        assert worker_cap() == 1
        monkeypatch.setenv("CAPNET_THREADS", "6")
        assert worker_cap() == 6
        monkeypatch.setenv("CAPNET_THREADS", "0")
        assert worker_cap() == 1
        monkeypatch.setenv("CAPNET_THREADS", "soup")
        assert worker_cap() == 1


class TestDeterminism:
    @pytest.mark.parametrize("threads", ["1", "7"])
    def test_outputs_bit_identical_across_thread_caps(self, inputs, capsys,
                                                      tmp_path, threads, monkeypatch):
        net_path, data_path, _, _ = inputs
        monkeypatch.setenv("CAPNET_THREADS", threads)
        texts = []
        for tag in ("a", "b"):
            out = tmp_path / f"rep_{threads}_{tag}.csv"
            run(["report", "--network", net_path, "--data", data_path,
                 "--format", "csv", "--out", str(out), "--seed", "42"], capsys)
            texts.append(out.read_bytes())
        assert texts[0] == texts[1]

    def test_reports_identical_across_env(self, inputs, capsys, tmp_path, monkeypatch):
        net_path, data_path, _, _ = inputs
        blobs = []
        for threads in ("1", "3"):
            monkeypatch.setenv("CAPNET_THREADS", threads)
            out = tmp_path / f"sweep_{threads}.csv"
            run(["sweep", "--depths", "2,4", "--m", "8", "--samples", "2",
                 "--steps", "20", "--restarts", "1", "--out", str(out)], capsys)
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]
