import json

import numpy as np
import pytest
from click.testing import CliRunner

from madmix.cli import cli


@pytest.fixture
def runner():
    return CliRunner()


class TestScore:
    def test_two_domain_fixture(self, runner, two_domain_manifest):
        result = runner.invoke(
            cli, ["score", "--manifest", str(two_domain_manifest), "--lambda", "1"]
        )
        assert result.exit_code == 0
        doc = json.loads(result.output)
        assert doc["weights"]["A"] == pytest.approx(0.6971, abs=1e-4)
        assert doc["weights"]["B"] == pytest.approx(0.3029, abs=1e-4)
        assert doc["delta"] == [2, 1]

    def test_missing_manifest_exits_2(self, runner, tmp_path):
        missing = tmp_path / "nope.json"
        result = runner.invoke(cli, ["score", "--manifest", str(missing)])
        assert result.exit_code == 2
        assert str(missing) in result.stderr

    def test_zero_lambda_exits_1(self, runner, two_domain_manifest):
        result = runner.invoke(
            cli, ["score", "--manifest", str(two_domain_manifest), "--lambda", "0"]
        )
        assert result.exit_code == 1
        assert "lambda must be positive" in result.stderr

    def test_human_format_percentages(self, runner, two_domain_manifest):
        result = runner.invoke(
            cli,
            ["score", "--manifest", str(two_domain_manifest), "--lambda", "1",
             "--format", "human"],
        )
        assert result.exit_code == 0
        assert "A  0.697059  (69.71%)" in result.output

    def test_json_round_trip_byte_identical(self, runner, two_domain_manifest, tmp_path):
        out = tmp_path / "weights.json"
        result = runner.invoke(
            cli,
            ["score", "--manifest", str(two_domain_manifest), "--output", str(out)],
        )
        assert result.exit_code == 0
        text = out.read_text()
        assert json.dumps(json.loads(text), indent=2) + "\n" == text

    def test_timing_flag(self, runner, two_domain_manifest):
        result = runner.invoke(
            cli, ["score", "--manifest", str(two_domain_manifest), "--timing"]
        )
        assert result.exit_code == 0
        assert "timing: score computation took" in result.stderr


class TestSweep:
    def test_three_lambdas_match_score_runs(self, runner, five_domain_manifest):
        result = runner.invoke(
            cli,
            ["sweep", "--manifest", str(five_domain_manifest), "--lambdas", "1,10,100"],
        )
        assert result.exit_code == 0
        lines = result.output.strip().splitlines()
        assert len(lines) == 4  # header + 3 rows
        for lam, line in zip([1.0, 10.0, 100.0], lines[1:]):
            score = runner.invoke(
                cli,
                ["score", "--manifest", str(five_domain_manifest), "--lambda", str(lam)],
            )
            weights = json.loads(score.output)["weights"]
            cells = [float(tok) for tok in line.split(",")]
            assert cells[0] == lam
            np.testing.assert_allclose(cells[1:], list(weights.values()), rtol=1e-12)

    def test_singleton(self, runner, two_domain_manifest):
        result = runner.invoke(
            cli, ["sweep", "--manifest", str(two_domain_manifest), "--lambdas", "1"]
        )
        assert result.exit_code == 0
        assert len(result.output.strip().splitlines()) == 2

    def test_empty_list_exits_1(self, runner, two_domain_manifest):
        result = runner.invoke(
            cli, ["sweep", "--manifest", str(two_domain_manifest), "--lambdas", ""]
        )
        assert result.exit_code == 1


class TestSpectrum:
    def parse_sections(self, text):
        eigen, scores, current = [], [], None
        for line in text.splitlines():
            if line.startswith("index,"):
                current = eigen
                continue
            if line.startswith("domain,"):
                current = scores
                continue
            if line.strip() and current is not None:
                current.append(line.split(","))
        return eigen, scores

    def test_identity_like_filters(self, runner, tmp_path):
        from conftest import write_manifest

        # orthonormal centroids in one modality: K_MM = I
        path = write_manifest(
            tmp_path,
            ["m"],
            [("a", [("x", 1, {"m": [[1.0, 0.0]]})]), ("b", [("x", 1, {"m": [[0.0, 1.0]]})])],
        )
        result = runner.invoke(
            cli, ["spectrum", "--manifest", str(path), "--lambda", "1"]
        )
        assert result.exit_code == 0
        eigen, _ = self.parse_sections(result.output)
        assert all(float(row[2]) == pytest.approx(0.5, abs=1e-12) for row in eigen)

    def test_spectral_scores_match_score_totals(self, runner, five_domain_manifest):
        spec = runner.invoke(
            cli, ["spectrum", "--manifest", str(five_domain_manifest), "--lambda", "10"]
        )
        score = runner.invoke(
            cli, ["score", "--manifest", str(five_domain_manifest), "--lambda", "10"]
        )
        _, rows = self.parse_sections(spec.output)
        totals = json.loads(score.output)["scores_total"]
        np.testing.assert_allclose(
            [float(r[1]) for r in rows], totals, rtol=1e-8
        )

    def test_rank_deficient_zero_filters(self, runner, tmp_path):
        from conftest import write_manifest

        # two identical domains: rank-1 kernel, one zero eigenvalue
        path = write_manifest(
            tmp_path,
            ["m"],
            [("a", [("x", 1, {"m": [[1.0, 0.0]]})]), ("b", [("x", 1, {"m": [[1.0, 0.0]]})])],
        )
        result = runner.invoke(cli, ["spectrum", "--manifest", str(path)])
        eigen, _ = self.parse_sections(result.output)
        smallest = eigen[-1]
        assert float(smallest[1]) == pytest.approx(0.0, abs=1e-12)
        assert float(smallest[2]) == pytest.approx(0.0, abs=1e-12)

    def test_kernel_export(self, runner, two_domain_manifest, tmp_path):
        out = tmp_path / "kernels"
        result = runner.invoke(
            cli,
            ["spectrum", "--manifest", str(two_domain_manifest),
             "--export-kernels", str(out)],
        )
        assert result.exit_code == 0
        assert (out / "kernel_m1.csv").exists()
        doc = json.loads((out / "kernel_multimodal.json").read_text())
        np.testing.assert_allclose(
            np.array(doc["values"]).reshape(doc["k"], doc["k"]), np.diag([2.0, 1.0])
        )

    def test_kernel_export_from_compare(self, runner, two_domain_manifest, tmp_path):
        out = tmp_path / "kernels"
        result = runner.invoke(
            cli,
            ["compare", "--manifest", str(two_domain_manifest),
             "--methods", "uniform,madmix", "--export-kernels", str(out)],
        )
        assert result.exit_code == 0
        assert (out / "kernel_m1.csv").exists()
        assert (out / "kernel_multimodal.json").exists()


class TestPlan:
    def test_uniform_equal_sizes(self, runner, two_domain_manifest):
        result = runner.invoke(
            cli,
            ["plan", "--manifest", str(two_domain_manifest), "--method", "uniform"],
        )
        assert result.exit_code == 0
        rows = [json.loads(line) for line in result.output.strip().splitlines()[1:]]
        assert all(r["p"] == pytest.approx(0.5, abs=1e-15) for r in rows)

    def test_draws_deterministic(self, runner, five_domain_manifest, tmp_path):
        outputs = []
        for run in range(2):
            draw_path = tmp_path / f"draws_{run}.csv"
            result = runner.invoke(
                cli,
                ["plan", "--manifest", str(five_domain_manifest), "--seed", "7",
                 "--draw", "10000", "--draw-output", str(draw_path)],
            )
            assert result.exit_code == 0
            outputs.append(draw_path.read_bytes())
        assert outputs[0] == outputs[1]

    def test_expected_counts_sum(self, runner, five_domain_manifest):
        result = runner.invoke(
            cli,
            ["plan", "--manifest", str(five_domain_manifest), "--steps", "4500",
             "--format", "csv"],
        )
        assert result.exit_code == 0
        lines = result.output.strip().splitlines()
        total = sum(float(line.split(",")[3]) for line in lines[1:])
        assert total == pytest.approx(4500.0, abs=1e-9)

    def test_jsonl_header_has_checksum(self, runner, two_domain_manifest):
        result = runner.invoke(
            cli, ["plan", "--manifest", str(two_domain_manifest), "--seed", "3"]
        )
        header = json.loads(result.output.splitlines()[0])
        assert header["seed"] == 3
        assert len(header["checksum"]) == 64


class TestCompare:
    def test_uniform_column(self, runner, five_domain_manifest):
        result = runner.invoke(
            cli,
            ["compare", "--manifest", str(five_domain_manifest),
             "--methods", "uniform,madmix"],
        )
        assert result.exit_code == 0
        lines = result.output.strip().splitlines()
        assert lines[0] == "domain,uniform,madmix"
        for line in lines[1:]:
            assert float(line.split(",")[1]) == pytest.approx(0.2, abs=1e-15)

    def test_avg_is_mean_of_singles(self, runner, five_domain_manifest):
        result = runner.invoke(
            cli,
            ["compare", "--manifest", str(five_domain_manifest),
             "--methods", "single:text,single:image,avg", "--format", "json"],
        )
        assert result.exit_code == 0
        doc = json.loads(result.output)
        for dom, avg in doc["avg"].items():
            mean = (doc["single:text"][dom] + doc["single:image"][dom]) / 2.0
            assert avg == pytest.approx(mean, abs=1e-12)

    def test_image_column_excludes_language(self, runner, five_domain_manifest):
        result = runner.invoke(
            cli,
            ["compare", "--manifest", str(five_domain_manifest),
             "--methods", "single:image", "--format", "json"],
        )
        doc = json.loads(result.output)
        assert doc["single:image"]["Language"] == 0.0
        assert sum(doc["single:image"].values()) == pytest.approx(1.0, abs=1e-12)

    def test_unknown_method_exits_1(self, runner, five_domain_manifest):
        result = runner.invoke(
            cli,
            ["compare", "--manifest", str(five_domain_manifest), "--methods", "magic"],
        )
        assert result.exit_code == 1
        assert "uniform" in result.stderr  # lists valid methods

    def test_orthogonal_method_runs(self, runner, five_domain_manifest):
        result = runner.invoke(
            cli,
            ["compare", "--manifest", str(five_domain_manifest),
             "--methods", "orthogonal", "--format", "json"],
        )
        assert result.exit_code == 0
        weights = list(json.loads(result.output)["orthogonal"].values())
        assert sum(weights) == pytest.approx(1.0, abs=1e-12)


class TestEntryPoint:
    def test_installed_script(self, two_domain_manifest):
        import subprocess

        proc = subprocess.run(
            ["madmix", "score", "--manifest", str(two_domain_manifest), "--lambda", "1"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        doc = json.loads(proc.stdout)
        assert doc["weights"]["A"] == pytest.approx(0.6971, abs=1e-4)
