"""
End-to-end runs of the ``spinlab`` command line.
"""
import json

import pytest

from spinlab.cli.app import main

HARDCORE = '{"model": "hardcore", "lambda": 1.0}'
BIPARTITE_HARDCORE = '{"model": "bipartite_hardcore", "lambda": 1.0}'


def _stdout_json(capsys):
    return json.loads(capsys.readouterr().out)


def _manifests(directory):
    return sorted(p.name for p in directory.glob("*.manifest.json"))


def test_help_and_usage_errors(tmp_path, capsys):
    """Help exits 0; parser errors and unknown suites exit 2."""
    out = ["--output-dir", str(tmp_path)]
    assert main(["--help"]) == 0
    assert main([]) == 2
    assert main(["gap", "--graph", "path:3", "--model", HARDCORE, "--bogus"]) == 2
    assert main(["acceptance", ""] + out) == 2
    assert main(["acceptance", "everything"] + out) == 2
    assert main(["gap", "--graph", "moebius:4", "--model", HARDCORE] + out) == 2
    assert main(["gap", "--graph", "path:3", "--model", "not json"] + out) == 2


def test_gap_on_a_single_vertex(tmp_path, capsys):
    """One vertex: Glauber resamples from stationarity in one step."""
    code = main(["gap", "--graph", "path:1", "--model", HARDCORE, "--output-dir", str(tmp_path)])
    assert code == 0
    result = _stdout_json(capsys)
    assert result["states"] == 2
    assert result["t_rel"] == pytest.approx(1.0)
    assert (tmp_path / "gap-glauber.json").exists()
    assert len(_manifests(tmp_path)) == 1


def test_gap_of_a_frozen_chain_is_infinite(tmp_path, capsys):
    """Proper 2-colorings of an edge: Glauber cannot move."""
    model = '{"model": "list_coloring", "q": 2}'
    assert main(["gap", "--graph", "path:2", "--model", model, "--output-dir", str(tmp_path)]) == 0
    assert _stdout_json(capsys)["t_rel"] == "inf"


def test_infeasible_model_exits_3(tmp_path):
    model = '{"model": "list_coloring", "lists": [[0], [0]], "q": 2}'
    assert main(["gap", "--graph", "path:2", "--model", model, "--output-dir", str(tmp_path)]) == 3


def test_down_up_gap_with_constructed_partition(tmp_path, capsys):
    args = [
        "gap", "--graph", "cycle:6", "--model", HARDCORE, "--chain", "downup",
        "--k", "2", "--ell", "1", "--output-dir", str(tmp_path),
    ]
    assert main(args) == 0
    result = _stdout_json(capsys)
    assert result["chain"] == "downup"
    assert result["gap"] > 0


def test_sample_is_reproducible(tmp_path, capsys):
    """Same seed, same samples and the same manifest name, whatever the job count."""
    outputs = []
    for name, jobs in (("a", "1"), ("b", "1"), ("c", "2")):
        directory = tmp_path / name
        args = [
            "sample", "--graph", "path:3", "--model", HARDCORE, "--replicas", "200",
            "--steps", "5", "--seed", "11", "--jobs", jobs, "--output-dir", str(directory),
        ]
        assert main(args) == 0
        capsys.readouterr()
        outputs.append(((directory / "samples-glauber.csv").read_text(), _manifests(directory)))
    assert outputs[0] == outputs[1]
    assert outputs[0][0] == outputs[2][0]


def test_mix_exact(tmp_path, capsys):
    args = ["mix", "--graph", "path:3", "--model", HARDCORE, "--eps", "0.25", "--output-dir", str(tmp_path)]
    assert main(args) == 0
    result = _stdout_json(capsys)
    assert result["mode"] == "exact"
    assert result["t_mix"] >= 1


def test_partition(tmp_path, capsys):
    args = ["partition", "--graph", "cycle:12", "--k", "2", "--seed", "3", "--output-dir", str(tmp_path)]
    assert main(args) == 0
    result = _stdout_json(capsys)
    assert result["k"] == 2
    assert sum(result["sizes"]) == 12
    assert (tmp_path / "partition.json").exists()


def test_ci_target(tmp_path, capsys):
    """Coupling cost is at least 1 per unit weight, so a target of 0.5 is missed."""
    base = [
        "ci", "--graph", "path:3", "--model", HARDCORE, "--pairs", "2", "--samples", "200",
        "--pinnings", "empty", "--output-dir", str(tmp_path),
    ]
    assert main(base + ["--target", "100"]) == 0
    result = _stdout_json(capsys)
    assert result["label"] == "empirical lower bound"
    assert result["meets_target"] is True
    assert main(base + ["--target", "0.5"]) == 1


def test_censor_check(tmp_path, capsys):
    args = ["censor-check", "--graph", "kbip:2:2", "--model", BIPARTITE_HARDCORE, "--output-dir", str(tmp_path)]
    assert main(args) == 0
    result = _stdout_json(capsys)
    assert result["monotone"] is True
    assert result["holds"] is True
    assert [s["length"] for s in result["sweep"]] == [4, 8]
    assert (tmp_path / "censor-check.csv").exists()


def test_acceptance_oracle_suite(tmp_path, capsys):
    assert main(["acceptance", "oracle", "--quick", "--output-dir", str(tmp_path)]) == 0
    assert "suite oracle: PASS" in capsys.readouterr().out
    assert (tmp_path / "acceptance-oracle.json").exists()
    assert len(_manifests(tmp_path)) == 1


def test_acceptance_fault_injection(tmp_path, capsys):
    """A forced failure must turn the exit code to 1."""
    args = ["acceptance", "oracle", "--quick", "--inject-fault", "1", "--output-dir", str(tmp_path)]
    assert main(args) == 1
    captured = capsys.readouterr()
    assert "suite oracle: FAIL" in captured.out
    assert "criterion 1 failed" in captured.err


def test_config_directory_option(config_dir, tmp_path, capsys):
    text = (config_dir / "default.yaml").read_text()
    (config_dir / "default.yaml").write_text(text.replace("state_cap:", "state_cap: 4 #"))
    args = ["gap", "--graph", "path:3", "--model", HARDCORE, "--config", str(config_dir)]
    assert main(args + ["--output-dir", str(tmp_path)]) == 2


@pytest.mark.slow
@pytest.mark.parametrize("suite", ["saw", "coupling", "chains", "partition", "censoring"])
def test_acceptance_quick_suites(suite, tmp_path, capsys):
    assert main(["acceptance", suite, "--quick", "--seed", "1", "--output-dir", str(tmp_path)]) == 0


@pytest.mark.slow
def test_acceptance_all_full(tmp_path, capsys):
    assert main(["acceptance", "all", "--seed", "1", "--output-dir", str(tmp_path)]) == 0
