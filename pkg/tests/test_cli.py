import json

import pytest

import facshare as fs
from facshare.cli import main


def run_cli(capsys, *args):
    try:
        code = main(list(args))
    except SystemExit as exc:  # argparse errors
        code = exc.code
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def parse(out):
    return json.loads(out)


@pytest.fixture
def running_file(tmp_path, running_instance):
    path = tmp_path / "running.json"
    fs.save_instance(running_instance, path)
    return str(path)


class TestGen:
    def test_writes_valid_instance(self, capsys, tmp_path):
        out_path = tmp_path / "inst.json"
        code, out, _ = run_cli(capsys, "gen", "-n", "4", "-m", "2",
                               "--seed", "42", "-o", str(out_path))
        assert code == 0
        inst = fs.load_instance(out_path)
        assert inst.n == 4 and inst.m == 2
        doc = parse(out)
        assert doc["command"] == "gen"
        assert doc["outputs"]["path"] == str(out_path)

    def test_byte_identical_for_same_flags(self, capsys, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run_cli(capsys, "gen", "-n", "4", "-m", "2", "--seed", "42", "-o", str(a))
        run_cli(capsys, "gen", "-n", "4", "-m", "2", "--seed", "42", "-o", str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_rejects_zero_agents(self, capsys):
        code, _, err = run_cli(capsys, "gen", "-n", "0", "-m", "2", "--seed", "1")
        assert code == 2
        assert "n must be" in err

    def test_stdout_document_when_no_output_path(self, capsys):
        code, out, _ = run_cli(capsys, "gen", "-n", "2", "-m", "2", "--seed", "5")
        assert code == 0
        doc = parse(out)["outputs"]["instance"]
        assert len(doc["agents"]) == 2


class TestSolve:
    def test_both_mode_running_instance(self, capsys, running_file,
                                        running_instance):
        code, out, _ = run_cli(capsys, "solve", running_file, "--mode", "both")
        assert code == 0
        doc = parse(out)
        outs = doc["outputs"]
        assert outs["pne"]["assignment"] == [1, 1]
        assert outs["ratio"] == pytest.approx(1.0)
        assert outs["harmonic_bound"] == pytest.approx(1.5)
        assert outs["bound_holds"] is True
        # every numeric field re-validates against library recomputation
        prof, env = running_instance.profile, running_instance.environment
        pne = fs.Assignment(tuple(outs["pne"]["assignment"]))
        assert outs["pne"]["social_cost"] == pytest.approx(
            fs.social_cost(prof, pne, env).social_cost, abs=1e-9)
        assert outs["pne"]["potential"] == pytest.approx(
            fs.potential(prof, pne, env), abs=1e-9)
        opt = fs.Assignment(tuple(outs["opt"]["assignment"]))
        assert outs["opt"]["social_cost"] == pytest.approx(
            fs.social_cost(prof, opt, env).social_cost, abs=1e-9)
        assert outs["ratio"] == pytest.approx(
            outs["pne"]["social_cost"] / outs["opt"]["social_cost"], abs=1e-9)

    def test_verify_flag(self, capsys, running_file):
        code, out, _ = run_cli(capsys, "solve", running_file, "--mode", "both",
                               "--verify")
        assert code == 0
        verified = parse(out)["outputs"]["verified"]
        assert verified["pne_check"] is True
        assert verified["no_cross"] is True
        assert verified["potential_matches_bruteforce"] is True
        assert verified["opt_matches_bruteforce"] is True

    def test_verify_skips_oracle_on_large_instance(self, capsys, tmp_path):
        inst = fs.generate_instance(40, 4, seed=3)
        path = tmp_path / "big.json"
        fs.save_instance(inst, path)
        code, out, err = run_cli(capsys, "solve", str(path), "--mode", "pne",
                                 "--verify")
        assert code == 0
        verified = parse(out)["outputs"]["verified"]
        assert verified["pne_check"] is True
        assert verified["potential_matches_bruteforce"] == "skipped"
        assert "partial verification" in err

    def test_facility_indices_reported_in_input_order(self, capsys, tmp_path):
        # facilities listed right-to-left in the file: outputs use file numbering
        doc = {"facilities": [{"location": 3, "building_cost": 4},
                              {"location": 0, "building_cost": 2}],
               "agents": [0, 3]}
        path = tmp_path / "swapped.json"
        path.write_text(json.dumps(doc))
        code, out, _ = run_cli(capsys, "solve", str(path), "--mode", "pne")
        assert code == 0
        # normalized solution pools on the left facility, which the input
        # file numbered 2
        assert parse(out)["outputs"]["pne"]["assignment"] == [2, 2]

    def test_missing_file(self, capsys):
        code, _, err = run_cli(capsys, "solve", "/nonexistent/inst.json")
        assert code == 1
        assert "error" in err

    def test_malformed_file(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{oops")
        code, _, _ = run_cli(capsys, "solve", str(path))
        assert code == 2

    def test_multiple_inputs_ndjson(self, capsys, tmp_path):
        paths = []
        for seed in (1, 2, 3):
            p = tmp_path / f"i{seed}.json"
            fs.save_instance(fs.generate_instance(3, 2, seed=seed), p)
            paths.append(str(p))
        code, out, _ = run_cli(capsys, "solve", *paths, "--mode", "pne")
        assert code == 0
        lines = [json.loads(line) for line in out.splitlines()]
        assert [d["instance_name"] for d in lines] == [
            "gen-n3-m2-s1", "gen-n3-m2-s2", "gen-n3-m2-s3"]

    def test_jobs_flag_parallel(self, capsys, tmp_path):
        paths = []
        for seed in (1, 2):
            p = tmp_path / f"j{seed}.json"
            fs.save_instance(fs.generate_instance(3, 2, seed=seed), p)
            paths.append(str(p))
        code, out, _ = run_cli(capsys, "solve", *paths, "--mode", "pne",
                               "--jobs", "2")
        assert code == 0
        assert len(out.splitlines()) == 2


class TestDynamics:
    def test_all_one_start_converges(self, capsys, running_file):
        code, out, _ = run_cli(capsys, "dynamics", running_file,
                               "--start", "all-1")
        assert code == 0
        outs = parse(out)["outputs"]
        assert outs["converged"] is True
        assert outs["final_is_equilibrium"] is True

    def test_equilibrium_start_zero_steps(self, capsys, tmp_path,
                                          running_instance):
        path = tmp_path / "r.json"
        fs.save_instance(running_instance, path)
        start = tmp_path / "start.json"
        start.write_text("[1, 1]")
        code, out, _ = run_cli(capsys, "dynamics", str(path),
                               "--start", f"file:{start}")
        assert code == 0
        outs = parse(out)["outputs"]
        assert outs["steps_taken"] == 0 and outs["converged"] is True

    def test_budget_zero_reports_not_converged(self, capsys, tmp_path,
                                               running_instance):
        path = tmp_path / "r.json"
        fs.save_instance(running_instance, path)
        start = tmp_path / "start.json"
        start.write_text("[2, 1]")
        code, out, _ = run_cli(capsys, "dynamics", str(path),
                               "--start", f"file:{start}", "--max-steps", "0")
        assert code == 0
        outs = parse(out)["outputs"]
        assert outs["converged"] is False and outs["steps_taken"] == 0

    def test_random_start_and_seeded_order(self, capsys, running_file):
        code, out, _ = run_cli(capsys, "dynamics", running_file,
                               "--start", "random:9",
                               "--order", "seeded-random", "--seed", "4")
        assert code == 0
        assert parse(out)["outputs"]["converged"] is True

    def test_seeded_random_without_seed(self, capsys, running_file):
        code, _, err = run_cli(capsys, "dynamics", running_file,
                               "--start", "all-1", "--order", "seeded-random")
        assert code == 2
        assert "seed" in err

    def test_invalid_start_spec(self, capsys, running_file):
        code, _, _ = run_cli(capsys, "dynamics", running_file,
                             "--start", "everything-at-2")
        assert code == 2


class TestMech:
    def test_krank_inline_spec(self, capsys, running_file):
        code, out, _ = run_cli(capsys, "mech", running_file,
                               "--mech", '{"kind": "krank", "params": {"k": 1}}')
        assert code == 0
        assert parse(out)["outputs"]["assignment"] == [1, 1]

    def test_spec_file_with_audits(self, capsys, running_file, tmp_path):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps(
            {"kind": "krank", "params": {"k": 2}}))
        code, out, _ = run_cli(capsys, "mech", running_file,
                               "--mech", str(spec_path),
                               "--audit", "sp,anon,unanimous")
        assert code == 0
        audits = parse(out)["outputs"]["audits"]
        assert audits["strategyproof"]["passed"] is True
        assert audits["anonymous"]["passed"] is True
        assert audits["unanimous"]["passed"] is True

    def test_precondition_mismatch_exit_code(self, capsys, tmp_path):
        inst = fs.Instance(fs.Environment((0.0, 1.0), (4.0, 2.0)),
                           fs.Profile((0.0, 1.0)))  # M = 0 environment
        path = tmp_path / "m0.json"
        fs.save_instance(inst, path)
        code, _, err = run_cli(capsys, "mech", str(path),
                               "--mech", '{"kind": "type4", "params": {"boundary_choice": 1}}')
        assert code == 3
        assert "0 < M < delta" in err

    def test_unknown_audit_token(self, capsys, running_file):
        code, _, _ = run_cli(capsys, "mech", running_file,
                             "--mech", '{"kind": "krank", "params": {"k": 1}}',
                             "--audit", "sp,frobnicate")
        assert code == 2


class TestRatio:
    def test_table_values(self, capsys):
        code, out, _ = run_cli(capsys, "ratio", "--epsilon", "0.1", "0.5")
        assert code == 0
        rows = parse(out)["outputs"]["rows"]
        by_eps = {r["epsilon"]: r for r in rows}
        assert by_eps[0.1]["pooling_term"] == pytest.approx(50.0, rel=1e-9)
        assert by_eps[0.1]["matches"] is True
        assert by_eps[0.5]["pooling_term"] == pytest.approx(2.0, rel=1e-9)
        assert by_eps[0.5]["lower_bound"] == pytest.approx(2.2, rel=1e-9)
        assert by_eps[0.5]["matches"] is True

    def test_epsilon_out_of_range(self, capsys):
        code, _, err = run_cli(capsys, "ratio", "--epsilon", "1.5")
        assert code == 2
        assert "epsilon" in err


def test_bad_flags_exit_code(capsys):
    code, _, _ = run_cli(capsys, "solve")  # missing input
    assert code == 2
