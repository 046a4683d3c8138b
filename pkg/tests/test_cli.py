from __future__ import annotations

import json

import pytest

from giantatom.cli import build_parser, main


def _read_json(path):
    return json.loads(path.read_text())


def _assert_same_outputs(a, b):
    names = sorted(f.name for f in a.iterdir())
    assert names == sorted(f.name for f in b.iterdir())
    for name in names:
        if name == "manifest.json":
            ma, mb = _read_json(a / name), _read_json(b / name)
            assert ma.pop("out_dir") != mb.pop("out_dir")
            assert ma == mb
        else:
            assert (a / name).read_bytes() == (b / name).read_bytes()


def test_decay_single_cell_with_plot_script(tmp_path, capsys):
    out = tmp_path / "decay"
    rc = main(["decay", "--d", "6", "--phi-c", "pi/2", "--solver", "dde,lattice",
               "--out", str(out), "--plot-script"])
    assert rc == 0
    manifest = _read_json(out / "manifest.json")
    h = manifest["manifest_hash"]
    for solver in ("dde", "lattice"):
        lines = (out / f"decay_d6_phicpiover2_{solver}.csv").read_text().splitlines()
        assert lines[0] == f"# manifest={h}"
        assert lines[1] == "t,re_eps,im_eps,pop,ref_exp,deviation"
    summary = (out / "decay_summary.csv").read_text().splitlines()
    assert summary[0] == f"# manifest={h}"
    assert len(summary) == 4
    script = (out / "decay.gp").read_text()
    assert "multiplot" in script and "d = 6" in script
    text = capsys.readouterr().out
    assert "d=6" in text


def test_decay_default_grid_is_six_by_three(tmp_path):
    out = tmp_path / "grid"
    assert main(["decay", "--solver", "dde", "--t-max", "5", "--out", str(out)]) == 0
    assert len(list(out.glob("decay_d*_dde.csv"))) == 18


def test_decay_is_bit_identical(tmp_path):
    args = ["decay", "--d", "2", "--phi-c", "0", "--solver", "lattice,dde", "--t-max", "5"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    _assert_same_outputs(tmp_path / "a", tmp_path / "b")


def test_decay_worker_pool_matches_serial(tmp_path, monkeypatch):
    args = ["decay", "--d", "1,2", "--phi-c", "0", "--solver", "dde", "--t-max", "5"]
    main(args + ["--out", str(tmp_path / "serial")])
    monkeypatch.setenv("GIANTATOM_WORKERS", "2")
    main(args + ["--out", str(tmp_path / "pool")])
    _assert_same_outputs(tmp_path / "serial", tmp_path / "pool")


def test_decay_json_format(tmp_path):
    out = tmp_path / "j"
    assert main(["decay", "--d", "1", "--phi-c", "0", "--solver", "dde", "--t-max", "2",
                 "--format", "json", "--out", str(out)]) == 0
    payload = _read_json(out / "decay_d1_phic0_dde.json")
    assert payload["metadata"]["solver_tag"] == "dde"
    assert payload["metadata"]["manifest_hash"] == _read_json(out / "manifest.json")["manifest_hash"]


@pytest.mark.parametrize("bad", [["--solver", "magic"], ["--d", "0"], ["--phi-c", "banana"]])
def test_decay_bad_sweep_is_usage_error(tmp_path, bad):
    assert main(["decay", "--out", str(tmp_path), *bad]) == 2


def test_markov_solve_prints_rational_phases(capsys):
    assert main(["markov-solve", "--L", "4"]) == 0
    out = capsys.readouterr().out
    assert "phi_2 = pi/2" in out and "phi_3 = pi" in out and "phi_4 = pi/2" in out


def test_markov_solve_json(capsys):
    assert main(["markov-solve", "--L", "3", "--format", "json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["phases"] == ["0", "-pi/4", "pi/2"]
    assert data["is_markovian"]


def test_markov_solve_range(capsys):
    assert main(["markov-solve", "--L", "9"]) == 2


def test_bic_report_and_profile(tmp_path):
    out = tmp_path / "bic"
    assert main(["bic", "--d", "2", "--phi-c", "0", "--out", str(out)]) == 0
    report = _read_json(out / "bic_report.json")
    assert report["exists"] and report["m"] == 1
    assert report["eps_pop"] == pytest.approx(0.96154, abs=1e-5)
    assert report["verification"]["success"]
    lines = (out / "bic_profile.csv").read_text().splitlines()
    assert lines[1] == "x,re,im,abs2"


def test_bic_absent(tmp_path):
    out = tmp_path / "nobic"
    assert main(["bic", "--d", "2", "--phi-c", "pi/2", "--out", str(out)]) == 0
    assert not _read_json(out / "bic_report.json")["exists"]
    assert not (out / "bic_profile.csv").exists()


def test_collision_command(tmp_path):
    out = tmp_path / "col"
    assert main(["collision", "--d", "2", "--phi-c", "pi/2", "--dt", "0.02", "--out", str(out),
                 "--format", "json"]) == 0
    report = _read_json(out / "collision_report.json")
    assert report["max_pop_deviation_vs_dde"] < 5e-2
    payload = _read_json(out / "collision.json")
    assert "bins" in payload and payload["metadata"]["solver_tag"] == "collision"


def test_collision_misaligned_step(tmp_path):
    assert main(["collision", "--dt", "0.03", "--out", str(tmp_path)]) == 2


def test_chirality_command(tmp_path):
    out = tmp_path / "ch"
    main(["chirality", "--d", "1", "--phi-c", "0", "--out", str(out)])
    report = _read_json(out / "chirality_report.json")
    assert report["final_pop"] < 1e-3
    assert report["forward"] == pytest.approx(report["backward"], abs=1e-3)
    assert report["closure"] < 1e-6


def test_chirality_refuses_trapped_atom(tmp_path):
    assert main(["chirality", "--d", "2", "--phi-c", "0", "--out", str(tmp_path)]) == 2


def test_crossvalidate_reports_all_pairs(tmp_path):
    out = tmp_path / "cv"
    rc = main(["crossvalidate", "--d", "2", "--phi-c", "pi/2", "--t-max", "10", "--out", str(out)])
    report = _read_json(out / "crossvalidate_report.json")
    assert set(report["pairwise_max_pop_deviation"]) == {"lattice/dde", "lattice/collision", "dde/collision"}
    assert report["pairwise_max_pop_deviation"]["dde/collision"] < 1e-3
    assert rc == (1 if report["violations"] else 0)


def test_crossvalidate_exit_code_flags_violation(tmp_path):
    rc = main(["crossvalidate", "--d", "2", "--phi-c", "0", "--solver", "lattice,dde",
               "--out", str(tmp_path)])
    report = _read_json(tmp_path / "crossvalidate_report.json")
    assert report["violations"]
    assert rc == 1


def test_crossvalidate_passes_at_weaker_coupling(tmp_path):
    cfg = tmp_path / "weak.yaml"
    cfg.write_text("g: 0.1\n")
    rc = main(["crossvalidate", "--config", str(cfg), "--d", "2", "--phi-c", "0",
               "--solver", "lattice,dde", "--out", str(tmp_path / "cv")])
    report = _read_json(tmp_path / "cv" / "crossvalidate_report.json")
    assert report["pairwise_max_pop_deviation"]["lattice/dde"] <= 2e-2
    assert not report["violations"]
    assert rc == 0


def test_config_file(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("g: 0.1\nN: 120\n")
    out = tmp_path / "o"
    assert main(["decay", "--config", str(cfg), "--d", "2", "--phi-c", "pi/2", "--solver", "dde",
                 "--t-max", "2", "--out", str(out)]) == 0
    assert _read_json(out / "manifest.json")["config"]["g"] == 0.1


def test_parser_lists_subcommands():
    parser = build_parser()
    help_text = parser.format_help()
    for name in ("decay", "markov-solve", "bic", "collision", "chirality", "crossvalidate"):
        assert name in help_text
    args = parser.parse_args(["decay", "--phi-c", "0,pi/2"])
    assert args.phi_c == "0,pi/2" and args.format == "csv"
