import json

import pytest

from asymptint.cli import RunConfig, main, parse_config
from asymptint.errors import ConfigError


def ef_config(mu, p=4, lam=3, params=None, **extra):
    cfg = {
        "problem": {
            "nonlinearity": {"type": "emden_fowler", "lambda": lam, "q": {"kind": "power", "mu": mu, "p": p}},
            "params": params if params is not None else {"c": 1.0},
        },
        "grid": {"ratio": 1.05, "t_max": 1000.0},
    }
    cfg.update(extra)
    return cfg


MANUFACTURED = {
    "problem": {
        "nonlinearity": {
            "type": "emden_fowler",
            "lambda": 3,
            "q": {"kind": "expr", "expr": "0.02*t^-3*(1-0.01/t)^-3", "envelope": [0.02 / 0.99**3, 3.0]},
        },
        "params": {"c": 1.0},
    },
    "scheme": {"name": "bounded_limit"},
}


def pde_config(h0=0.2, mu=0.05):
    return {
        "problem": {
            "pde": {
                "n": 3,
                "a": {"kind": "power", "mu": mu, "p": 4},
                "g": {"kind": "power", "mu": 1.0, "p": 1},
                "C": 0.5,
                "rho": 0.5,
                "h0": h0,
                "s0": 1.0,
            }
        },
        "grid": {"ratio": 1.05, "t_max": 1000.0},
    }


@pytest.fixture
def write(tmp_path):
    def _write(cfg, name="cfg.json"):
        path = tmp_path / name
        path.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
        return str(path)

    return _write


def run(*argv):
    return main(list(argv))


# (subcommand, config, extra flags, expected exit code)
MATRIX = [
    ("check", ef_config(0.5), [], 0),
    ("check", ef_config(5.0), [], 2),
    ("solve", ef_config(0.5), [], 0),
    ("solve", ef_config(5.0), [], 2),
    ("solve", ef_config(200.0), ["--force"], 3),
    ("oscillate", ef_config(1.0, p=0, oscillate={"t_end": 50.0}), [], 0),
    ("oscillate", ef_config(0.5), [], 1),
    ("pde", pde_config(), [], 0),
    ("pde", pde_config(h0=0.6), [], 2),
    ("pde", pde_config(mu=10.0), [], 2),
    ("pde", pde_config(h0=-0.1), [], 1),
]


@pytest.mark.parametrize("command, cfg, flags, code", MATRIX)
def test_exit_code_matrix(write, tmp_path, command, cfg, flags, code):
    assert run(command, "--config", write(cfg), "--out", str(tmp_path / "out"), *flags) == code


def test_check_report(write, capsys):
    assert run("check", "--config", write(ef_config(0.5))) == 0
    report = json.loads(capsys.readouterr().out)
    eta = report["checks"][0]["conditions"][0]
    assert eta["name"] == "eta" and eta["value"] == 0.75 and eta["verdict"] == "pass"


def test_malformed_names_field(write, caplog):
    cfg = ef_config(0.5)
    cfg["problem"]["parmas"] = {}
    assert run("check", "--config", write(cfg)) == 1
    assert "problem.parmas" in caplog.text


def test_invalid_json_names_line(write, caplog):
    assert run("check", "--config", write('{\n  "problem": ,\n}')) == 1
    assert "line 2" in caplog.text


def test_missing_config_file(tmp_path):
    assert run("check", "--config", str(tmp_path / "nope.json")) == 1


def test_solve_manufactured(write, tmp_path):
    out = tmp_path / "o"
    assert run("solve", "--config", write(MANUFACTURED), "--out", str(out)) == 0
    data = json.loads((out / "run_solve.json").read_text())
    assert data["certificate"]["certified"]
    assert data["certificate"]["error_bound"] <= 1e-10
    rows = (out / "run_solution.csv").read_text().splitlines()
    assert rows[0] == "t,x,xprime"


def test_forced_solve_is_marked(write, tmp_path):
    out = tmp_path / "o"
    assert run("solve", "--config", write(ef_config(5.0)), "--force", "--out", str(out)) == 0
    assert not json.loads((out / "run_solve.json").read_text())["certificate"]["certified"]


def test_overrides(write, tmp_path):
    out = tmp_path / "o"
    assert run("solve", "--config", write(ef_config(0.5)), "--grid-n", "40", "--tmax", "100", "--tol", "1e-8",
               "--out", str(out)) == 0
    data = json.loads((out / "run_solve.json").read_text())
    assert len(data["solution"]["nodes"]) == 41
    assert data["solution"]["nodes"][-1] == 100.0
    assert data["config"]["tolerances"]["tol"] == 1e-8


def test_verify_saved_solve(write, tmp_path, capsys):
    out = tmp_path / "o"
    assert run("solve", "--config", write(MANUFACTURED), "--out", str(out)) == 0
    assert run("verify", "--config", str(out / "run_solve.json")) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["residual"]["max"] <= 1e-6


@pytest.mark.parametrize(
    "p, t_end, expected",
    [(0, 50.0, 13), (4, 200.0, 1)],
)
def test_oscillate_outputs(write, tmp_path, p, t_end, expected):
    mu = 1.0 if p == 0 else 0.5
    out = tmp_path / "o"
    cfg = ef_config(mu, p=p, oscillate={"t_end": t_end, "x0": 1.0, "v0": 0.0})
    assert run("oscillate", "--config", write(cfg), "--out", str(out)) == 0
    data = json.loads((out / "run_crossings.json").read_text())
    assert data["count"] == expected
    assert data["atkinson_divergent"] == (p == 0)
    assert (out / "run_trajectory.csv").read_text().startswith("t,x\n")


def test_oscillate_zero_coefficient(write, tmp_path):
    out = tmp_path / "o"
    cfg = ef_config(0.0, oscillate={"t_end": 50.0})
    assert run("oscillate", "--config", write(cfg), "--out", str(out)) == 0
    assert json.loads((out / "run_crossings.json").read_text())["count"] == 0


def test_pde_outputs(write, tmp_path):
    out = tmp_path / "o"
    assert run("pde", "--config", write(pde_config()), "--out", str(out)) == 0
    data = json.loads((out / "run_pde.json").read_text())
    assert data["checks"]["ordering"]
    assert (out / "run_pde.csv").read_text().startswith("r,u1,u2\n")


def test_batch_takes_worst_code(write, tmp_path):
    a = write(ef_config(0.5), "a.json")
    b = write(ef_config(5.0), "b.json")
    batch = tmp_path / "batch.txt"
    batch.write_text(f"{a}\n{b}\n")
    assert run("check", "--batch", str(batch), "--out", str(tmp_path / "o")) == 2


def test_requires_config():
    assert run("check") == 1


def test_deterministic_output(write, tmp_path):
    path = write(MANUFACTURED)
    texts = []
    out = tmp_path / "o"
    for _ in range(2):
        assert run("solve", "--config", path, "--out", str(out)) == 0
        texts.append((out / "run_solve.json").read_bytes())
    assert texts[0] == texts[1]


def test_config_round_trip():
    cfg = parse_config(json.dumps(MANUFACTURED))
    again = parse_config(json.dumps(cfg.dump()))
    assert again == cfg
    assert isinstance(cfg, RunConfig)


def test_unknown_scheme_rejected():
    cfg = ef_config(0.5)
    cfg["scheme"] = {"name": "newton"}
    with pytest.raises(ConfigError, match="scheme.name"):
        parse_config(json.dumps(cfg))
