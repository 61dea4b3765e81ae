import json
from fractions import Fraction

import pytest

from pastlab.cli import main
from pastlab.exploration import StateGraph
from pastlab.certificates import in_loop_rsm_from_bound
from pastlab.syntax import parse

GEOMETRIC = "while (x = 0) { { skip } <1/2> { exit } }\n"


@pytest.fixture
def geometric_file(tmp_path):
    path = tmp_path / "geometric.pgcl"
    path.write_text(GEOMETRIC)
    return str(path)


def test_parse_round_trip(geometric_file, capsys):
    assert main(["parse", geometric_file]) == 0
    printed = capsys.readouterr().out.strip()
    assert parse(printed) == parse(GEOMETRIC)


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.pgcl"
    bad.write_text("while (")
    assert main(["parse", str(bad)]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_file(capsys):
    assert main(["parse", "/no/such/file.pgcl"]) == 2


def test_runtime_output(geometric_file, capsys):
    assert main(["runtime", geometric_file, "--scheduler", "const:Ln",
                 "--depth", "64"]) == 0
    out = capsys.readouterr().out
    assert "lower bound: 458745/65536" in out
    assert "closed: false" in out


def test_runtime_decimal_flag(geometric_file, capsys):
    assert main(["runtime", geometric_file, "--depth", "16",
                 "--decimal"]) == 0
    assert "(~" in capsys.readouterr().out


def test_run_json_round_trip(geometric_file, capsys):
    assert main(["run", geometric_file, "--depth", "11",
                 "--format", "json"]) == 0
    data = json.loads(capsys.readouterr().out)
    total = Fraction(data["terminal_mass"]) + Fraction(data["frontier_mass"])
    assert total == 1


def test_tree_json(geometric_file, tmp_path, capsys):
    out = tmp_path / "tree.json"
    assert main(["tree", geometric_file, "--depth", "6", "--format", "json",
                 "-o", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["depth_cap"] == 6
    assert data["nodes"][0]["prob"] == "1"
    assert all("/" in n["prob"] or n["prob"].isdigit()
               for n in data["nodes"])


def test_ast_check_exit_codes(tmp_path, geometric_file):
    spin = tmp_path / "spin.pgcl"
    spin.write_text("while (true) { skip }\n")
    assert main(["ast-check", geometric_file, "--delta", "1/2",
                 "--n", "12"]) == 0
    assert main(["ast-check", str(spin), "--delta", "1/2", "--n", "12"]) == 1


def test_graph_and_check_rsm(geometric_file, tmp_path, capsys):
    graph_path = tmp_path / "graph.json"
    assert main(["graph", geometric_file, "--bound", "50",
                 "-o", str(graph_path)]) == 0
    graph = StateGraph.from_json(json.loads(graph_path.read_text()))
    region = {i for i in range(len(graph)) if graph.kinds[i] != "terminal"}
    cert = in_loop_rsm_from_bound(graph, region, 20)
    cert_path = tmp_path / "cert.json"
    cert_path.write_text(json.dumps(cert.to_json(graph)))
    capsys.readouterr()
    assert main(["check-rsm", str(graph_path), str(cert_path)]) == 0
    assert "OK, bound = 7" in capsys.readouterr().out
    # break the certificate: rejected with exit 1
    bad = cert.to_json(graph)
    key = next(k for k, v in bad["h"].items() if Fraction(v) > 1)
    bad["h"][key] = "1/2"
    cert_path.write_text(json.dumps(bad))
    assert main(["check-rsm", str(graph_path), str(cert_path)]) == 1


def test_check_rsm_two_node_chain(tmp_path, capsys):
    program_path = tmp_path / "one.pgcl"
    program_path.write_text("skip\n")
    graph_path = tmp_path / "graph.json"
    assert main(["graph", str(program_path), "--bound", "10",
                 "-o", str(graph_path)]) == 0
    graph = StateGraph.from_json(json.loads(graph_path.read_text()))
    cert = {"epsilon": "1",
            "h": {graph.node_key(i): ("0" if graph.kinds[i] == "terminal"
                                      else "1")
                  for i in range(len(graph))}}
    cert_path = tmp_path / "cert.json"
    cert_path.write_text(json.dumps(cert))
    capsys.readouterr()
    assert main(["check-rsm", str(graph_path), str(cert_path)]) == 0
    assert "OK, bound = 1" in capsys.readouterr().out


def test_check_rule_cli(tmp_path, capsys):
    program_path = tmp_path / "two.pgcl"
    program_path.write_text("skip\n")
    graph_path = tmp_path / "graph.json"
    assert main(["graph", str(program_path), "--bound", "10",
                 "-o", str(graph_path)]) == 0
    graph = StateGraph.from_json(json.loads(graph_path.read_text()))
    cert = {
        "g": {graph.node_key(i): ("0" if graph.kinds[i] == "terminal"
                                  else "1")
              for i in range(len(graph))},
        "k": {graph.node_key(i): {"epsilon": "1",
                                  "h": {graph.node_key(j):
                                        ("1" if j == i else "0")
                                        for j in range(len(graph))}}
              for i in range(len(graph)) if graph.kinds[i] != "terminal"},
    }
    cert_path = tmp_path / "rule.json"
    cert_path.write_text(json.dumps(cert))
    capsys.readouterr()
    assert main(["check-rule", str(graph_path), str(cert_path)]) == 0
    assert "OK" in capsys.readouterr().out


def test_knievel_exit_codes(tmp_path, geometric_file):
    walk = tmp_path / "walk.pgcl"
    walk.write_text("x := 1; while (x != 0) "
                    "{ { x := x + 1 } <1/2> { x := x - 1 } }\n")
    assert main(["knievel", geometric_file]) == 0
    assert main(["knievel", str(walk)]) == 1


def test_knievel_transform(tmp_path, capsys):
    source = tmp_path / "simple.pgcl"
    source.write_text("x := 1\n")
    out = tmp_path / "out.pgcl"
    assert main(["knievel", str(source), "--transform", "-o", str(out)]) == 0
    from pastlab.transforms import is_knievel
    assert is_knievel(parse(out.read_text()))


def test_emit_commands(tmp_path, capsys):
    out = tmp_path / "emitted.pgcl"
    assert main(["emit", "reduction", "--tree", "all-zeros",
                 "-o", str(out)]) == 0
    from pastlab.transforms import is_knievel
    assert is_knievel(parse(out.read_text()))
    assert main(["emit", "ordinal", "--tree",
                 '{"explicit": [[], [0]]}', "-o", str(out)]) == 0
    assert is_knievel(parse(out.read_text()))
    assert main(["emit", "reduction", "--tree", "no-such-rule"]) == 2


def test_hydra_rank_and_compile(tmp_path, capsys):
    assert main(["hydra", "rank", "--tree", "((()))"]) == 0
    assert capsys.readouterr().out.strip() == "w"
    out = tmp_path / "hydra.pgcl"
    assert main(["hydra", "compile", "--tree", "((()))",
                 "-o", str(out)]) == 0
    from pastlab.transforms import is_knievel
    assert is_knievel(parse(out.read_text()))


def test_hydra_play_scripted_stdin(monkeypatch, capsys):
    # One round: chop the deep head with 0 evolutions (never dies), then
    # end input, which aborts the session.
    inputs = iter(["0.0", "0"])

    def fake_input(*args):
        try:
            return next(inputs)
        except StopIteration:
            raise EOFError

    monkeypatch.setattr("builtins.input", fake_input)
    code = main(["hydra", "play", "--tree", "((()))", "--seed", "5"])
    out = capsys.readouterr().out
    assert "T = w" in out
    assert "T now 4" in out
    assert code == 2


def test_node_cap_env_override(geometric_file, monkeypatch, capsys):
    monkeypatch.setenv("PASTLAB_NODE_CAP", "3")
    assert main(["run", geometric_file, "--depth", "30"]) == 2
    assert "error" in capsys.readouterr().err


def test_seeded_runs_reproducible(tmp_path, capsys):
    choice = tmp_path / "choice.pgcl"
    choice.write_text("{ x := 1 } [] { x := 2 }; "
                      "while (x > 0) { x := x - 1 }\n")
    outputs = []
    for _ in range(2):
        assert main(["run", str(choice), "--depth", "9",
                     "--scheduler", "random:9", "--format", "json"]) == 0
        outputs.append(capsys.readouterr().out)
    assert outputs[0] == outputs[1]
