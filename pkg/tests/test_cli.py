import json
import subprocess
import sys

from diffusion_auction import fileformat
from diffusion_auction.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_idm_report_on_bundled_example(capsys):
    code, out, _ = run_cli(capsys, "run", "--mechanism", "idm", "--items", "1", "--network", "bundled:figure1",
                           "--format", "structured")
    assert code == 0
    doc = json.loads(out)
    pay = {r["label"]: r["payment"] for r in doc["rows"] if r["payment"] != "0"}
    assert pay == {"C": "-1", "K": "17"}
    assert [r["label"] for r in doc["rows"] if r["item"]] == ["K"]
    assert doc["revenue"] == "16"


def test_gidm_dot_export(capsys, tmp_path):
    dot = tmp_path / "tree.dot"
    code, out, _ = run_cli(capsys, "run", "--mechanism", "gidm", "--items", "5", "--network", "bundled:figure1",
                           "--dot", str(dot), "--trace")
    assert code == 0
    text = dot.read_text()
    assert 's -> n3;' in text and 's -> n4;' in text
    assert 'label="C/6/3"' in text and 'label="D/14/2"' in text
    assert "revenue: 61" in out and "trace: event=pop buyer=D" in out


def test_reports_are_byte_identical(capsys, tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    for path in (a, b):
        assert main(["run", "--mechanism", "gidm", "--network", "bundled:figure1", "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert "generated" not in a.read_text()
    main(["run", "--mechanism", "gidm", "--network", "bundled:figure1", "--metadata"])
    assert "generated:" in capsys.readouterr().out


def test_empty_seller_neighbourhood_warns(capsys, tmp_path):
    path = tmp_path / "lonely.net"
    path.write_text(json.dumps({"schema": fileformat.SCHEMA, "seller_neighbors": [],
                                "buyers": [{"id": 1, "valuation": "3"}]}))
    code, out, err = run_cli(capsys, "run", "--mechanism", "gidm", "--network", str(path))
    assert code == 0
    assert "warning" in err and "revenue: 0" in out


def test_exit_codes(capsys, tmp_path):
    bad = tmp_path / "bad.net"
    bad.write_text('{"schema": ')
    assert run_cli(capsys, "run", "--mechanism", "gidm", "--network", str(bad))[0] == 2
    assert run_cli(capsys, "run", "--mechanism", "gidm", "--network", str(tmp_path / "missing.net"))[0] == 2
    assert run_cli(capsys, "run", "--mechanism", "idm", "--items", "2", "--network", "bundled:figure1")[0] == 2
    infeasible = tmp_path / "infeasible.net"
    infeasible.write_text(json.dumps({
        "schema": fileformat.SCHEMA, "seller_neighbors": [1],
        "buyers": [{"id": 1, "valuation": "1", "neighbors": [2]}, {"id": 2, "valuation": "2", "neighbors": [1]}],
        "actions": [{"id": 1, "valuation": "1", "invited": [2]}]}))
    code, _, err = run_cli(capsys, "run", "--mechanism", "gidm", "--network", str(infeasible))
    assert code == 3 and "buyer 2" in err


def test_actions_file_overrides(capsys, tmp_path):
    acts = tmp_path / "acts.net"
    acts.write_text(json.dumps({
        "schema": fileformat.SCHEMA, "seller_neighbors": [1, 3],
        "buyers": [{"id": 1, "valuation": "1", "neighbors": [2]}, {"id": 2, "valuation": "9", "neighbors": [1]},
                   {"id": 3, "valuation": "4"}],
        "actions": [{"id": 1, "valuation": "1", "invited": []}, {"id": 3, "valuation": "4"}]}))
    code, out, _ = run_cli(capsys, "run", "--mechanism", "gidm", "--network", str(acts), "--format", "structured")
    assert code == 0
    doc = json.loads(out)
    assert [r["id"] for r in doc["rows"] if r["item"]] == [3]
    assert "utility" not in doc["rows"][0]


def test_gen_is_deterministic_and_runs(capsys, tmp_path):
    a, b = tmp_path / "a.net", tmp_path / "b.net"
    for path in (a, b):
        assert main(["gen", "--buyers", "7", "--edge-prob", "0.5", "--items", "2", "--seed", "4",
                     "--values", "0..9", "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert run_cli(capsys, "run", "--mechanism", "gidm", "--network", str(a))[0] == 0


def test_gen_complete_graph(tmp_path):
    path = tmp_path / "k.net"
    main(["gen", "--buyers", "5", "--edge-prob", "1", "--seed", "0", "--out", str(path)])
    net, _ = fileformat.load(path)
    assert all(len(net.buyer_neighbors(i)) == 4 for i in net.buyers)


def test_gen_rejects_bad_config(capsys, tmp_path):
    assert run_cli(capsys, "gen", "--buyers", "0", "--edge-prob", "0.5", "--seed", "0",
                   "--out", str(tmp_path / "x.net"))[0] == 2


def test_verify_passes_and_writes_report(capsys, tmp_path):
    out = tmp_path / "rep.json"
    code, _, err = run_cli(capsys, "verify", "idm-equiv", "--trials", "20", "--buyers", "7", "--seed", "1",
                           "--out", str(out))
    assert code == 0
    assert json.loads(out.read_text())["ok"]
    assert "20 instances" in err


def test_verify_exit_one_with_replayable_witness(capsys, tmp_path):
    out = tmp_path / "rep.json"
    code, _, _ = run_cli(capsys, "verify", "ic", "--trials", "90", "--buyers", "8", "--items", "1,2,3",
                         "--seed", "2", "--edge-prob", "0.25", "--out", str(out))
    assert code == 1
    rep = json.loads(out.read_text())
    net_path = tmp_path / "witness.net"
    net_path.write_text(json.dumps(rep["witness"]["network"]))
    assert run_cli(capsys, "run", "--mechanism", "gidm", "--network", str(net_path))[0] == 0


def test_verify_rejects_bad_items(capsys):
    assert run_cli(capsys, "verify", "ic", "--trials", "1", "--buyers", "3", "--items", "0", "--seed", "1")[0] == 2


def test_order_sensitivity_is_informational(capsys):
    assert run_cli(capsys, "verify", "order-sensitivity", "--trials", "5", "--buyers", "6", "--items", "2",
                   "--seed", "1")[0] == 0


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "diffusion_auction.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "diffauction" in res.stdout
