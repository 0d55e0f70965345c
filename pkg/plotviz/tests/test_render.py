import numpy as np
import pytest

from plotviz import PlotSpec, SchemaError, read_artifact_csv, render
from plotviz.cli import main


def golden_trajectory(path, n=41):
    t = np.linspace(0, 100.0, n)
    th = np.pi * t / (2 * t[-1])
    rows = np.stack([t, np.cos(th) ** 2, np.sin(th) ** 2,
                     np.zeros(n), np.zeros(n), np.ones(n)], axis=1)
    lines = ["# digest=deadbeef00112233",
             "t,F_gamma11,F_gamma12,F_gamma13,F_e,norm"]
    lines += [",".join(f"{x:.12g}" for x in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def golden_sweep(path):
    lines = ["# digest=cafebabe44556677", "epsilon,lambda,fidelity"]
    for lam in (0.0, 2.0, 5.0):
        for eps in np.linspace(-0.05, 0.05, 11):
            lines.append(f"{eps:.12g},{lam:.12g},{1 - (1 + lam) * eps ** 2:.12g}")
    path.write_text("\n".join(lines) + "\n")
    return path


def test_read_artifact_requires_digest(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("t,F_e\n0,1\n")
    with pytest.raises(SchemaError, match="digest"):
        read_artifact_csv(p)


def test_braid_render_deterministic(tmp_path):
    csv = golden_trajectory(tmp_path / "traj.csv")
    a = render(PlotSpec(input_csv=csv, kind="braid", output=tmp_path / "a.png"))
    b = render(PlotSpec(input_csv=csv, kind="braid", output=tmp_path / "b.png"))
    ba, bb = a.read_bytes(), b.read_bytes()
    assert ba == bb
    assert len(ba) > 5000
    assert b"digest=deadbeef00112233" in ba   # tEXt chunk carries the digest


def test_sweep_render_deterministic(tmp_path):
    csv = golden_sweep(tmp_path / "sweep.csv")
    a = render(PlotSpec(input_csv=csv, kind="sweep", output=tmp_path / "a.png"))
    b = render(PlotSpec(input_csv=csv, kind="sweep", output=tmp_path / "b.png"))
    assert a.read_bytes() == b.read_bytes()
    assert b"digest=cafebabe44556677" in a.read_bytes()


def test_chiral_render_deterministic(tmp_path):
    csv = golden_trajectory(tmp_path / "chiral.csv")
    a = render(PlotSpec(input_csv=csv, kind="chiral", output=tmp_path / "a.png"))
    b = render(PlotSpec(input_csv=csv, kind="chiral", output=tmp_path / "b.png"))
    assert a.read_bytes() == b.read_bytes()


def test_kind_schema_mismatch_rejected(tmp_path):
    csv = golden_sweep(tmp_path / "sweep.csv")
    with pytest.raises(SchemaError, match="required for kind"):
        render(PlotSpec(input_csv=csv, kind="braid", output=tmp_path / "x.png"))
    csv2 = golden_trajectory(tmp_path / "traj.csv")
    with pytest.raises(SchemaError, match="required for kind"):
        render(PlotSpec(input_csv=csv2, kind="sweep", output=tmp_path / "y.png"))


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(SchemaError):
        PlotSpec(input_csv=tmp_path / "x.csv", kind="scatter",
                 output=tmp_path / "x.png")


def test_empty_payload_renders_empty_axes(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("# digest=0000\nt,F_gamma11,F_gamma12,F_gamma13,F_e,norm\n")
    out = render(PlotSpec(input_csv=p, kind="braid", output=tmp_path / "e.png"))
    assert out.exists() and out.stat().st_size > 1000


def test_render_does_not_mutate_input(tmp_path):
    csv = golden_trajectory(tmp_path / "traj.csv")
    before = csv.read_bytes()
    render(PlotSpec(input_csv=csv, kind="braid", output=tmp_path / "a.png"))
    assert csv.read_bytes() == before


def test_cli_end_to_end(tmp_path, capsys):
    csv = golden_sweep(tmp_path / "s.csv")
    rc = main(["sweep", "--in", str(csv), "--out", str(tmp_path / "s.png")])
    assert rc == 0
    assert (tmp_path / "s.png").exists()


def test_cli_empty_payload_exit_zero(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("# digest=0000\nepsilon,lambda,fidelity\n")
    rc = main(["sweep", "--in", str(p), "--out", str(tmp_path / "e.png")])
    assert rc == 0


def test_cli_schema_error_exit_one(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("nope\n")
    rc = main(["braid", "--in", str(p), "--out", str(tmp_path / "x.png")])
    assert rc == 1
    assert "error" in capsys.readouterr().err
