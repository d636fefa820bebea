"""Smoke test for the `rha` extension module (build with maturin or pip)."""

import json
from pathlib import Path

import rha

MODELS = Path(__file__).resolve().parent.parent / "models"


def main():
    half = rha.Rational("1/2")
    assert str(half + half) == "1"
    assert rha.Rational("2/6") == rha.Rational("1/3")
    assert rha.Rational("1/3") < half

    good = rha.Model.load(str(MODELS / "good.rha"))
    assert good.validate()["valid"]
    assert rha.Model.parse(good.serialize()).serialize() == good.serialize()

    sim = good.simulate(target="A.ex")
    assert sim["reason"] == "target reached", sim
    assert good.check_run(sim["trace"]) == rha.Rational("1")

    db = rha.Model.load(str(MODELS / "db.rha"))
    reachable, witness = db.reach("DB.ex")
    assert reachable and witness

    ref = rha.Model.load(str(MODELS / "refnocnt.rha"))
    res = ref.tb_reach("B1.ex1", "1", context=2, max_len=12)
    assert res["reachable"] and res["duration"] == rha.Rational("1"), res
    out = ref.contract(res["witness"], context=2)
    assert out["certified"] is not None
    assert json.loads(out["certified"])["steps"]

    prog = "inc c goto 1; inc d goto 2; dec c goto 3; halt"
    halted, trace = rha.interpret_cm(prog)
    assert halted and trace[-1] == (3, 0, 1)
    for enc in ["2sw", "3sw-gf", "5clk-tb", "14sw-tb"]:
        r = rha.run_cm(prog, enc)
        assert r["halted"] and r["agrees"], enc
    assert rha.compile_cm(prog, "14sw-tb").validate()["glitch_free"]

    try:
        rha.Model.parse("model m\ncomponent A\nentry en\nedge en -> nowhere\n")
    except rha.RhaError as e:
        assert "nowhere" in str(e)
    else:
        raise AssertionError("parse error not raised")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
