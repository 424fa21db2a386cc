"""Smoke test for the galbrun extension: build with
`pip install --no-build-isolation -e crates/py`, then run this file."""

import math
import pathlib

import galbrun

CONFIGS = pathlib.Path(__file__).resolve().parent.parent / "configs"


def main():
    text = (CONFIGS / "standing_wave.conf").read_text()
    small = ["grid.nx=32", "grid.ny=17", "time.horizon=0.5", "output.snapshot_times="]

    out = galbrun.run(text, small + ["checks.enforce=h_invariant"])
    assert out["status"] == 0, out["checks"]
    cols = out["columns"]
    assert cols[0] == "t" and len(cols) == len(out["records"][0])
    e_total = [r[cols.index("E_total")] for r in out["records"]]
    assert all(math.isfinite(e) and e > 0 for e in e_total)
    print("run: %d records, h ratio %.2e" % (len(out["records"]), out["stats"]["h_ratio"]))

    bg = galbrun.validate_background((CONFIGS / "shear_admittance.conf").read_text())
    assert bg["pass"] and abs(bg["lambda0"] - 0.75) < 1e-3
    print("background: lambda0 %.4f" % bg["lambda0"])

    ops = galbrun.check_operators((CONFIGS / "operators.conf").read_text())
    assert ops["pass"], ops
    print("operators: ibp %.2e, lie orders %.2f/%.2f" % (ops["ibp_max"], *ops["lie_orders"]))

    try:
        galbrun.check_config(text, ["time.cfl=1.5"])
    except galbrun.ConfigError as e:
        assert "cfl" in str(e)
    else:
        raise AssertionError("cfl = 1.5 accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
