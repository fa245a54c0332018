"""Smoke test for the chse_py extension.

Build and install first, e.g.
    pip install --no-build-isolation ./crates/python
or
    cargo build -p chse-py --release --features extension-module
    cp target/release/libchse_py.so python/chse_py.so
"""

import json
import math
import pathlib
import sys
import tempfile

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent))

import chse_py  # noqa: E402


def main():
    assert chse_py.fib_word(1, 13) == "0100101001001"
    assert chse_py.fib_word(2, 13) == "0010010001001"
    assert chse_py.zeckendorf_indices(10) == [6, 3]

    h = chse_py.haar_moment(2, 2)
    assert len(h) == 4 and abs(h[0][0] - 1 / 3) < 1e-15 and abs(h[1][2] - 1 / 6) < 1e-15
    assert chse_py.haar_mc_distance(2, 1, 20000, seed=3) < 0.02

    b2 = chse_py.bound_b(2)
    assert abs(b2 - (1 / 3 - math.sqrt(1 / 12))) < 1e-15
    for delta, dephased, bound in chse_py.bound_check(3, 10, seed=1):
        assert delta >= dephased - 1e-12 and dephased >= bound - 1e-12

    drive = chse_py.Drive("xz", theta_x=0.39, theta_z=0.39)
    rows = drive.decay(2, 40, states=[[1, 0]], bits=256)
    assert len(rows) == 40 and rows[0]["n"] == 1 and rows[-1]["t"].isdigit()
    assert rows[-1]["delta"] < rows[0]["delta"]

    coin = chse_py.coin_baseline(t_max=200, n_states=2)
    assert coin[0][0] == 1 and coin[-1][0] == 200

    chain = chse_py.Chain(4, 100)
    series = chain.delta_series(1, n_states=2)
    assert all(0 <= d <= 1 for _, d in series)
    therm = chain.deep_therm(2, n_states=2)
    assert len(therm) == 101 and abs(therm[0][1] - 0.75) < 1e-12

    try:
        chse_py.Chain(40, 10)
    except MemoryError:
        pass
    else:
        raise AssertionError("oversized chain accepted")

    with tempfile.TemporaryDirectory() as out:
        assert chse_py.run_cli(["--out", out, "bound-check", "--instances", "2"]) == 0
        manifest = json.loads(pathlib.Path(out, "manifest.json").read_text())
        assert manifest["subcommand"] == "bound-check"
        assert chse_py.run_cli(["--out", out, "word", "--length", "x"]) == 2

    print("chse_py smoke test passed")


if __name__ == "__main__":
    main()
