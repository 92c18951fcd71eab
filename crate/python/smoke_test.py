"""Smoke test for the beam_pinn extension module.

Build first with `pip install --no-build-isolation ./crates/python`
(or `maturin develop -m crates/python/Cargo.toml`).
"""
import math
import sys
import tempfile

import beam_pinn


def main():
    assert abs(beam_pinn.exact("p1", 0.5, 0.5) - 0.220584) < 5e-7
    assert abs(beam_pinn.exact("p2", math.pi / 2, 0.4) - 0.309017) < 5e-7
    for p in ("p1", "p2", "p3"):
        assert abs(beam_pinn.exact_residual(p, 0.3, 0.7)) < 1e-9

    rows = beam_pinn.fdm("p1")
    assert len(rows) == 401 and len(rows[0]) == 11
    assert abs(rows[0][5] - 1.0) < 1e-12

    try:
        beam_pinn.exact("p9", 0.0, 0.0)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown problem accepted")

    with tempfile.TemporaryDirectory() as out:
        loss, model = beam_pinn.train("p1", "apinn", out, epochs=20, seed=0)
        assert math.isfinite(loss)
        values = model.predict([(0.5, 0.0), (0.25, 0.5)])
        assert len(values) == 2 and all(math.isfinite(v) for v in values)
        e2, e3, e4 = model.errors(21, 21)
        assert 0 <= e2 and 0 <= e3 and e4 >= math.sqrt(e2)
        again = beam_pinn.Model.load("p1", out)
        assert again.predict([(0.5, 0.0)]) == values[:1]

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
