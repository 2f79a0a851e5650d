"""Smoke test for the shelab Python module.

Build first:
    cargo build -p shelab-py --release --features extension-module
then run `python3 python/smoke_test.py` from the workspace root. The built
library is copied to a temporary directory as shelab.so when the module is
not already importable.
"""

import json
import math
import os
import shutil
import sys
import tempfile


def load():
    try:
        import shelab  # noqa: F401
    except ImportError:
        root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
        built = os.path.join(root, "target", "release", "libshelab.so")
        if not os.path.exists(built):
            sys.exit("libshelab.so not found; run cargo build -p shelab-py --release --features extension-module")
        tmp = tempfile.mkdtemp()
        shutil.copy(built, os.path.join(tmp, "shelab.so"))
        sys.path.insert(0, tmp)
    import shelab

    return shelab


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b, tol)


def main():
    sh = load()

    ai, aip = sh.airy(0.0)
    close(ai, 0.355028053887817, 1e-12)
    close(aip, -0.258819403792807, 1e-12)
    close(sh.k12_diag(0.0), 0.185330168408935, 1e-12)
    close(sh.kernel_entry(1, 2, 0.0, 0.0), sh.k12_diag(0.0), 1e-14)
    close(sh.pfaffian([[0, 1, 2, 3], [-1, 0, 4, 5], [-2, -4, 0, 6], [-3, -5, -6, 0]]), 8.0, 1e-12)
    assert sh.correlation([0.0, 1.0]) > 0

    close(sh.goe_cdf(0.0), 0.8319080662, 1e-9)
    lt = sh.laplace_transform(0.1, 4.0)
    assert 0 < lt < 1

    value, argmax = sh.rate_function(1.0)
    close(value, 2.0 / 3.0, 1e-15)
    close(argmax, 1.0, 1e-15)
    close(sh.log_leading_term(1.0, 20.0), 20.0 / 3.0, 1e-3)

    b = sh.fractional_moment(1.0, 10.0, 2)
    assert b["sign_total"] == 1 and len(b["higher"]) == 1

    ok, rows = sh.audit("k12", 20)
    assert ok and all(math.isfinite(r[1]) for r in rows)

    try:
        sh.airy(100.0)
    except ValueError:
        pass
    else:
        raise AssertionError("out-of-window x accepted")

    code, out, err = sh.run_cli(["goe-cdf", "--s0", "-2,0,2", "--format", "json"])
    assert code == 0 and err == ""
    rows = json.loads(out)["rows"]
    assert [r[1] for r in rows] == sorted(r[1] for r in rows)
    code, _, err = sh.run_cli(["goe-cdf"])
    assert code == 1 and "--s0" in err

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
