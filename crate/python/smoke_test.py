"""Build the extension module and exercise it from Python.

    python3 python/smoke_test.py

Builds crates/python in release mode, copies the shared library next to a
temporary import path and runs a few quick checks.
"""

import cmath
import json
import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[1]


def build() -> pathlib.Path:
    subprocess.run(
        ["cargo", "build", "--release", "-p", "sinebeta-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    lib = ROOT / "target" / "release" / "libsinebeta.so"
    if not lib.exists():
        sys.exit(f"expected {lib}")
    return lib


def main() -> None:
    lib = build()
    tmp = pathlib.Path(tempfile.mkdtemp())
    shutil.copy(lib, tmp / "sinebeta.so")
    sys.path.insert(0, str(tmp))
    import sinebeta as sb

    p = sb.BetaParams(2.0)
    assert p.beta == 2.0 and abs(p.drift(0.0) - 0.5) < 1e-15
    try:
        sb.BetaParams(-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative beta accepted")

    c = sb.count_points(2.0, 2 * math.pi, 7)
    assert c.frozen and c.count >= 0
    pts = sb.sample_configuration(2.0, 20.0, 3)
    assert pts == sorted(pts) and all(0 < x <= 20 for x in pts)
    times, paths = sb.integrate_family(2.0, [1.0, 2.0], 1, 1.0, 100)
    assert len(times) == 101 and len(paths) == 2 and paths[0][-1] <= paths[1][-1]

    est = sb.partially_truncated(2.0, [(0.0, 1.0)], [(1.0, 2.0)], 500, seed=1)
    exact = sb.rho2_truncated_beta2_integrated((0.0, 1.0), (1.0, 2.0))
    assert abs(est.value - exact) < 5 * est.std_err, (est, exact)

    x = sb.HermitianBlockCov.coupled_pair(0.1, [0.05 + 0j])
    y = sb.HermitianBlockCov.independent(0.1, 2, 1)
    h = sb.hellinger(x, y)
    assert abs(h - sb.hellinger_coupled_pair(0.1, [0.05])) < 1e-12
    assert abs(sb.tv_upper_bound(x, y) - math.sqrt(2) * h) < 1e-12
    assert sb.HermitianBlockCov.from_json(x.to_json()).blocks() == x.blocks()

    z = [cmath.rect(1.0, 0.3 * i) for i in range(50)]
    reg = sb.spectral_regularize([[w, w] for w in z], 0.01, seed=2)
    assert reg.cutoff == 1 and len(reg.samples) == 50

    assert len(sb.set_partitions(4)) == sb.bell(4) == 15
    assert sb.ordered_bell(3) == 13 and sb.stirling2(5, 2) == 15
    m = [0.0, 1.0, 2.0, 5.0]
    back = sb.moments_from_cumulants(sb.cumulants_from_moments(m, 2), 2)
    assert all(abs(a - b) < 1e-12 for a, b in zip(m[1:], back[1:]))
    assert abs(sb.rho2_truncated_beta2(math.pi) + math.pi ** -4) < 1e-15
    value, exponent, oscillating = sb.leading_asymptotics(1.0, 10.0)
    assert exponent == 2.0 and not oscillating and value < 0

    csv, summary = sb.run_experiment(
        json.dumps({"kind": "intensity", "beta": 2, "n_samples": 200, "window": 3})
    )
    assert csv.splitlines()[0].startswith("beta,window_start")
    assert json.loads(summary)["kind"] == "intensity"
    try:
        sb.run_experiment('{"kind": "intensity", "beta": 0, "n_samples": 5}')
    except ValueError:
        pass
    else:
        raise AssertionError("bad config accepted")

    report = sb.validate([7], scale=0.01)
    assert report[0][2], report
    print("python smoke test passed")


if __name__ == "__main__":
    main()
