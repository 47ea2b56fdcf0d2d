#!/usr/bin/env python3
# Copyright 2026 nrdisp Contributors
# SPDX-License-Identifier: Apache-2.0
"""Smoke test for the nrdisp Python extension.

Builds the extension with cargo (unless NRDISP_SKIP_BUILD is set), loads it
from the build directory and exercises the main entry points.
"""

import cmath
import importlib.util
import json
import os
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load_module():
    if not os.environ.get("NRDISP_SKIP_BUILD"):
        subprocess.run(
            ["cargo", "build", "--release", "-p", "nrdisp-py", "--features", "extension-module"],
            cwd=ROOT,
            check=True,
        )
    lib = ROOT / "target" / "release" / "libnrdisp.so"
    if not lib.exists():
        lib = ROOT / "target" / "release" / "libnrdisp.dylib"
    tmp = pathlib.Path(tempfile.mkdtemp())
    target = tmp / "nrdisp.so"
    shutil.copy(lib, target)
    spec = importlib.util.spec_from_file_location("nrdisp", target)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    nr = load_module()
    p = nr.EffectiveParams.preset("device-a")
    print("version", nr.__version__, p)

    # Closed form against the integrator.
    n0, t = 3.0, 0.7
    closed = nr.free_decay_closed_form(p, n0, t)
    amp = complex(n0**0.5, 0)
    traj = nr.simulate(p, amp, amp, [0.0, t])
    assert abs(traj["ln_ratio"][1] - closed) < 1e-9 * abs(closed), (traj["ln_ratio"][1], closed)

    # Round trip through the virtual measurements.
    ms = nr.measurement_set(p)
    res = json.loads(nr.extract(ms))
    for key, want in [("lambda", p.lambda_), ("kappa", p.kappa), ("gamma_nr", p.gamma), ("eta", p.eta)]:
        got = res["params"][key]
        assert abs(got - want) < 1e-6 * max(abs(want), 1.0), (key, got, want)

    # Oracle agreement.
    cmp = nr.compare_oracle(p, n0=3.0, n_max=30, t_end=2.0, points=41)
    assert cmp["full_vs_semiclassical"] < 1e-6, cmp

    # Errors map to Python exceptions.
    try:
        nr.EffectiveParams(0.0, 1.0, -1.0, 0.0, 0.0, 0.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative kappa accepted")

    stark, deph = nr.cw_steady_state(p, complex(2.0, 0.0), 0.0)
    assert deph > 0.0
    assert cmath.isfinite(nr.fock_steady_ratio(p))
    print("smoke test passed")


if __name__ == "__main__":
    sys.exit(main())
