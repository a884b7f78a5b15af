#!/usr/bin/env python3
"""Smoke test for the bb84link_py extension module.

Build the extension first, then run this script from the repository root:

    cargo build --release -p bb84link-py
    python3 python/smoke_test.py
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        REPO / "target" / profile / "libbb84link_py.so"
        for profile in ("release", "debug")
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit(
            "extension not found; run `cargo build --release -p bb84link-py` first"
        )
    stage = Path(tempfile.mkdtemp(prefix="bb84link_py_"))
    shutil.copy2(built, stage / "bb84link_py.so")
    sys.path.insert(0, str(stage))
    import bb84link_py

    return bb84link_py


def approx(value, target, tol):
    assert abs(value - target) <= tol, f"{value} != {target} (tol {tol})"


def main():
    bb = load_module()
    print(f"loaded bb84link_py {bb.__version__}")

    # Photon budget arithmetic.
    mu = bb.photons_per_pulse(100e-12, 1581.0, 1e9)
    approx(mu, 0.7958938293285, 1e-9)
    approx(bb.attenuation_to_target(mu, 0.1), 9.0086, 1e-3)

    # Polarization projection.
    approx(bb.projection_probability(0.0, 0.0), 1.0, 1e-12)
    approx(bb.projection_probability(math.pi / 4, 0.0), 0.5, 1e-12)
    assert bb.state_of("HV", False) == "H"
    assert bb.state_of("DA", True) == "A"

    # Entropy bound and split planning.
    approx(bb.binary_entropy(0.5), 1.0, 1e-12)
    assert bb.secret_fraction(0.0) == 1.0
    assert bb.secret_fraction(0.1099) > 0.0
    assert bb.secret_fraction(0.1101) == 0.0
    assert bb.max_split(15.2, 0.5) == 16
    assert bb.max_split(15.2, 0.0) == 32

    # PRBS pattern: deterministic, balanced, correct period constant.
    a = bb.prbs_symbols(1, 4096)
    b = bb.prbs_symbols(1, 4096)
    assert a == b
    da_fraction = sum(1 for basis, _ in a if basis == "DA") / len(a)
    assert 0.45 < da_fraction < 0.55
    assert bb.PRBS15_SYMBOL_PERIOD == 32767
    try:
        bb.prbs_symbols(0, 16)
    except ValueError as err:
        assert "seed-error" in str(err)
    else:
        raise AssertionError("zero seed must be rejected")

    # Calibration to the reference anchors, then the analytic round trip.
    params = bb.LinkParams()
    fit = bb.calibrate(7600.0, 0.042, 15.2, 0.11, params)
    print(f"calibration: {fit!r}")
    assert 35.0 < fit.dark_eff_cps < 52.0
    calibrated = fit.apply(params)
    at_zero = calibrated.analytic_rates()
    approx(at_zero["r_sifted_bps"], 7600.0, 1e-3)
    approx(at_zero["qber"], 0.042, 1e-6)
    at_threshold = calibrated.with_ob(15.2).analytic_rates()
    approx(at_threshold["qber"], 0.11, 1e-6)
    approx(calibrated.threshold_budget(0.11), 15.2, 0.02)

    # A short Monte Carlo run through the full pipeline stays within a few
    # standard errors of the model.
    run = calibrated.with_pulses(2_000_000_000).with_seed(5)
    result = run.simulate_qber(prbs_seed=1, block_size_s=1.0)
    assert result["sync_offset"] == 0
    n = result["n_sifted"]
    rate_se = math.sqrt(n) / result["duration_s"]
    assert abs(result["raw_rate_bps"] - 7600.0) < 4 * rate_se, result
    q_se = math.sqrt(0.042 * 0.958 / n)
    assert abs(result["qber"] - 0.042) < 4 * q_se, result
    print(
        f"monte carlo: {result['raw_rate_bps']:.1f} b/s, "
        f"qber {result['qber']:.4f}, n={n}"
    )

    print("smoke test OK")


if __name__ == "__main__":
    main()
