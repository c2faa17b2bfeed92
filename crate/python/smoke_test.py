#!/usr/bin/env python3
"""Smoke test for the cbsim extension module.

Build the module first (either profile works):

    cargo build -p cbsim-py            # or --release

then run this script from anywhere:

    python3 python/smoke_test.py
"""
import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_cbsim():
    candidates = [
        REPO / "target" / "release" / "libcbsim.so",
        REPO / "target" / "debug" / "libcbsim.so",
    ]
    built = [p for p in candidates if p.exists()]
    if not built:
        sys.exit("libcbsim.so not found; run `cargo build -p cbsim-py` first")
    newest = max(built, key=lambda p: p.stat().st_mtime)
    stage = Path(tempfile.mkdtemp(prefix="cbsim-"))
    shutil.copy2(newest, stage / "cbsim.so")
    sys.path.insert(0, str(stage))
    import cbsim  # noqa: E402

    print(f"imported cbsim {cbsim.__version__} from {newest}")
    return cbsim


def main():
    cbsim = import_cbsim()

    # Parameter round trip and validation.
    params = cbsim.ModelParams(
        alpha_p=0.25, alpha_e=0.2, alpha_b=0.25,
        beta_p=0.1, beta_e=0.15, delta_b=0.08,
        kappa_e=0.3, kappa_b=0.3, sigma=0.01,
    )
    values = params.to_list()
    assert len(values) == 12 and values[0] == 0.25
    assert cbsim.ModelParams.names()[0] == "alpha_p"
    assert cbsim.ModelParams.from_list(values).to_list() == values
    try:
        cbsim.ModelParams(alpha_p=-1, alpha_e=0, alpha_b=0,
                          beta_p=0, beta_e=0, delta_b=0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative rate should be rejected")

    # Network constructors and topology.
    net = cbsim.SocialNetwork.watts_strogatz(40, 4, 0.1, seed=9)
    assert net.n == 40
    assert net.edge_count == 80  # n * k / 2
    nbrs = net.neighbours(0)
    assert nbrs == sorted(nbrs) and all(0 <= j < 40 for j in nbrs)
    assert all(i < j for i, j in net.edges())
    ring = cbsim.SocialNetwork.watts_strogatz(10, 4, 0.0, seed=1)
    assert ring.neighbours(0) == [1, 2, 8, 9]

    # Deterministic, bounded simulation.
    days = 60
    signal = [
        0.5 * math.exp(-((t - 15) / 6) ** 2) + math.exp(-((t - 40) / 8) ** 2)
        for t in range(days)
    ]
    signal = cbsim.min_max_normalize(signal)
    run_a = cbsim.simulate(params, net, signal, seed=7)
    run_b = cbsim.simulate(params, net, signal, seed=7)
    assert run_a == run_b, "same seed must reproduce the run"
    run_c = cbsim.simulate(params, net, signal, seed=8)
    assert run_a["mean_e"] != run_c["mean_e"], "different seed should differ"
    for key in ("mean_p", "mean_e", "mean_b", "behaviour", "emotion", "perception"):
        assert len(run_a[key]) == days
        assert all(0.0 <= v <= 1.0 for v in run_a[key])

    # Ensemble bands are ordered and bracket the member runs.
    draws = [params.to_list(), params.to_list(), params.to_list()]
    bands = cbsim.run_ensemble(draws, net, signal, seed=100)
    for channel in ("behaviour", "emotion", "perception", "behaviour_raw"):
        lo, med, hi = bands[channel]["lo"], bands[channel]["median"], bands[channel]["hi"]
        assert all(a <= b <= c for a, b, c in zip(lo, med, hi))

    # Metrics.
    xs = [float(i) for i in range(10)]
    r, p = cbsim.pearson(xs, [2.0 * v + 1.0 for v in xs])
    assert abs(r - 1.0) < 1e-12 and p < 1e-12
    r, _ = cbsim.pearson(xs, [-v for v in xs])
    assert abs(r + 1.0) < 1e-12
    assert cbsim.distance([0.0, 0.0], [3.0, 4.0]) == math.sqrt(12.5)
    assert cbsim.coverage_fraction([0.5, 0.9], [0.0, 0.0], [1.0, 0.5]) == 0.5

    # A tiny end-to-end calibration: fit data the model itself generated and
    # check the predictive band mostly covers it.
    small_net = cbsim.SocialNetwork.watts_strogatz(16, 4, 0.1, seed=3)
    observed = cbsim.simulate(params, small_net, signal, seed=123)["behaviour"]
    post = cbsim.abc_smc(
        observed, small_net, signal, seed=42,
        pop_size=40, stages=2, keep_quantile=0.5,
        prior=[
            (0.0, 0.5), (0.0, 0.5), (0.0, 0.5),
            (0.0, 0.5), (0.0, 0.5), (0.0, 0.5),
            (0.0, 0.5), (0.0, 0.5), (0.01, 0.01),
            (0.01, 0.01), (0.01, 0.01), (0.01, 0.01),
        ],
    )
    assert len(post) == 40
    assert len(post.epsilons) == 2 and post.epsilons[1] <= post.epsilons[0]
    assert all(len(d) == 12 for d in post.draws())
    assert abs(sum(post.weights()) - 1.0) < 1e-9
    pred = post.predictive(small_net, signal, seed=42)
    covered = cbsim.coverage_fraction(
        observed, pred["behaviour"]["lo"], pred["behaviour"]["hi"]
    )
    assert covered >= 0.7, f"predictive band covers only {covered:.2f}"

    print(f"smoke test passed (predictive coverage {covered:.2f})")


if __name__ == "__main__":
    main()
