import math

import numpy as np
import pytest
from scipy.stats import norm

from volterra_greeks.greeks import (
    GREEK_KINDS,
    GreekEstimate,
    NumericalFailureError,
    OptionSpec,
    converge,
    estimate,
    estimate_many,
    payoff,
)
from volterra_greeks.kernel import KernelSpec
from volterra_greeks.models import (
    AlphaRFSV,
    MarketSpec,
    MixedAlphaRFSV,
    SteinStein,
    UnsupportedError,
)
from volterra_greeks.oracles import bs_price_greeks
from volterra_greeks.paths import TimeGrid

# degenerate constant-vol setting: the weights are exact, so the only
# error is Monte-Carlo noise
BS_MODEL = AlphaRFSV(v0=0.2, xi=0.0, alpha=1.0, rho=0.0, kernel=KernelSpec(H=0.14, eps=1e-6))
BS_MKT = MarketSpec(s0=100.0, r=0.0)
OPT = OptionSpec(strike=100.0, maturity=1.0)
GRID = TimeGrid(T=1.0, n=64)

FIG_MODEL = AlphaRFSV(v0=0.62, xi=0.21, alpha=1.0, rho=-0.05, kernel=KernelSpec(H=0.14, eps=1e-6))
FIG_MKT = MarketSpec(s0=100.0, r=0.05)


def _z(est: GreekEstimate, target: float) -> float:
    return abs(est.value - target) / est.stderr


def test_payoff_values():
    assert payoff(OptionSpec(100.0, 1.0, "call"), 110.0) == 10.0
    assert payoff(OptionSpec(100.0, 1.0, "put"), 110.0) == 0.0
    assert payoff(OptionSpec(100.0, 1.0, "put"), 90.0) == 10.0
    assert payoff(OptionSpec(100.0, 1.0, "digital_call"), 100.0) == 0.0
    assert payoff(OptionSpec(100.0, 1.0, "digital_call"), 100.0000001) == 1.0
    out = payoff(OptionSpec(100.0, 1.0, "call"), np.array([90.0, 150.0]))
    assert np.array_equal(out, [0.0, 50.0])


def test_option_validation():
    with pytest.raises(ValueError):
        OptionSpec(strike=0.0, maturity=1.0)
    with pytest.raises(ValueError):
        OptionSpec(strike=100.0, maturity=-1.0)
    with pytest.raises(ValueError):
        OptionSpec(strike=100.0, maturity=1.0, payoff="lookback")


def test_run_validation():
    with pytest.raises(ValueError):
        estimate("delta", BS_MODEL, BS_MKT, OptionSpec(100.0, 2.0), GRID, 100, seed=0)
    with pytest.raises(ValueError):
        estimate("delta", BS_MODEL, BS_MKT, OPT, GRID, 1, seed=0)
    with pytest.raises(ValueError):
        estimate("delta", BS_MODEL, BS_MKT, OPT, GRID, 100, seed=0, confidence=1.0)
    with pytest.raises(ValueError):
        estimate("skew", BS_MODEL, BS_MKT, OPT, GRID, 100, seed=0)
    with pytest.raises(ValueError):
        estimate("delta", BS_MODEL, BS_MKT, OPT, GRID, 100, seed=0, variant="derived")
    with pytest.raises(ValueError):
        estimate("gamma", BS_MODEL, BS_MKT, OPT, GRID, 100, seed=0, variant="typo")


def test_estimate_interval_shape():
    est = estimate("price", BS_MODEL, BS_MKT, OPT, GRID, 5_000, seed=3, confidence=0.95)
    assert est.kind == "price"
    assert est.n_paths == 5_000 and est.n_discarded == 0
    assert est.ci_low <= est.value <= est.ci_high
    half = norm.ppf(0.975) * est.stderr
    assert est.ci_high - est.value == pytest.approx(half, rel=1e-12)
    assert est.value - est.ci_low == pytest.approx(half, rel=1e-12)


def test_bs_degenerate_battery():
    ref = bs_price_greeks(100.0, 100.0, 1.0, 0.0, 0.2)
    tasks = ["price", "delta", "vega", ("gamma", "derived"), ("rho", "derived")]
    ests = estimate_many(tasks, BS_MODEL, BS_MKT, OPT, GRID, 30_000, seed=101)
    targets = {"price": ref.price, "delta": ref.delta, "vega": ref.vega,
               "gamma": ref.gamma, "rho": ref.rho}
    for est in ests:
        assert _z(est, targets[est.kind]) < 3.0, est
        assert est.n_discarded == 0


def test_delta_matches_standard_normal_cdf():
    est = estimate("delta", BS_MODEL, BS_MKT, OPT, GRID, 30_000, seed=5)
    assert _z(est, norm.cdf(0.1)) < 3.0
    assert est.value == pytest.approx(0.5398, abs=3.5 * est.stderr + 1e-4)


def test_literal_variants_fail_bs_oracle_where_derived_pass():
    # the literal gamma and rho weight transcriptions are biased; the
    # re-derived ones are not.  r > 0 separates them sharply.
    mkt = MarketSpec(s0=100.0, r=0.05)
    ref = bs_price_greeks(100.0, 100.0, 1.0, 0.05, 0.2)
    ests = estimate_many(
        [("gamma", "literal"), ("gamma", "derived"), ("rho", "literal"), ("rho", "derived")],
        BS_MODEL, mkt, OPT, GRID, 50_000, seed=23,
    )
    by = {(e.kind, e.variant): e for e in ests}
    assert _z(by[("gamma", "derived")], ref.gamma) < 3.0
    assert _z(by[("rho", "derived")], ref.rho) < 3.0
    assert _z(by[("gamma", "literal")], ref.gamma) > 5.0
    assert _z(by[("rho", "literal")], ref.rho) > 50.0


def test_digital_delta():
    opt = OptionSpec(100.0, 1.0, "digital_call")
    ref = bs_price_greeks(100.0, 100.0, 1.0, 0.0, 0.2, "digital_call")
    est = estimate("delta", BS_MODEL, BS_MKT, opt, GRID, 30_000, seed=31)
    assert _z(est, ref.delta) < 3.0


def test_put_call_delta_difference():
    # common paths: Delta_call - Delta_put estimates d/dS0 of the forward = 1
    c, p = estimate_many(
        [("delta", None)], BS_MODEL, BS_MKT, OPT, GRID, 30_000, seed=41
    )[0], None
    ests = estimate_many(["delta"], BS_MODEL, BS_MKT, OptionSpec(100.0, 1.0, "put"), GRID, 30_000, seed=41)
    p = ests[0]
    diff = c.value - p.value
    se = math.hypot(c.stderr, p.stderr)
    assert abs(diff - 1.0) < 3 * se


def test_deterministic_and_shared_paths():
    a = estimate("delta", FIG_MODEL, FIG_MKT, OPT, GRID, 4_000, seed=7)
    b = estimate("delta", FIG_MODEL, FIG_MKT, OPT, GRID, 4_000, seed=7)
    assert a == b
    many = estimate_many(["price", "delta", "vega"], FIG_MODEL, FIG_MKT, OPT, GRID, 4_000, seed=7)
    assert many[1] == a
    c = estimate("delta", FIG_MODEL, FIG_MKT, OPT, GRID, 4_000, seed=8)
    assert c.value != a.value


def test_workers_do_not_change_results():
    a = estimate("delta", FIG_MODEL, FIG_MKT, OPT, GRID, 20_000, seed=13, workers=1)
    b = estimate("delta", FIG_MODEL, FIG_MKT, OPT, GRID, 20_000, seed=13, workers=3)
    assert a == b


def test_converge_nested_and_consistent():
    trace = converge("delta", FIG_MODEL, FIG_MKT, OPT, GRID, [2_000, 8_000], seed=19)
    assert [e.n_paths for e in trace] == [2_000, 8_000]
    head = estimate("delta", FIG_MODEL, FIG_MKT, OPT, GRID, 2_000, seed=19)
    tail = estimate("delta", FIG_MODEL, FIG_MKT, OPT, GRID, 8_000, seed=19)
    assert trace[0] == head
    assert trace[1] == tail
    single = converge("delta", FIG_MODEL, FIG_MKT, OPT, GRID, [2_000], seed=19)
    assert single == [head]
    with pytest.raises(ValueError):
        converge("delta", FIG_MODEL, FIG_MKT, OPT, GRID, [4_000, 4_000], seed=19)
    with pytest.raises(ValueError):
        converge("delta", FIG_MODEL, FIG_MKT, OPT, GRID, [], seed=19)


def test_ci_halves_from_n_to_4n():
    for model, mkt in ((BS_MODEL, BS_MKT), (FIG_MODEL, FIG_MKT)):
        tr = converge("delta", model, mkt, OPT, GRID, [5_000, 20_000], seed=29)
        ratio = (tr[0].ci_high - tr[0].ci_low) / (tr[1].ci_high - tr[1].ci_low)
        assert 1.6 <= ratio <= 2.4


def test_stderr_scaling_stable():
    vals = []
    for n in (10_000, 40_000, 160_000):
        est = estimate("delta", BS_MODEL, BS_MKT, OPT, GRID, n, seed=37)
        vals.append(est.stderr * math.sqrt(n))
    mid = sorted(vals)[1]
    assert max(vals) <= 1.2 * mid and min(vals) >= 0.8 * mid


def test_no_paths_discarded_at_standard_parameters():
    est = estimate("delta", FIG_MODEL, FIG_MKT, OPT, GRID, 20_000, seed=43)
    assert est.n_discarded == 0


def test_degenerate_model_raises_numerical_failure():
    broken = AlphaRFSV(v0=1e-13, xi=0.0, alpha=1.0, rho=0.0, kernel=KernelSpec(H=0.14, eps=1e-6))
    with pytest.raises(NumericalFailureError):
        estimate("delta", broken, BS_MKT, OPT, GRID, 100, seed=0)


def test_unsupported_kind_model_pairs():
    ss = SteinStein(v0=0.3, kappa=1.5, theta=0.25, nu=0.4, rho=-0.5)
    with pytest.raises(UnsupportedError):
        estimate("vega", ss, BS_MKT, OPT, GRID, 100, seed=0)
    with pytest.raises(UnsupportedError):
        estimate("hsens", ss, BS_MKT, OPT, GRID, 100, seed=0)
    mixed = MixedAlphaRFSV(
        v0=0.4, xi_h=0.2, xi_hp=0.3, alpha=0.7, rho=-0.5,
        kernel_h=KernelSpec(H=0.2, eps=1e-4), kernel_hp=KernelSpec(H=0.7, eps=0.0),
    )
    with pytest.raises(UnsupportedError):
        estimate("gamma", mixed, BS_MKT, OPT, GRID, 100, seed=0, variant="derived")
    # the literal transcription needs only the delta weight, so it runs
    est = estimate("gamma", mixed, BS_MKT, OPT, GRID, 500, seed=0, variant="literal")
    assert math.isfinite(est.value)


def test_all_kinds_run_on_rough_model():
    ests = estimate_many(
        ["price", "delta", "gamma", "rho", "vega", "hsens"],
        FIG_MODEL, FIG_MKT, OPT, GRID, 2_000, seed=53,
    )
    assert [e.kind for e in ests] == list(GREEK_KINDS)
    for e in ests:
        assert math.isfinite(e.value) and e.stderr > 0.0
    assert ests[2].variant == "derived" and ests[3].variant == "derived"
    assert ests[0].variant is None
