import io
import math

import numpy as np
import pytest

from mimotc import (BracketNotFoundError, OutageCurve, ParameterError, SystemParams,
                    estimate_outage, find_lambda_star, pout_bounds, simulate_sir, sweep)
from mimotc.montecarlo import (CSV_COLUMNS, SimOptions, ci95, format_number, rows_to_csv,
                               stream_sweep_m)


def test_ci95_formula():
    assert ci95(0.5, 100) == pytest.approx(1.96 * 0.05)
    assert ci95(0.0, 1000) == pytest.approx(1.96 / 1000)


def test_rejects_few_trials():
    with pytest.raises(ParameterError):
        estimate_outage(SystemParams(N=2), 0.1, trials=99)


def test_beta_zero_never_outage():
    est = estimate_outage(SystemParams(N=4, m=2, beta=0.0), 1.0, trials=2000, seed=1)
    assert est.p_hat == 0.0


@pytest.mark.parametrize("mode, engine", [("no-csit", "fast"), ("no-csit", "full"),
                                          ("cmsir", "full"), ("csit", "full")])
def test_thread_count_independent(mode, engine):
    p = SystemParams(N=4, k=2, m=2 if mode != "csit" else None, mode=mode)
    T = 1300
    a = simulate_sir(p, 0.1, T, 9, SimOptions(engine=engine, threads=1))
    b = simulate_sir(p, 0.1, T, 9, SimOptions(engine=engine, threads=4))
    np.testing.assert_array_equal(a, b)
    assert a.shape == (T, 2)


def test_seed_changes_result():
    p = SystemParams(N=4, m=2)
    a = simulate_sir(p, 0.1, 1000, 1)
    b = simulate_sir(p, 0.1, 1000, 2)
    assert not np.array_equal(a, b)


def test_curve_equals_direct_estimate():
    p = SystemParams(N=6, k=2, m=2, alpha=3.5)
    curve = OutageCurve.simulate(p, 5000, 4, lam_ref=0.05)
    for lam in (0.01, 0.05, 0.3, 2.0):
        direct = estimate_outage(p, lam, 5000, 4)
        assert curve.pout(lam) == direct.p_hat
        assert curve.estimate(lam).per_stream_p == direct.per_stream_p


def test_monotone_in_lambda():
    p = SystemParams(N=4, k=1, m=0)
    prev = None
    for lam in (0.01, 0.02, 0.04, 0.08, 0.16, 0.32, 100.0):
        est = estimate_outage(p, lam, 5000, 3)
        if prev is not None:
            assert est.p_hat >= prev.p_hat - 2 * prev.ci95_half_width
        prev = est
    assert prev.p_hat > 0.99


def _naive_single_antenna(lam, alpha, beta, d, trials, seed, mean_nodes=200):
    """Independent tally: rejection-sampled disk, Rayleigh fading, matched filter."""
    rng = np.random.default_rng(seed)
    radius = math.sqrt(mean_nodes / (math.pi * lam))
    outages = 0
    for _ in range(trials):
        n = rng.poisson(mean_nodes)
        pts = np.empty((0, 2))
        while len(pts) < n:
            cand = rng.uniform(-radius, radius, size=(2 * n + 8, 2))
            pts = np.vstack([pts, cand[np.hypot(cand[:, 0], cand[:, 1]) <= radius]])
        r = np.hypot(pts[:n, 0], pts[:n, 1])
        h = (rng.normal(size=n + 1) ** 2 + rng.normal(size=n + 1) ** 2) / 2
        interference = np.sum(h[1:] * r ** -alpha)
        if interference > 0 and d ** -alpha * h[0] / interference <= beta:
            outages += 1
    return outages / trials


def test_single_antenna_matches_naive_oracle():
    p = SystemParams(N=1, k=1, m=0, alpha=3)
    lam, T = 0.05, 20_000
    est = estimate_outage(p, lam, T, seed=21)
    ref = _naive_single_antenna(lam, 3, 1.0, 1.0, T, seed=22)
    se = math.sqrt(est.p_hat * (1 - est.p_hat) / T + ref * (1 - ref) / T)
    assert abs(est.p_hat - ref) <= 3 * se


def test_single_antenna_closed_form_check():
    # infinite-plane Rayleigh outage 1 - exp(-lam pi d^2 beta^(2/a) Gamma(1+2/a)Gamma(1-2/a))
    lam, a = 0.02, 4.0
    want = 1 - math.exp(-lam * math.pi * math.gamma(1 + 2 / a) * math.gamma(1 - 2 / a))
    est = estimate_outage(SystemParams(N=1, alpha=a), lam, 50_000, seed=5)
    assert abs(est.p_hat - want) <= 3 * est.ci95_half_width / 1.96 + 0.005


def test_find_lambda_star_basics():
    p = SystemParams(N=4, k=1, m=2, alpha=3)
    res = find_lambda_star(p, trials=10_000, seed=3)
    lo, hi = res.bracket
    assert hi / lo <= 1 + 1e-3 and lo <= res.lambda_star <= hi
    assert res.capacity == pytest.approx(1 * res.lambda_star * 0.9 * 1.0, rel=1e-15)
    # the midpoint may sit just above the crossing
    assert abs(res.achieved_pout - 0.1) <= res.achieved_ci95
    assert res.capacity_ci[0] <= res.capacity <= res.capacity_ci[1]


def test_lambda_star_ignores_rate():
    p = SystemParams(N=4, k=2, m=2)
    a = find_lambda_star(p, trials=5000, seed=1)
    b = find_lambda_star(p.with_(R=2.0), trials=5000, seed=1)
    assert a.lambda_star == b.lambda_star
    assert b.capacity == pytest.approx(2 * a.capacity, rel=1e-15)


def test_lambda_star_grows_with_epsilon():
    p = SystemParams(N=4, k=1, m=2)
    lams = [find_lambda_star(p, eps, trials=5000, seed=7).lambda_star
            for eps in (0.05, 0.1, 0.2)]
    assert lams[0] <= lams[1] <= lams[2]


def test_lambda_star_reproducible_across_seeds():
    p = SystemParams(N=2, k=1, m=1, alpha=4)
    a = find_lambda_star(p, 0.1, trials=100_000, seed=1).lambda_star
    b = find_lambda_star(p, 0.1, trials=100_000, seed=2).lambda_star
    assert abs(a - b) / a <= 0.02


@pytest.mark.parametrize("kwargs", [dict(N=4, k=1, m=2), dict(N=8, k=2, m=4, alpha=4)])
def test_lambda_star_consistency(kwargs):
    p = SystemParams(**kwargs)
    res = find_lambda_star(p, trials=20_000, seed=10)
    est = estimate_outage(p, res.lambda_star, 20_000, seed=99)
    assert abs(est.p_hat - 0.1) <= 3 * est.ci95_half_width


def test_bracket_not_found():
    with pytest.raises(BracketNotFoundError):
        find_lambda_star(SystemParams(N=1, beta=1e30), trials=500, seed=0)


def test_bracket_from_above():
    p = SystemParams(N=4, k=1, m=2)
    a = find_lambda_star(p, trials=5000, seed=2, lambda0=50.0)
    b = find_lambda_star(p, trials=5000, seed=2, lambda0=1e-4)
    assert a.lambda_star == pytest.approx(b.lambda_star, rel=3e-3)


def test_csit_worst_stream():
    p = SystemParams(N=4, k=2, mode="csit")
    est = estimate_outage(p, 0.05, 2000, seed=6)
    assert est.p_hat == est.per_stream_p[1]
    assert est.per_stream_p[1] >= est.per_stream_p[0] - 2 * est.per_stream_ci[0]


@pytest.mark.parametrize("N, k, m, alpha", [(10, 1, 5, 3.0), (10, 2, 4, 3.0),
                                            (9, 1, 4, 4.0), (8, 1, 7, 4.0)])
def test_sandwich(N, k, m, alpha):
    p = SystemParams(N=N, k=k, m=m, alpha=alpha)
    for target in (0.1, 0.3):
        lam = find_lambda_star(p, target, trials=20_000, seed=31, lambda0=0.1).lambda_star
        est = estimate_outage(p, lam, 20_000, seed=32)
        b = pout_bounds(p, lam)
        ci = est.ci95_half_width
        assert b.lower - 2 * ci <= est.p_hat <= b.upper + 2 * ci, (
            f"p_hat={est.p_hat:.4f} outside [{b.lower:.4f}, {b.upper:.4f}] at lambda={lam:.4g}")


def test_stream_sweep_m():
    assert [stream_sweep_m(10, k, 3) for k in (1, 2, 3, 4, 5)] == [3, 3, 2, 1, 1]


def test_format_number():
    assert format_number(0.1234567890123456) == "0.123456789012"
    assert format_number(1e-20) == "1e-20"
    assert format_number(True) == "true"
    assert format_number(7) == "7"
    assert format_number(float("inf")) == "inf"
    assert format_number(None) == ""


def test_empty_sweep_is_header_only():
    buf = io.StringIO()
    assert sweep([], buf) == []
    assert buf.getvalue() == ",".join(CSV_COLUMNS) + "\n"


def test_sweep_isolates_errors(tmp_path):
    points = [dict(N=4, k=1, m=2, trials=2000, seed=1),
              dict(N=3, k=4, trials=2000),
              dict(N=4, k=2, m=2, lam=3),
              dict(N=4, k=1, m=2, **{"lambda": 0.05}, trials=1000)]
    out = tmp_path / "s.csv"
    rows = sweep(points, out)
    text = out.read_text().splitlines()
    assert text[0] == ",".join(CSV_COLUMNS)
    assert len(text) == 5
    assert rows[0]["error"] is None and rows[0]["tc"] > 0
    assert "ParameterError" in rows[1]["error"]
    assert "unknown keys" in rows[2]["error"]
    assert rows[3]["error"] is None and rows[3]["lambda"] == 0.05 and rows[3]["tc"] is None


def test_sweep_bounds_columns_only_when_valid():
    rows = sweep([dict(N=4, k=1, m=0, trials=1000), dict(N=4, k=1, m=2, trials=1000)])
    assert rows[0]["valid"] is False and rows[0]["pout_ub"] is None
    assert rows[1]["valid"] is True and rows[1]["pout_ub"] is not None


def test_sweep_capacity_decreasing_in_k():
    points = [dict(N=10, k=k, m=stream_sweep_m(10, k, 3), alpha=3, trials=20_000, seed=5)
              for k in range(1, 6)]
    rows = sweep(points)
    tc = [r["tc"] for r in rows]
    assert all(a > b for a, b in zip(tc, tc[1:])), tc


def test_sweep_csv_thread_independent():
    points = [dict(N=6, k=k, m=stream_sweep_m(6, k, 3), trials=3000, seed=2) for k in (1, 2, 3)]
    assert rows_to_csv(sweep(points, threads=1)) == rows_to_csv(sweep(points, threads=4))
