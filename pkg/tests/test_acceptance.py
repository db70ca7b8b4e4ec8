"""Exit criteria, one reported line each (see the terminal summary)."""

import math
import os
import time

import mpmath
import numpy as np
import pytest
from scipy.stats import ks_2samp

from mimotc import (PointProcessSample, SystemParams, estimate_outage, find_lambda_star,
                    optimal_design, pout_bounds_no_csit, sir_cmsir,
                    sir_csit_bf, sir_no_csit_nearest, tc_bounds_no_csit,
                    wishart_eigen_moments)
from mimotc.channel import complex_gaussian
from mimotc.geometry import sample_interferers
from mimotc.montecarlo import (REPORT_TRIALS, SimOptions, rows_to_csv, stream_sweep_m,
                               simulate_sir, sweep)
from mimotc.receiver import bf_receive_matrix, draw_channels, zf_vectors_nearest

pytestmark = pytest.mark.acceptance


def _separated(hi_res, lo_res):
    """Upper end of the weaker result's interval lies below the stronger one's lower end."""
    return hi_res.capacity_ci[0] > lo_res.capacity_ci[1]


def test_c01_reciprocal_eigenvalue_window(record):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    misses, parts = [], []
    for N in (2, 4, 8, 16):
        mom = wishart_eigen_moments(N, 1, 100_000, rng)
        lo, hi = 0.97 / (4 * N), 1.03 / (3.5 * N)
        parts.append(f"N={N}: N*E{{1/g1}}={N * mom.mean_inv_gamma_k:.4f}")
        if not lo <= mom.mean_inv_gamma_k <= hi:
            misses.append(N)
    elapsed = time.perf_counter() - start
    ok = not misses and elapsed < 60
    record("C1 reciprocal eigenvalue in [0.97/(4N), 1.03/(3.5N)]", ok,
           f"{'; '.join(parts)}; window in N units [0.2425, 0.2943]; outside for N={misses}; "
           f"{elapsed:.1f}s")
    assert ok


def _sandwich_grid():
    for alpha in (3.0, 4.0):
        for N in range(8, 13):
            for k in (1, 2):
                for m in range(0, N - k + 1, k):
                    if m // k > alpha / 2 - 1:
                        yield N, k, m, alpha


def test_c02_bound_sandwich(record):
    start = time.perf_counter()
    T = 50_000
    failures, out_of_range, count = [], [], 0
    for N, k, m, alpha in _sandwich_grid():
        p = SystemParams(N=N, k=k, m=m, alpha=alpha)
        lam = find_lambda_star(p, 0.2, trials=T, seed=201, lambda0=0.1).lambda_star
        est = estimate_outage(p, lam, T, seed=202)
        b = pout_bounds_no_csit(p, lam)
        ci = est.ci95_half_width
        count += 1
        if not 0.05 <= est.p_hat <= 0.5:
            out_of_range.append((N, k, m, alpha))
        if not b.lower - 2 * ci <= est.p_hat <= b.upper + 2 * ci:
            failures.append(f"(N={N},k={k},m={m},a={alpha:g}: p={est.p_hat:.3f} "
                            f"ub={b.upper:.3f})")
    elapsed = time.perf_counter() - start
    ok = not failures and not out_of_range and elapsed < 600
    record("C2 outage bounds sandwich the simulation", ok,
           f"{count} points, {len(failures)} violations {failures}; "
           f"p_hat outside [0.05,0.5] at {out_of_range}; {elapsed:.0f}s")
    assert ok


def _capacity(N, k, m, alpha, trials=REPORT_TRIALS, seed=0, mode="no-csit", engine="auto"):
    p = SystemParams(N=N, k=k, m=m, alpha=alpha, mode=mode)
    return find_lambda_star(p, trials=trials, seed=seed, options=SimOptions(engine=engine))


def test_c03_capacity_decreasing_in_k(record):
    start = time.perf_counter()
    res = {k: _capacity(10, k, stream_sweep_m(10, k, 3), 3.0) for k in (1, 2, 5)}
    elapsed = time.perf_counter() - start
    ok = _separated(res[1], res[2]) and _separated(res[2], res[5]) and elapsed < 600
    detail = "; ".join(f"k={k} m={stream_sweep_m(10, k, 3)} C={r.capacity:.4f} "
                       f"CI=({r.capacity_ci[0]:.4f},{r.capacity_ci[1]:.4f})"
                       for k, r in res.items())
    record("C3 capacity strictly decreasing over k in {1,2,5}", ok, f"{detail}; {elapsed:.0f}s")
    assert ok


def test_c04_near_linear_scaling(record):
    start = time.perf_counter()
    c8 = _capacity(8, 1, math.floor(8 / 3), 3.0)
    c16 = _capacity(16, 1, math.floor(16 / 3), 3.0)
    half = _capacity(16, 8, 8, 3.0)
    mrc = _capacity(16, 1, 0, 3.0)
    elapsed = time.perf_counter() - start
    ratio = c16.capacity / c8.capacity
    ok = (ratio >= 1.6 and _separated(c16, half) and _separated(c16, mrc) and elapsed < 900)
    record("C4 near-linear scaling without CSIT", ok,
           f"C(16)/C(8)={ratio:.3f}; N=16: k=1 C={c16.capacity:.4f}, "
           f"(8,8) C={half.capacity:.4f}, (1,0) C={mrc.capacity:.4f}; {elapsed:.0f}s")
    assert ok


def test_c05_cmsir_dominance(record):
    rng = np.random.default_rng(501)
    p = SystemParams(N=8, k=1, m=4, mode="cmsir")
    violations = 0
    for _ in range(10_000):
        ppp = sample_interferers(0.4, 200, rng)
        ch = draw_channels(p, ppp.count, rng)
        if np.any(sir_cmsir(p, ppp, ch).per_stream_sir
                  < sir_no_csit_nearest(p, ppp, ch).per_stream_sir):
            violations += 1
    cm = _capacity(8, 1, 4, 3.0, trials=20_000, seed=5, mode="cmsir")
    ne = _capacity(8, 1, 4, 3.0, trials=20_000, seed=5, engine="full")
    ok = violations == 0 and cm.capacity_ci[1] >= ne.capacity_ci[0] and cm.capacity >= ne.capacity
    record("C5 CMSIR dominates nearest cancelation", ok,
           f"{violations} violations in 10^4 shared draws; C_cmsir={cm.capacity:.4f} "
           f"C_nearest={ne.capacity:.4f}")
    assert ok


def test_c06_csit_single_stream_best(record):
    res = {k: _capacity(8, k, None, 4.0, trials=10_000, seed=6, mode="csit") for k in (1, 2)}
    design = optimal_design(8, 4.0, "csit")
    ok = _separated(res[1], res[2]) and design == (1, 7)
    record("C6 CSIT capacity maximized at k=1", ok,
           f"C(k=1)={res[1].capacity:.4f} CI=({res[1].capacity_ci[0]:.4f},"
           f"{res[1].capacity_ci[1]:.4f}); C(k=2)={res[2].capacity:.4f} "
           f"CI=({res[2].capacity_ci[0]:.4f},{res[2].capacity_ci[1]:.4f}); design={design}")
    assert ok


def _within(x, want):
    se = x.std(ddof=1) / math.sqrt(x.size)
    return abs(x.mean() - want) <= 3 * se, f"{x.mean():.4f}±{se:.4f} vs {want}"


def test_c07_distributional_oracles(record):
    rng = np.random.default_rng(701)
    draws = 100_000
    checks = []
    for N, k, m in ((6, 1, 3), (8, 2, 4), (8, 2, 5)):
        p = SystemParams(N=N, k=k, m=m)
        c = p.cancel_count
        ppp = PointProcessSample(1.0, 10.0, np.arange(1.0, c + 2))
        s, rho = np.empty((draws, k)), np.empty((draws, k))
        for t in range(draws):
            out = sir_no_csit_nearest(p, ppp, draw_channels(p, c + 1, rng))
            s[t], rho[t] = out.signal_power, out.gains[:, c]
        checks.append((f"s({N},{k},{m})",) + _within(s.ravel(), N - k * c - k + 1))
        checks.append((f"rho({N},{k},{m})",) + _within(rho.ravel(), k))
    for N, k in ((4, 2), (6, 3), (8, 2)):
        p = SystemParams(N=N, k=k, mode="csit")
        c = p.cancel_count
        ppp = PointProcessSample(1.0, 10.0, np.arange(1.0, c + 2))
        mu = np.empty((draws, k))
        for t in range(draws):
            mu[t] = sir_csit_bf(p, ppp, draw_channels(p, c + 1, rng)).gains[:, c]
        checks.append((f"mu({N},{k})",) + _within(mu.ravel(), k))
    for N, k, m in ((6, 1, 3), (8, 2, 4)):
        p = SystemParams(N=N, k=k, m=m)
        fast = simulate_sir(p, 0.2, 10_000, 711, SimOptions(engine="fast"))[:, 0]
        full = simulate_sir(p, 0.2, 10_000, 712, SimOptions(engine="full"))[:, 0]
        pv = ks_2samp(fast, full).pvalue
        checks.append((f"KS({N},{k},{m})", pv > 0.01, f"p={pv:.3f}"))
    bad = [name for name, ok, _ in checks if not ok]
    record("C7 distributional oracles", not bad,
           "; ".join(f"{n} {d}" for n, _, d in checks) + f"; failing: {bad}")
    assert not bad


def test_c08_exact_transcription(record):
    mpmath.mp.dps = 50
    got = [
        pout_bounds_no_csit(SystemParams(N=8, k=1, m=4, alpha=4), 1 / math.pi).upper,
        pout_bounds_no_csit(SystemParams(N=8, k=2, m=6, alpha=4), 1 / math.pi).upper,
        tc_bounds_no_csit(SystemParams(N=8, k=1, m=4, alpha=4, epsilon=0.1)).lower,
    ]
    want = [mpmath.mpf(1) / 15, 1 - mpmath.exp(mpmath.mpf(-1) / 2),
            mpmath.mpf("0.9") / mpmath.pi * mpmath.sqrt(mpmath.mpf("0.3") * 5)]
    rel = [float(abs(mpmath.mpf(g) - w) / w) for g, w in zip(got, want)]
    ok = all(r <= 1e-10 for r in rel)
    record("C8 hand-computed bound values to 10 digits", ok,
           "; ".join(f"{g:.12g} (rel err {r:.1e})" for g, r in zip(got, rel)))
    assert ok


def test_c09_zf_bf_algebra(record):
    rng = np.random.default_rng(901)
    worst_zf = worst_bf = 0.0
    for _ in range(1000):
        N = int(rng.integers(2, 9))
        k = int(rng.integers(1, N + 1))
        if rng.random() < 0.5 and k < N:
            m = int(rng.integers(0, N - k + 1))
            p = SystemParams(N=N, k=k, m=m)
            c = p.cancel_count
            H00 = complex_gaussian((N, k), rng)
            Hint = complex_gaussian((c + 2, N, k), rng)
            Q = zf_vectors_nearest(H00, Hint, p)
            for l in range(k):
                worst_zf = max(worst_zf, abs(np.linalg.norm(Q[l]) - 1),
                               np.max(np.abs(np.delete(Q[l] @ H00, l)), initial=0.0))
                for n in range(c):
                    worst_zf = max(worst_zf, np.max(np.abs(Q[l] @ Hint[n])))
        else:
            p = SystemParams(N=N, k=k, mode="csit")
            c = p.cancel_count
            ch = draw_channels(p, c + 2, rng)
            A = bf_receive_matrix(ch, c, k)
            dec = ch.own_decomposition
            worst_bf = max(worst_bf, np.max(np.abs(A @ dec.U_k @ dec.D_k - dec.D_k)))
            for n in range(c):
                worst_bf = max(worst_bf, np.max(np.abs(A @ ch.interferers[n])))
    ok = worst_zf <= 1e-9 and worst_bf <= 1e-9
    record("C9 ZF/BF residuals <= 1e-9 over 1000 configurations", ok,
           f"worst ZF residual {worst_zf:.2e}; worst BF residual {worst_bf:.2e}")
    assert ok


def test_c10_determinism(record):
    points = [dict(N=10, k=k, m=stream_sweep_m(10, k, 3), alpha=3, trials=REPORT_TRIALS, seed=0)
              for k in (1, 2, 5)]
    workers = max(os.cpu_count() or 1, 4)
    one = rows_to_csv(sweep(points, threads=1)).encode()
    many = rows_to_csv(sweep(points, threads=workers)).encode()
    ok = one == many
    record("C10 byte-identical CSV at 1 and max workers", ok,
           f"1 vs {workers} threads, {len(one)} bytes, identical={ok}")
    assert ok
