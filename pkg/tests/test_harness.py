import math

import numpy as np
import pytest

from subspace_est import constraints, harness, models
from subspace_est.errors import DegenerateInput, DimensionMismatch
from subspace_est.estimators import EstimatorConfig
from subspace_est.geometry import SpectrumSpec, orthonormalize
from subspace_est.harness import (PhaseTransitionFit, RiskEstimate, SweepRow,
                                  detect_phase_transition, fit_rate,
                                  monte_carlo_risk, read_sweep_csv, run_trial,
                                  sweep, theory_rate, write_sweep_csv)


def _wigner_model(p=8, t=6.0, sigma=1.0, seed=0, r=1):
    return models.ModelSpec("wigner", r, SpectrumSpec.flat(t, r), sigma,
                            seed=seed, p=p)


def _spectral():
    return EstimatorConfig(method="spectral")


def test_risk_estimate_validation():
    RiskEstimate(0.3, 0.01, 10, "abc", 0)
    with pytest.raises(ValueError):
        RiskEstimate(0.3, 0.01, 1, "abc", 0)
    with pytest.raises(ValueError):
        RiskEstimate(-0.1, 0.01, 10, "abc", 0)


def test_run_trial_noiseless_bound_determinism():
    model = _wigner_model(sigma=1e-12)
    cset = constraints.unconstrained(8, 1)
    assert run_trial(model, cset, _spectral(), 0) <= 1e-6
    noisy = _wigner_model(t=0.5, sigma=2.0)
    vals = [run_trial(noisy, cset, _spectral(), i) for i in range(20)]
    assert all(v <= math.sqrt(2.0) for v in vals)
    again = [run_trial(noisy, cset, _spectral(), i) for i in range(20)]
    assert vals == again


def test_monte_carlo_risk_aggregation_matches_trials():
    model = _wigner_model(t=3.0)
    cset = constraints.unconstrained(8, 1)
    est = monte_carlo_risk(model, cset, _spectral(), trials=16)
    vals = np.array([run_trial(model, cset, _spectral(), i) for i in range(16)])
    assert est.mean_distance == np.mean(vals)
    assert est.stderr == np.std(vals, ddof=1) / math.sqrt(16)
    assert est.trials == 16
    assert est.seed == model.seed
    # first half of a doubled run is the same stream
    half = monte_carlo_risk(model, cset, _spectral(), trials=8)
    assert half.mean_distance == np.mean(vals[:8])


def test_monte_carlo_risk_threads_match_serial():
    model = _wigner_model(t=2.0, seed=5)
    cset = constraints.unconstrained(8, 1)
    serial = monte_carlo_risk(model, cset, _spectral(), trials=12, threads=1)
    parallel = monte_carlo_risk(model, cset, _spectral(), trials=12, threads=4)
    assert serial.mean_distance == parallel.mean_distance
    assert serial.stderr == parallel.stderr


def test_monte_carlo_risk_stderr_bound():
    model = _wigner_model(p=6, t=1.0, sigma=1.5)
    cset = constraints.unconstrained(6, 1)
    est = monte_carlo_risk(model, cset, _spectral(), trials=10000)
    # a variable bounded by sqrt(2r) keeps stderr under 0.05 sqrt(2r) here
    assert est.stderr <= 0.05 * math.sqrt(2.0)


def test_spec_digest_tracks_inputs():
    model = _wigner_model()
    cset = constraints.unconstrained(8, 1)
    a = monte_carlo_risk(model, cset, _spectral(), trials=2).spec_digest
    b = monte_carlo_risk(model, cset, EstimatorConfig(method="spectral", tol=1e-6),
                         trials=2).spec_digest
    c = monte_carlo_risk(model, constraints.nonneg(8, 1), _spectral(),
                         trials=2).spec_digest
    assert a != b and a != c
    again = monte_carlo_risk(model, cset, _spectral(), trials=2).spec_digest
    assert a == again


def test_theory_rate_values():
    # frozen from the closed-form rate expressions, evaluated independently
    den = models.ModelSpec("denoising", 2, SpectrumSpec.flat(60.0, 2), 1.0,
                           seed=0, p1=200, p2=100)
    assert theory_rate(den, constraints.sparse(200, 2, 10)) == \
        pytest.approx(0.16023784407961264, rel=1e-12)
    wis = models.ModelSpec("wishart", 1, SpectrumSpec.flat(5.0, 1), 1.0,
                           seed=0, n=200, p=50)
    assert theory_rate(wis, constraints.nonneg(50, 1)) == \
        pytest.approx(0.24494897427831777, rel=1e-12)
    basis = orthonormalize(np.random.default_rng(0).standard_normal((40, 6)))
    wig = models.ModelSpec("wigner", 2, SpectrumSpec.flat(8.0, 2), 0.5,
                           seed=0, p=40)
    assert theory_rate(wig, constraints.subspace(basis, 2)) == \
        pytest.approx(0.15309310892394862, rel=1e-12)
    clu = models.ModelSpec("clustering", 1, SpectrumSpec.flat(30.0, 1), 1.0,
                           seed=0, n=64, p=256)
    assert theory_rate(clu, constraints.signs(64)) == \
        pytest.approx(0.3022222222222222, rel=1e-12)


def test_theory_rate_caps():
    weak = models.ModelSpec("wigner", 2, SpectrumSpec.flat(1e-6, 2), 1.0,
                            seed=0, p=12)
    assert theory_rate(weak, constraints.nonneg(12, 2)) == 1.0
    assert theory_rate(weak, constraints.unconstrained(12, 2)) == math.sqrt(2.0)


def test_sweep_singleton_matches_direct_risk():
    model = _wigner_model(t=4.0, seed=9)
    cset = constraints.unconstrained(8, 1)
    rows = sweep([{}], model, cset, _spectral(), trials=10)
    assert len(rows) == 1
    direct = monte_carlo_risk(model, cset, _spectral(), trials=10)
    assert rows[0].mean_d == direct.mean_distance
    assert rows[0].stderr == direct.stderr
    assert rows[0].theory_rate == theory_rate(model, cset)
    assert rows[0].seed == model.seed


def test_sweep_rows_and_knobs():
    model = _wigner_model(t=4.0, seed=100)
    cset = constraints.unconstrained(8, 1)
    grid = [{"t": 2.0}, {"t": 4.0, "sigma": 0.5}, {"p": 10}, {"r": 2}]
    rows = sweep(grid, model, cset, _spectral(), trials=4)
    assert [row.t for row in rows] == [2.0, 4.0, 4.0, 4.0]
    assert rows[1].sigma == 0.5
    assert rows[2].p == 10
    assert rows[3].r == 2
    assert [row.seed for row in rows] == [100, 101, 102, 103]
    with pytest.raises(ValueError):
        sweep([], model, cset, _spectral(), trials=4)
    with pytest.raises(ValueError):
        sweep([{"bogus": 1}], model, cset, _spectral(), trials=4)


def test_sweep_refuses_to_redimension_subspace():
    basis = orthonormalize(np.random.default_rng(1).standard_normal((8, 4)))
    cset = constraints.subspace(basis, 1)
    model = _wigner_model()
    with pytest.raises(DimensionMismatch):
        sweep([{"p": 10}], model, cset, _spectral(), trials=2)


def test_sweep_risk_decreases_in_t():
    model = _wigner_model(p=12, seed=7)
    cset = constraints.unconstrained(12, 1)
    grid = [{"t": v} for v in (3.0, 6.0, 12.0, 24.0)]
    rows = sweep(grid, model, cset, _spectral(), trials=60)
    for lo, hi in zip(rows, rows[1:]):
        assert hi.mean_d <= lo.mean_d + 2.0 * (lo.stderr + hi.stderr)


def test_sweep_csv_round_trip(tmp_path):
    model = models.ModelSpec("denoising", 1, SpectrumSpec.flat(9.0, 1), 1.0,
                             seed=3, p1=12, p2=18)
    cset = constraints.sparse(12, 1, 4)
    rows = sweep([{"t": 5.0}, {"k": 6}], model, cset,
                 EstimatorConfig(max_iter=50), trials=5)
    path = tmp_path / "sweep.csv"
    write_sweep_csv(path, rows)
    header = path.read_text().splitlines()[0]
    assert header == "family,p1,p2,n,p,r,k,t,sigma,trials,seed,mean_d,stderr,theory_rate"
    back = read_sweep_csv(path)
    assert back == rows


def test_read_sweep_csv_rejects_foreign_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("family,t\nwigner,1.0\n")
    with pytest.raises(ValueError):
        read_sweep_csv(path)


def test_fit_rate_exact_power_laws():
    xs = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
    fit = fit_rate(xs, 7.0 * xs ** 2)
    assert abs(fit.slope - 2.0) <= 1e-9
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(7.0), abs=1e-9)
    fit = fit_rate(xs, 3.0 / xs)
    assert abs(fit.slope + 1.0) <= 1e-9


def test_fit_rate_noisy_power_law():
    rng = np.random.default_rng(42)
    xs = np.geomspace(1.0, 100.0, 30)
    noise = rng.normal(0.0, 0.05, size=30)
    ys = np.exp(2.5 * np.log(xs) + 0.3 + noise)
    fit = fit_rate(xs, ys)
    lx = np.log(xs)
    resid = np.log(ys) - (fit.intercept + fit.slope * lx)
    se = math.sqrt(np.sum(resid ** 2) / (30 - 2) / np.sum((lx - lx.mean()) ** 2))
    assert abs(fit.slope - 2.5) <= 3.0 * se


def test_fit_rate_guards():
    with pytest.raises(ValueError):
        fit_rate([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        fit_rate([1.0, 2.0, -3.0], [1.0, 2.0, 3.0])
    with pytest.raises(DegenerateInput):
        fit_rate([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])


def _rows_from_curve(ts, fn):
    return [SweepRow(family="wigner", r=1, t=float(t), sigma=1.0, trials=2,
                     seed=0, mean_d=float(fn(t)), stderr=0.0,
                     theory_rate=0.0, p=16) for t in ts]


def test_detect_phase_transition_synthetic_crossover():
    ts = np.geomspace(2.0, 2000.0, 12)
    # quadratic decay giving way to linear decay at t = 20, the shape of the
    # physical risk curve
    rows = _rows_from_curve(ts, lambda t: max(1.0 / t, 20.0 / t ** 2))
    fit = detect_phase_transition(rows)
    assert isinstance(fit, PhaseTransitionFit)
    assert abs(fit.slope_low + 2.0) <= 0.1
    assert abs(fit.slope_high + 1.0) <= 0.1
    step = ts[1] / ts[0]
    assert 20.0 / step <= fit.t_break <= 20.0 * step
    # the mirrored pairing crosses at the same point with the slopes swapped
    rows = _rows_from_curve(ts, lambda t: min(1.0 / t, 20.0 / t ** 2))
    fit = detect_phase_transition(rows)
    assert abs(fit.slope_low + 1.0) <= 0.1
    assert abs(fit.slope_high + 2.0) <= 0.1
    assert 20.0 / step <= fit.t_break <= 20.0 * step


def test_detect_phase_transition_pure_power_law():
    ts = np.geomspace(2.0, 2000.0, 12)
    rows = _rows_from_curve(ts, lambda t: 5.0 / t)
    fit = detect_phase_transition(rows)
    assert abs(fit.slope_low - fit.slope_high) <= 0.05
    # with no transition the tie-break pins the split at the low boundary
    assert fit.t_break <= ts[3]


def test_detect_phase_transition_guards():
    ts = np.geomspace(2.0, 2000.0, 7)
    rows = _rows_from_curve(ts, lambda t: 1.0 / t)
    with pytest.raises(DegenerateInput):
        detect_phase_transition(rows)
    narrow = np.geomspace(2.0, 40.0, 12)
    rows = _rows_from_curve(narrow, lambda t: 1.0 / t)
    with pytest.raises(DegenerateInput):
        detect_phase_transition(rows)
