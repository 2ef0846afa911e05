"""Cross-module invariant suite behind the verify command.

Each check returns a CheckResult whose name is prefixed by the module it
exercises; failures capture the error type and message instead of raising,
so one report covers the whole suite. Sampled values depend on the given
seed; closed-form checks do not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.stats import spearmanr

from . import calibration, detectors, distributions, linalg, montecarlo, scenario
from .scenario import Scenario


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _random_instance(rng, n: int, k: int):
    """A random dataset-like triple (z, scatter, v) with scatter from k draws."""
    z = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
    r = (rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))) / np.sqrt(2)
    scatter = linalg.factorize(r @ r.conj().T)
    v = np.exp(2j * np.pi * rng.uniform() * np.arange(n))
    return z, scatter, v


def _pfa_by_quadrature(eta: float, k: int, n: int, epsilon: float) -> float:
    """Independent false-alarm computation: integrate the conditional tail
    against the null density of b."""
    if eta <= 1.0:
        return 1.0
    zeta = detectors.zeta_shape(k, n, epsilon)
    x_hi = 1.0 - 1.0 / zeta

    def integrand(x):
        if x < x_hi:
            y = calibration.y_epsilon(x, eta, k, n, epsilon)
        else:
            y = eta - 1.0
        return distributions.central_f_tail(y, k, n) * distributions.central_beta_pdf(x, k, n)

    xb = calibration.x_bar(eta, k, n, epsilon)
    total = 0.0
    for a, b in ((0.0, xb), (xb, x_hi), (x_hi, 1.0)):
        val, _ = quad(integrand, a, b, limit=200)
        total += val
    return total


def run_checks(scn: Scenario, seed: int, covariance=None) -> list[CheckResult]:
    """Run every invariant check; covariance (a raw matrix) may be injected to
    replace the scenario's model covariance in the factorization check."""
    results: list[CheckResult] = []
    rng = np.random.default_rng(seed)

    def record(name: str, fn):
        try:
            detail = fn()
            results.append(CheckResult(name=name, passed=True, detail=detail))
        except Exception as exc:  # noqa: BLE001 - the report is the handler
            results.append(
                CheckResult(name=name, passed=False, detail=f"{type(exc).__name__}: {exc}")
            )

    # ---- linalg ----------------------------------------------------------
    def factorize_reconstructs():
        a = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        m = a @ a.conj().T + 5.0 * np.eye(5)
        f = linalg.factorize(m)
        err = float(np.abs(f.factor @ f.factor.conj().T - f.matrix).max())
        if err > 1e-12 * float(np.abs(m).max()):
            raise AssertionError(f"reconstruction error {err:.3e}")
        return f"max reconstruction error {err:.3e}"

    record("linalg.factorize_reconstructs", factorize_reconstructs)

    def whitening_consistency():
        z, scatter, _ = _random_instance(rng, 6, 12)
        direct = float(np.vdot(scatter.whiten(z), scatter.whiten(z)).real)
        form = scatter.quad_form(z, z)
        rel = abs(direct - form) / max(abs(form), 1e-300)
        if rel > 1e-10:
            raise AssertionError(f"relative mismatch {rel:.3e}")
        return f"relative mismatch {rel:.3e}"

    record("linalg.whitening_consistency", whitening_consistency)

    def quad_form_inverse_oracle():
        z, scatter, v = _random_instance(rng, 6, 12)
        inv = np.linalg.inv(scatter.matrix)
        direct = complex(np.conj(z) @ inv @ v)
        form = scatter.quad_form(z, v)
        rel = abs(direct - form) / max(abs(direct), 1e-300)
        if rel > 1e-8:
            raise AssertionError(f"relative mismatch {rel:.3e}")
        return f"relative mismatch {rel:.3e}"

    record("linalg.quad_form_inverse_oracle", quad_form_inverse_oracle)

    def projector_properties():
        u = rng.standard_normal(7) + 1j * rng.standard_normal(7)
        x = rng.standard_normal(7) + 1j * rng.standard_normal(7)
        y = rng.standard_normal(7) + 1j * rng.standard_normal(7)
        px = linalg.proj_perp(u, x)
        idem = float(np.abs(linalg.proj_perp(u, px) - px).max())
        sym = abs(np.vdot(linalg.proj_perp(u, x), y) - np.vdot(x, linalg.proj_perp(u, y)))
        if idem > 1e-12 or sym > 1e-10:
            raise AssertionError(f"idempotence {idem:.3e}, self-adjointness {sym:.3e}")
        return f"idempotence {idem:.3e}, self-adjointness {sym:.3e}"

    record("linalg.projector_properties", projector_properties)

    # ---- scenario --------------------------------------------------------
    def covariance_factorizable():
        if covariance is not None:
            linalg.factorize(covariance)
            return "injected covariance factorized"
        cov = scn.covariance()
        diag = np.diagonal(cov.matrix).real
        want = 1.0 + scn.noise_power
        if float(np.abs(diag - want).max()) > 1e-12:
            raise AssertionError("diagonal differs from 1 + noise_power")
        one_lag = float(cov.matrix[0, 1].real)
        expected = math.exp(-2.0 * math.pi**2 * scn.sigma_f**2)
        if abs(one_lag - expected) > 1e-12:
            raise AssertionError(f"one-lag entry {one_lag} vs model {expected}")
        return f"diagonal {want:g}, one-lag {one_lag:.6f}"

    record("scenario.covariance_factorizable", covariance_factorizable)

    def steering_structure():
        v = scn.nominal_steering()
        if abs(v[0] - 1.0) > 0 or float(np.abs(np.abs(v) - 1.0).max()) > 1e-12:
            raise AssertionError("entries not unit modulus with first exactly 1")
        norm2 = float(np.vdot(v, v).real)
        if abs(norm2 - scn.n) > 1e-9:
            raise AssertionError(f"squared norm {norm2} != n")
        return f"squared norm {norm2:g}"

    record("scenario.steering_structure", steering_structure)

    def cos2_scale_invariance():
        cov = scn.covariance()
        v = scn.nominal_steering()
        p = scn.actual_steering() if scn.delta_f else scenario.time_steering_vector(scn.n, scn.fd + 0.01)
        base = scenario.cos_squared_theta(p, v, cov)
        a = complex(rng.standard_normal() + 1j * rng.standard_normal()) * 3.0
        b = complex(rng.standard_normal() + 1j * rng.standard_normal()) * 0.2
        scaled = scenario.cos_squared_theta(a * p, b * v, cov)
        if abs(base - scaled) > 1e-10:
            raise AssertionError(f"changed under scaling: {base} vs {scaled}")
        return f"cos^2 {base:.6f} invariant under complex scaling"

    record("scenario.cos2_scale_invariance", cos2_scale_invariance)

    def sampling_reproducible():
        s = int(rng.integers(0, 2**63))
        d1 = scenario.sample_dataset(scn, s)
        d2 = scenario.sample_dataset(scn, s)
        if not (np.array_equal(d1.z, d2.z) and np.array_equal(d1.secondaries, d2.secondaries)):
            raise AssertionError("same seed produced different data")
        d3 = scenario.sample_dataset(scn, s + 1)
        if np.array_equal(d1.z, d3.z):
            raise AssertionError("different seeds produced identical CUT")
        return f"seed {s} reproducible"

    record("scenario.sampling_reproducible", sampling_reproducible)

    def scatter_full_rank():
        cov = scn.covariance()
        h0 = scn.under_h0()
        for i in range(1000):
            scenario.sample_dataset(h0, montecarlo.trial_seed(seed, 999, i), cov=cov)
        return "1000 seeded scatters factorized"

    record("scenario.scatter_full_rank", scatter_full_rank)

    # ---- detectors -------------------------------------------------------
    def cfar_invariance():
        n, k = 6, 14
        z, _, v = _random_instance(rng, n, k)
        sec = (rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))) / np.sqrt(2)
        scatter = linalg.factorize(sec @ sec.conj().T)
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        a += 3.0 * np.eye(n)  # keep comfortably invertible
        z2 = a @ z
        v2 = a @ v
        scatter2 = linalg.factorize((a @ sec) @ (a @ sec).conj().T)
        checks = []
        for fn in (
            lambda zz, ss, vv: detectors.kelly_statistic(zz, ss, vv),
            lambda zz, ss, vv: detectors.sigma_c_statistic(zz, ss, vv, 0.15, k),
            lambda zz, ss, vv: detectors.sufficient_pair(zz, ss, vv).t_tilde,
            lambda zz, ss, vv: detectors.sufficient_pair(zz, ss, vv).b,
        ):
            base = fn(z, scatter, v)
            moved = fn(z2, scatter2, v2)
            rel = abs(base - moved) / max(abs(base), 1e-12)
            checks.append(rel)
            if rel > 1e-8:
                raise AssertionError(f"not invariant: relative change {rel:.3e}")
        return f"max relative change {max(checks):.3e}"

    record("detectors.cfar_invariance", cfar_invariance)

    def kelly_monotone_forms():
        vals_tk = []
        vals_form = []
        for _ in range(200):
            z, scatter, v = _random_instance(rng, 5, 11)
            tk = detectors.kelly_statistic(z, scatter, v)
            vals_tk.append(tk)
            vals_form.append(1.0 / (1.0 - tk))
        if not np.array_equal(np.argsort(vals_tk), np.argsort(vals_form)):
            raise AssertionError("orderings differ")
        return "orderings identical across 200 instances"

    record("detectors.kelly_monotone_forms", kelly_monotone_forms)

    def sigma_c_branch_continuity():
        k, n, eps = scn.k, scn.n, 0.1
        zeta = detectors.zeta_shape(k, n, eps)
        pz = 1.0 / (zeta - 1.0)
        zz = pz + 1.7
        upper = (math.log1p(zz) + math.log1p(-1.0 / zeta)
                 - (math.log(zeta - 1.0) + math.log(pz)) / zeta)
        lower = math.log1p(zz) - math.log1p(pz)
        rel = abs(upper - lower) / max(abs(lower), 1e-12)
        pair_hi = detectors.SufficientPair(t_tilde=1.3, b=1.0 - 1.0 / zeta)
        pair_lo = detectors.SufficientPair(t_tilde=1.3, b=(1.0 - 1.0 / zeta) * (1.0 - 1e-12))
        jump = abs(
            detectors.sigma_c_from_pair(pair_hi, n, k, eps)
            - detectors.sigma_c_from_pair(pair_lo, n, k, eps)
        ) / detectors.sigma_c_from_pair(pair_hi, n, k, eps)
        if rel > 1e-10 or jump > 1e-9:
            raise AssertionError(f"branch mismatch {rel:.3e}, jump {jump:.3e}")
        return f"boundary agreement {rel:.3e}, crossing jump {jump:.3e}"

    record("detectors.sigma_c_branch_continuity", sigma_c_branch_continuity)

    def l1_l2_strictly_decreasing():
        k = scn.k

        def l1(b, y):
            return -math.log1p(b) - (k + 1) * math.log(1.0 + b + y)

        def l2(b, y):
            return (k + 1) * (math.log(1.0 + b + y) - math.log1p(y))

        for _ in range(50):
            b = float(rng.uniform(0.01, 50.0))
            y = float(rng.uniform(0.0, 30.0))
            dy = float(rng.uniform(1e-4, 1.0))
            if l1(b, y + dy) >= l1(b, y) or l2(b, y + dy) >= l2(b, y):
                raise AssertionError(f"not strictly decreasing at b={b}, y={y}")
        return "strictly decreasing on 50 random argument pairs"

    record("detectors.l1_l2_strictly_decreasing", l1_l2_strictly_decreasing)

    def segment_geometry():
        n, k = 4, 8
        misses = []
        for _ in range(10):
            z, scatter, v = _random_instance(rng, n, k)
            u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            u /= np.linalg.norm(u)
            z_w = scatter.whiten(z)
            v_w = scatter.whiten(v)
            u_w = scatter.whiten(u)
            a1, a2 = detectors.alpha_endpoints(z_w, v_w, u_w)
            span = max(abs(a1 - a2), 0.5)
            center = 0.5 * (a1 + a2)
            half = 0.75 * span + 0.5
            axis = np.linspace(-half, half, 41)
            grid = (center.real + axis)[None, :] + 1j * (center.imag + axis)[:, None]
            flat = grid.ravel()
            cell = axis[1] - axis[0]
            for b in (0.0, 1.0, 10.0):
                vals = detectors.rank_one_alpha_objective(b, flat, z_w, v_w, u_w, k)
                best = flat[int(np.argmax(vals))]
                # distance from best to segment [a1, a2]
                d = _dist_to_segment(best, a1, a2)
                misses.append(d / cell)
                if d > math.sqrt(2.0) * cell:
                    raise AssertionError(f"maximizer {d / cell:.2f} cells off the segment")
        return f"worst distance {max(misses):.3f} cells"

    record("detectors.segment_geometry", segment_geometry)

    def scale_profile_minimum():
        worst = 0.0
        for _ in range(30):
            n = int(rng.integers(2, 12))
            k = int(rng.integers(n, n + 20))
            a = float(rng.uniform(0.01, 30.0))
            nu_hat, f_min = detectors.minimize_scale_profile(a, k, n)
            grid = np.linspace(0.0, 10.0 * (nu_hat + 1.0), 4001)
            vals = detectors.scale_profile(grid, a, k, n)
            if f_min > float(vals.min()) + 1e-9:
                raise AssertionError(
                    f"claimed minimum {f_min} above grid minimum {vals.min()}"
                )
            worst = max(worst, f_min - float(vals.min()))
        return f"profile minimum confirmed on 30 triples (worst slack {worst:.2e})"

    record("detectors.scale_profile_minimum", scale_profile_minimum)

    def rank_one_u_equals_v_closed_form():
        z, scatter, v = _random_instance(rng, 6, 13)
        params = detectors.RankOneGlrtParams(u=v / np.linalg.norm(v))
        got = detectors.rank_one_glrt_log(z, scatter, v, params, 13)
        pair = detectors.sufficient_pair(z, scatter, v)
        want = math.log1p(pair.t_tilde)
        rel = abs(got - want) / max(abs(want), 1e-12)
        if rel > 1e-10:
            raise AssertionError(f"closed form mismatch {rel:.3e}")
        return f"matches Kelly-equivalent closed form to {rel:.3e}"

    record("detectors.rank_one_u_equals_v_closed_form", rank_one_u_equals_v_closed_form)

    def rank_one_grid_vs_finer():
        n, k = 4, 8
        worst = 0.0
        for _ in range(5):
            z, scatter, v = _random_instance(rng, n, k)
            u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            coarse = detectors.RankOneGlrtParams(u=u)
            fine = detectors.RankOneGlrtParams(
                u=u, n_b=3 * coarse.n_b, n_t=3 * coarse.n_t, refine=False
            )
            lc = detectors.rank_one_glrt_log(z, scatter, v, coarse, k)
            lf = detectors.rank_one_glrt_log(z, scatter, v, fine, k)
            err = abs(lc - lf) / max(1.0, abs(lf))
            worst = max(worst, err)
            if err > 1e-3:
                raise AssertionError(f"grid value off finer grid by {err:.2e}")
        return f"worst deviation {worst:.2e} (log scale)"

    record("detectors.rank_one_grid_vs_finer", rank_one_grid_vs_finer)

    # ---- calibration -----------------------------------------------------
    def pfa_boundary_and_monotone():
        k, n = scn.k, scn.n
        for eps in (0.0, 0.1):
            if calibration.pfa_closed_form(1.0, k, n, eps) != 1.0:
                raise AssertionError("pfa(1) != 1")
            if calibration.pfa_closed_form(0.5, k, n, eps) != 1.0:
                raise AssertionError("pfa(0.5) != 1")
            near = calibration.pfa_closed_form(1.0 + 1e-9, k, n, eps)
            if abs(near - 1.0) > 1e-6:
                raise AssertionError(f"discontinuous at 1: {near}")
            grid = np.linspace(1.0001, 4.0, 100)
            vals = [calibration.pfa_closed_form(float(e), k, n, eps) for e in grid]
            if not all(b < a for a, b in zip(vals, vals[1:])):
                raise AssertionError("not strictly decreasing")
        return "boundary value 1 and strict decrease confirmed"

    record("calibration.pfa_boundary_and_monotone", pfa_boundary_and_monotone)

    def pfa_quadrature_agreement():
        k, n = scn.k, scn.n
        worst = 0.0
        for eps in (0.0, 0.1):
            for eta in (1.1, 1.6, 2.4):
                cf = calibration.pfa_closed_form(eta, k, n, eps)
                qd = _pfa_by_quadrature(eta, k, n, eps)
                worst = max(worst, abs(cf - qd))
        if worst > 1e-8:
            raise AssertionError(f"quadrature deviation {worst:.3e}")
        return f"worst absolute deviation {worst:.3e}"

    record("calibration.pfa_quadrature_agreement", pfa_quadrature_agreement)

    def threshold_round_trip():
        k, n = scn.k, scn.n
        worst = 0.0
        for eps in (0.0, 0.1, 0.2):
            for pfa in (1e-2, 1e-4, 1e-6):
                eta = calibration.threshold_from_pfa(pfa, k, n, eps)
                back = calibration.pfa_closed_form(eta, k, n, eps)
                worst = max(worst, abs(back - pfa) / pfa)
        if worst > 1e-3:
            raise AssertionError(f"round-trip error {worst:.3e}")
        return f"worst relative round-trip error {worst:.3e}"

    record("calibration.threshold_round_trip", threshold_round_trip)

    def mc_threshold_self_consistent():
        spec = detectors.kelly()
        small = Scenario(n=8, k=16)
        pfa = 0.05
        res = calibration.threshold_monte_carlo(spec, small, pfa, seed=seed)
        plan = montecarlo.TrialPlan(master_seed=seed + 1, trials=2000)
        point = montecarlo.estimate_rate(spec, res.threshold, small, plan)
        sigma = math.sqrt(pfa * (1 - pfa) / plan.trials)
        dev = abs(point.pd_estimate - pfa)
        if dev > 3 * sigma:
            raise AssertionError(f"re-estimate off by {dev / sigma:.2f} sigma")
        return f"re-estimated pfa {point.pd_estimate:.4f} within {dev / sigma:.2f} sigma"

    record("calibration.mc_threshold_self_consistent", mc_threshold_self_consistent)

    # ---- distributions ---------------------------------------------------
    def beta_pdf_normalizes():
        worst = 0.0
        for k, n in ((16, 8), (32, 16), (8, 2)):
            val, _ = quad(lambda x: distributions.central_beta_pdf(x, k, n), 0.0, 1.0)
            worst = max(worst, abs(val - 1.0))
        if worst > 1e-10:
            raise AssertionError(f"normalization off by {worst:.3e}")
        return f"worst normalization error {worst:.3e}"

    record("distributions.beta_pdf_normalizes", beta_pdf_normalizes)

    def h0_laws_quick():
        n, k = 8, 16
        h0 = Scenario(n=n, k=k)
        plan = montecarlo.TrialPlan(master_seed=seed, trials=1500)
        cov = h0.covariance()
        v = h0.nominal_steering()
        t_vals = np.empty(plan.trials)
        b_vals = np.empty(plan.trials)
        for i in range(plan.trials):
            ds = scenario.sample_dataset(h0, montecarlo.trial_seed(seed, 7, i), cov=cov)
            pair = detectors.sufficient_pair(ds.z, ds.scatter, v)
            t_vals[i] = pair.t_tilde
            b_vals[i] = pair.b
        # sup distance of empirical tail against the law
        t_sorted = np.sort(t_vals)
        emp_hi = 1.0 - np.arange(plan.trials) / plan.trials
        emp_lo = 1.0 - (np.arange(plan.trials) + 1.0) / plan.trials
        law = distributions.central_f_tail(t_sorted, k, n)
        d_t = float(np.maximum(np.abs(law - emp_hi), np.abs(law - emp_lo)).max())
        slack = 1.63 / math.sqrt(plan.trials) * 1.5
        if d_t > slack:
            raise AssertionError(f"t_tilde sup distance {d_t:.4f} > {slack:.4f}")
        rho = float(spearmanr(t_vals, b_vals).statistic)
        if abs(rho) > 0.1:
            raise AssertionError(f"rank correlation {rho:.3f}")
        return f"sup distance {d_t:.4f} (slack {slack:.4f}), rank corr {rho:+.3f}"

    record("distributions.h0_laws_quick", h0_laws_quick)

    # ---- montecarlo ------------------------------------------------------
    def partition_independent():
        spec = detectors.parametric_epsilon(0.1)
        small = Scenario(n=4, k=8)
        plan1 = montecarlo.TrialPlan(master_seed=seed, trials=40, workers=1)
        whole = montecarlo.simulate_statistics([spec], small, plan1, stream=5)
        a = montecarlo._simulate_range([spec], small, seed, 5, 0, 17)
        b = montecarlo._simulate_range([spec], small, seed, 5, 17, 23)
        split = np.concatenate([a, b], axis=1)
        if not np.array_equal(whole, split):
            raise AssertionError("chunked results differ from whole run")
        return "chunked and whole runs identical"

    record("montecarlo.partition_independent", partition_independent)

    def estimate_rate_extremes():
        spec = detectors.kelly()
        small = Scenario(n=4, k=8)
        plan = montecarlo.TrialPlan(master_seed=seed, trials=50)
        hi = montecarlo.estimate_rate(spec, float("-inf"), small, plan)
        lo = montecarlo.estimate_rate(spec, float("inf"), small, plan)
        if hi.pd_estimate != 1.0 or lo.pd_estimate != 0.0:
            raise AssertionError(f"got {hi.pd_estimate}, {lo.pd_estimate}")
        return "rate 1 at -inf threshold, 0 at +inf"

    record("montecarlo.estimate_rate_extremes", estimate_rate_extremes)

    return results


def _dist_to_segment(point: complex, a: complex, b: complex) -> float:
    """Euclidean distance from a complex point to the segment [a, b]."""
    ab = b - a
    denom = abs(ab) ** 2
    if denom == 0.0:
        return abs(point - a)
    t = ((point - a).real * ab.real + (point - a).imag * ab.imag) / denom
    t = min(max(t, 0.0), 1.0)
    return abs(point - (a + t * ab))
