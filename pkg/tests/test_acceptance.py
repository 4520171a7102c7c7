"""Acceptance suite.

One test (or parametrized family) per acceptance criterion, each printed as
a pass/fail line; run with `pytest tests/test_acceptance.py -v -s`.  Every
tolerance is pinned here at its stated value; statistical thresholds are the
pre-registered conventions (3 standard errors, KS at 0.01 with per-report
Bonferroni correction).  The random seeds are fixed so the suite is
reproducible bit for bit.
"""

import itertools

import numpy as np
import pytest
from scipy import integrate as spi
from scipy import stats as sps
from scipy.linalg import expm

from lattice_hasimoto.core import ALField, Beta, RngStream, Window
from lattice_hasimoto.brackets import (TABLE_ALPHA, PolyRing,
                                       compatibility_residual, generators_in,
                                       hamilton_check, hamilton_check_standard,
                                       jacobi_residual, verify_bracket_tables)
from lattice_hasimoto.dynamics import (IntegratorConfig, conserved_report,
                                       frame_evolution, frame_generator,
                                       integrate, lhm_rhs,
                                       spins_from_frame_traj)
from lattice_hasimoto.experiments import (EnsembleSpec,
                                          gibbs_invariance_experiment,
                                          truncation_convergence_experiment,
                                          uniqueness_probe,
                                          wn_invariance_experiment)
from lattice_hasimoto.hasimoto import (alphas_from_spins_frame,
                                       reconstruct_spins, rotation_from_alpha,
                                       rotation_generator_from_alpha,
                                       rotation_with_third_column,
                                       spins_from_alphas,
                                       theta_gamma_from_spins,
                                       transport_rotation_block)
from lattice_hasimoto.sampling import (kernel_spectrum,
                                       sample_gibbs_chain,
                                       sample_gibbs_chain_block,
                                       sample_haar_rotation,
                                       sample_white_noise,
                                       sample_white_noise_block,
                                       tail_exponent_report)

SEED = 20260808


def _verdict(label: str, passed: bool, detail: str = "") -> None:
    tag = "PASS" if passed else "FAIL"
    extra = f" ({detail})" if detail else ""
    print(f"[{tag}] {label}{extra}")


# ==========================================================================
# Criterion 1: algebraic identities, exact
# ==========================================================================

def test_criterion_1_exact_algebra():
    ring = PolyRing(Window(-5, 5))
    gens = generators_in(ring, -3, 3)
    polys = {g: ring.var(g) for g in gens}
    triples = list(itertools.combinations(gens, 3))
    jac_bad = [t for t in triples
               if not jacobi_residual(polys[t[0]], polys[t[1]], polys[t[2]],
                                      TABLE_ALPHA).is_zero()]
    comp_bad = [t for t in triples
                if not compatibility_residual(polys[t[0]], polys[t[1]],
                                              polys[t[2]]).is_zero()]
    ham = hamilton_check(Window(-3, 3))
    ham_std = hamilton_check_standard(Window(-3, 3))
    ok = not jac_bad and not comp_bad and ham.passed and ham_std.passed
    _verdict("criterion 1: Jacobi, compatibility, Hamiltonian flow exact",
             ok, f"{len(triples)} triples each; {ham.cases_checked} flow cases")
    assert not jac_bad
    assert not comp_bad
    assert ham.passed and ham_std.passed


# ==========================================================================
# Criterion 2: bracket tables, numeric
# ==========================================================================

def test_criterion_2_bracket_tables_numeric():
    rep = verify_bracket_tables(100, RngStream(SEED, 2), Beta(1.0))
    worst = rep.max_discrepancy()
    ok = rep.passed(1e-6)
    _verdict("criterion 2: bracket tables vs spin-level brackets",
             ok, f"{len(rep.rows)} rows, worst {worst:.2e} <= 1e-6")
    assert ok, f"worst discrepancy {worst}"


# ==========================================================================
# Criterion 3: geometry
# ==========================================================================

def test_criterion_3_rotation_geometry():
    rng = np.random.default_rng(SEED)
    z = rng.standard_normal(10 ** 4) + 1j * rng.standard_normal(10 ** 4)
    z *= np.exp(rng.uniform(-4.0, np.log(1e3), 10 ** 4)) / np.abs(z)
    q = transport_rotation_block(z)
    ortho = float(np.max(np.abs(np.einsum("nij,nik->njk", q, q) - np.eye(3))))
    det = float(np.max(np.abs(np.linalg.det(q) - 1.0)))
    worst_exp = 0.0
    for zz in z[:10 ** 4:5]:       # 2000 exponential comparisons
        worst_exp = max(worst_exp, float(np.max(np.abs(
            rotation_from_alpha(zz).m - expm(rotation_generator_from_alpha(zz))))))
    ok = ortho <= 1e-12 and det <= 1e-12 and worst_exp <= 1e-12
    _verdict("criterion 3a: Q orthogonal, det 1, Q = exp(q) at 1e-12",
             ok, f"ortho {ortho:.1e}, det {det:.1e}, exp {worst_exp:.1e}")
    assert ok


def test_criterion_3_round_trips_and_consistency():
    worst_angle_rt = worst_frame_rt = worst_fb1 = worst_fb2 = 0.0
    worst_dots = 0.0
    for i in range(100):
        s = sample_gibbs_chain(Beta(1.0), Window(0, 127), RngStream(SEED, 100 + i))
        v = s.values

        tg = theta_gamma_from_spins(s)
        back = reconstruct_spins(v[0], v[1], tg)
        worst_angle_rt = max(worst_angle_rt, float(np.max(np.abs(back.values - v))))

        p0 = rotation_with_third_column(v[0])
        a, frames = alphas_from_spins_frame(s, p0)
        s2, _ = spins_from_alphas(a, p0)
        worst_frame_rt = max(worst_frame_rt, float(np.max(np.abs(s2.values - v))))

        sq = np.abs(a.values) ** 2
        dots = np.sum(v[:-1] * v[1:], axis=1)
        worst_fb1 = max(worst_fb1, float(np.max(np.abs(
            dots - (1 - sq) / (1 + sq)))))
        cr = np.cross(v[:-1], v[1:])
        lhs = np.sum(cr[:-1] * cr[1:], axis=1) + 1j * np.sum(v[:-2] * cr[1:], axis=1)
        prod = np.conj(a.values[1:]) * a.values[:-1]
        rhs = 4 * prod / ((1 + sq[1:]) * (1 + sq[:-1]))
        worst_fb2 = max(worst_fb2, float(np.max(np.abs(lhs - rhs))))

        # reconstruction dot-product identities at offsets 1, 2, 3
        th, ga = tg.theta, tg.gamma
        n = np.arange(1, len(th) - 2)
        d1 = np.sum(v[n] * v[n + 1], axis=1)
        worst_dots = max(worst_dots, float(np.max(np.abs(d1 - np.cos(th[n])))))
        d2 = np.sum(v[n] * v[n + 2], axis=1)
        expect2 = (np.cos(th[n]) * np.cos(th[n + 1])
                   - np.sin(th[n]) * np.sin(th[n + 1]) * np.cos(ga[n + 1]))
        worst_dots = max(worst_dots, float(np.max(np.abs(d2 - expect2))))
        d3 = np.sum(v[n] * v[n + 3], axis=1)
        expect3 = (np.cos(th[n]) * (np.cos(th[n + 1]) * np.cos(th[n + 2])
                   - np.cos(ga[n + 2]) * np.sin(th[n + 1]) * np.sin(th[n + 2]))
                   + (-(np.sin(th[n + 1]) * np.cos(th[n + 2])
                        + np.cos(th[n + 1]) * np.sin(th[n + 2]) * np.cos(ga[n + 2]))
                      * np.cos(ga[n + 1])
                      + np.sin(th[n + 2]) * np.sin(ga[n + 1]) * np.sin(ga[n + 2]))
                   * np.sin(th[n]))
        worst_dots = max(worst_dots, float(np.max(np.abs(d3 - expect3))))

    ok = (worst_angle_rt <= 1e-8 and worst_frame_rt <= 1e-8
          and worst_fb1 <= 1e-10 and worst_fb2 <= 1e-10 and worst_dots <= 1e-8)
    _verdict("criterion 3b: transform round trips and consistency identities",
             ok, f"angle rt {worst_angle_rt:.1e}, frame rt {worst_frame_rt:.1e}, "
                 f"fb1 {worst_fb1:.1e}, fb2 {worst_fb2:.1e}, dots {worst_dots:.1e}")
    assert ok


# ==========================================================================
# Criterion 4: dynamics
# ==========================================================================

def test_criterion_4_conservation_and_dispersion():
    cfg = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12, max_step=0.25)
    a = sample_white_noise(Beta(1.0), Window.symmetric(64), RngStream(SEED, 4))
    traj = integrate(a, "al", "free", 10.0, cfg,
                     sample_times=np.linspace(0, 10, 21))
    rep = conserved_report(traj)
    drift = dict(zip(rep.names, rep.drift))
    ok_cons = drift["H_AL"] <= 1e-8 and drift["H_LHM"] <= 1e-8

    n = np.arange(16)
    k = 2 * np.pi / 16
    amp = 0.5
    pw = ALField(Window(0, 15), amp * np.exp(1j * k * n))
    omega = 2.0 - 2.0 * (1.0 + amp ** 2) * np.cos(k)
    tpw = integrate(pw, "al", "periodic", 5.0,
                    IntegratorConfig(1e-11, 1e-13, 0.1), sample_times=[0, 5.0])
    disp = float(np.max(np.abs(tpw.states[-1].values
                               - amp * np.exp(1j * (k * n - omega * 5.0)))))
    ok_disp = disp <= 1e-6
    _verdict("criterion 4a: conservation (T=10, K=64) and plane-wave dispersion",
             ok_cons and ok_disp,
             f"H_AL {drift['H_AL']:.1e}, H_LHM {drift['H_LHM']:.1e}, "
             f"dispersion {disp:.1e}")
    assert ok_cons and ok_disp


def test_criterion_4_zero_curvature_and_spin_flow():
    tight = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14, max_step=0.05)
    a0 = sample_white_noise(Beta(1.0), Window.symmetric(16), RngStream(SEED, 5))

    # zero-curvature residual with second-order decay
    t_mid = 0.2
    zc = []
    for dt in (1e-4, 2e-4):
        traj = integrate(a0, "al", "free", t_mid + dt, tight,
                         sample_times=[t_mid - dt, t_mid, t_mid + dt])
        vm, v0, vp = (traj.states[j].values for j in range(3))
        worst = 0.0
        for nn in range(1, 31):
            dq = (transport_rotation_block(vp[nn])
                  - transport_rotation_block(vm[nn])) / (2 * dt)
            q0 = transport_rotation_block(v0[nn])
            worst = max(worst, float(np.max(np.abs(
                dq - (q0 @ frame_generator(v0[nn + 1], v0[nn])
                      - frame_generator(v0[nn], v0[nn - 1]) @ q0)))))
        zc.append(worst)
    ok_zc = zc[0] <= 1e-6 and zc[1] / zc[0] >= 3.0

    # frame-evolved spins satisfy the spin flow, residual second order in dt
    dt = 1e-3
    ts = np.round(np.arange(0.0, 1.0 + dt / 2, dt), 12)
    cfg = IntegratorConfig(rel_tol=1e-11, abs_tol=1e-13, max_step=0.01)
    atraj = integrate(a0, "al", "free", 1.0, cfg, sample_times=ts)
    ftraj = frame_evolution(atraj, sample_haar_rotation(RngStream(SEED, 6)), cfg)
    straj = spins_from_frame_traj(ftraj)
    i = len(ts) // 2
    rhs = lhm_rhs(straj.states[i].values)
    res1 = float(np.max(np.abs(
        (straj.states[i + 1].values - straj.states[i - 1].values) / (2 * dt) - rhs)))
    res2 = float(np.max(np.abs(
        (straj.states[i + 2].values - straj.states[i - 2].values) / (4 * dt) - rhs)))
    ok_spin = res1 <= 1e-4 and res2 / res1 >= 3.0

    # per-site flux identity to second order
    j = i
    def logs(state):
        return np.log1p(np.abs(state.values) ** 2)
    flux_res = []
    for step in (1, 2):
        lhs = (logs(atraj.states[j + step]) - logs(atraj.states[j - step])) \
            / (2 * step * dt)
        v = atraj.states[j].values
        right = -2 * np.imag(np.conj(v) * np.concatenate([v[1:], [0]]))
        left = 2 * np.imag(np.conj(np.concatenate([[0], v[:-1]])) * v)
        flux_res.append(float(np.max(np.abs(lhs - right - left))))
    ok_flux = flux_res[0] <= 1e-4 and flux_res[1] / flux_res[0] >= 3.0

    ok = ok_zc and ok_spin and ok_flux
    _verdict("criterion 4b: zero curvature, spin flow, flux identity",
             ok, f"zc {zc[0]:.1e} (x{zc[1]/zc[0]:.1f}), "
                 f"spin {res1:.1e} (x{res2/res1:.1f}), "
                 f"flux {flux_res[0]:.1e} (x{flux_res[1]/flux_res[0]:.1f})")
    assert ok


# ==========================================================================
# Criterion 5: measures
# ==========================================================================

def test_criterion_5_sampler_moments_and_spectrum():
    b = Beta(1.0)
    # quadrature oracles, computed fresh
    dens = lambda y: 3.0 * (1.0 + y) ** -4.0
    target_log = spi.quad(lambda y: np.log1p(y) * dens(y), 0, np.inf)[0]
    target_sq = spi.quad(lambda y: y * dens(y), 0, np.inf)[0]
    target_dot = spi.quad(lambda u: (2 * u - 1) * 3 * u ** 2, 0, 1)[0]
    assert target_log == pytest.approx(1 / 3, abs=1e-9)
    assert target_sq == pytest.approx(1 / 2, abs=1e-9)
    assert target_dot == pytest.approx(1 / 2, abs=1e-12)

    n = 10 ** 6
    a = sample_white_noise_block(b, Window(0, 0), RngStream(SEED, 7), n)[:, 0]
    y = np.abs(a) ** 2
    logs = np.log1p(y)
    z_log = abs(logs.mean() - target_log) / (logs.std(ddof=1) / np.sqrt(n))
    z_sq = abs(y.mean() - target_sq) / (y.std(ddof=1) / np.sqrt(n))

    chains = sample_gibbs_chain_block(b, Window(0, 16), RngStream(SEED, 8), 10 ** 4)
    d = np.sum(chains[:, 7] * chains[:, 8], axis=1)
    z_dot = abs(d.mean() - target_dot) / (d.std(ddof=1) / np.sqrt(d.size))

    spec = kernel_spectrum(b, 6)
    ok_spec = (abs(spec.eigenvalues[0] - 1.0) <= 1e-10
               and abs(spec.eigenvalues[1] - target_dot) <= 1e-8)

    pushed = (1.0 - y[:10 ** 5]) / (1.0 + y[:10 ** 5])
    import lattice_hasimoto.sampling as S
    sig = S._gibbs_step_block(np.tile([0.0, 0.0, 1.0], (10 ** 5, 1)), b,
                              RngStream(SEED, 9).generator())
    ks_p = sps.ks_2samp(pushed, sig[:, 2]).pvalue

    tails = tail_exponent_report(b, RngStream(SEED, 10), n_samples=10 ** 6)
    print(f"    tail report: Pareto index {tails['pareto_index_shifted_sqmod']:.3f}, "
          f"moment threshold {tails['moment_threshold']:.3f} "
          f"(density predicts {tails['density_tail_index']:.1f})")

    ok = (z_log <= 3 and z_sq <= 3 and z_dot <= 3 and ok_spec and ks_p >= 0.01)
    _verdict("criterion 5: sampler moments, kernel spectrum, pushforward",
             ok, f"z_log {z_log:.2f}, z_sq {z_sq:.2f}, z_dot {z_dot:.2f}, "
                 f"lam0-1 {abs(spec.eigenvalues[0]-1):.1e}, "
                 f"lam1 err {abs(spec.eigenvalues[1]-0.5):.1e}, KS p {ks_p:.3f}")
    assert ok


# ==========================================================================
# Criterion 6: invariance experiments
# ==========================================================================

INVARIANCE_CASES = [(m, b) for m in ("wn", "gibbs") for b in (0.5, 1.0, 2.0)]


@pytest.mark.parametrize("measure,beta", INVARIANCE_CASES,
                         ids=[f"{m}-beta{b}" for m, b in INVARIANCE_CASES])
def test_criterion_6_invariance(measure, beta):
    spec = EnsembleSpec(Beta(beta), Window.symmetric(64), 10 ** 4, 1.0,
                        (0.0, 0.25, 0.5, 1.0), SEED + int(10 * beta),
                        IntegratorConfig(1e-6, 1e-8, 0.25))
    run = wn_invariance_experiment if measure == "wn" else gibbs_invariance_experiment
    report = run(spec)
    n_m = len(report.statistics)
    n_k = len(report.ks_tests)
    worst_z = max(abs(s.z) for s in report.statistics)
    worst_p = min(k.corrected_p for k in report.ks_tests)
    _verdict(f"criterion 6: {measure} invariance at beta={beta}",
             report.passed,
             f"{n_m} moments (worst |z| {worst_z:.2f}), {n_k} KS "
             f"(worst corrected p {worst_p:.3f})")
    assert report.passed, report.to_json(indent=2)


# ==========================================================================
# Criterion 7: convergence and uniqueness mechanism
# ==========================================================================

def test_criterion_7_truncation_convergence():
    all_ratios = []
    all_decreasing = []
    for seed in range(20):
        rep = truncation_convergence_experiment(Beta(1.0), [8, 16, 32, 64],
                                                1.0, SEED + seed)
        all_decreasing.append(rep["strictly_decreasing"])
        all_ratios.extend(r for r in rep["ratios"] if np.isfinite(r))
    median_ratio = float(np.median(all_ratios))
    ok = all(all_decreasing) and median_ratio < 0.5
    _verdict("criterion 7a: truncation gaps decrease (20 seeds)",
             ok, f"median per-doubling ratio {median_ratio:.2e}, "
                 f"decreasing in {sum(all_decreasing)}/20 seeds")
    assert ok


def test_criterion_7_uniqueness_probe():
    rep = uniqueness_probe(Beta(1.0), Window.symmetric(64), 1.0, 1.0, SEED + 70)
    final = rep["perturbation_gap_final"]
    ok = final <= 1e-6
    _verdict("criterion 7b: interior insensitivity to edge perturbation",
             ok, f"weighted interior gap {final:.2e} <= 1e-6")
    assert ok
