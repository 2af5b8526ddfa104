"""End-to-end acceptance checks.

Each test reports a single PASS or FAIL line.  The lines are printed and also
collected for the terminal summary, so they appear in captured runs.
"""
import numpy as np

from symswitch import fcs, trajectory as tj
from symswitch.model import build_model
from symswitch.presets import PRESETS, preset
from symswitch.symmetry import build_swap, check_strong_symmetry

from conftest import qubit_model, qubit_theta

RESULTS: list[str] = []


def report(n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(line)
    RESULTS.append(line)
    assert ok, line


def test_criterion_1_stationarity():
    worst = {name: abs(fcs.theta(build_model(preset(name)), 0.0).theta) for name in PRESETS}
    name = max(worst, key=worst.get)
    report(1, len(worst) == 5 and worst[name] < 1e-9, f"max |theta(0)| = {worst[name]:.2e} ({name}) over {len(worst)} presets")


def test_criterion_2_multiplicity():
    on = fcs.steady_states(build_model(preset("fig2_laser_on"))).null_dim
    off = fcs.steady_states(build_model(preset("fig2_laser_off"))).null_dim
    report(2, on == 1 and off >= 2, f"null_dim laser-on = {on}, laser-off = {off}")


def test_criterion_3_kink_vs_smooth():
    rel = {}
    for name in ("fig2_laser_off", "fig2_laser_on"):
        left, right, *_ = fcs.one_sided_slopes(build_model(preset(name)))
        rel[name] = abs(left - right) / max(abs(left), abs(right))
    ok = rel["fig2_laser_off"] > 1e-3 and rel["fig2_laser_on"] < 1e-6
    report(3, ok, f"relative slope jump laser-off = {rel['fig2_laser_off']:.3e}, laser-on = {rel['fig2_laser_on']:.3e}")


def test_criterion_4_switch_ratio():
    base = preset("fig3_laser_off")
    Js = np.logspace(-3, -1, 9)
    alphas = [fcs.current_stats(build_model(base.replace(J=float(J)))).alpha for J in Js]
    monotone = all(a > b for a, b in zip(alphas, alphas[1:]))
    ok = alphas[0] >= 100 and monotone
    report(4, ok, f"alpha(J=1e-3) = {alphas[0]:.4g} (needs >= 100), monotone decreasing = {monotone}, "
                  f"alpha(J=1e-1) = {alphas[-1]:.7g}")


def test_criterion_5_dark_period_law():
    p = preset("fig3_laser_on")
    m = build_model(p)
    recs = tj.run_ensemble(m, tj.TrajectoryConfig(t_max=2e6, seed=20241016, n_traj=64),
                           symmetry=build_swap(m.space).U, workers=4)
    st = tj.pool_stats(tj.parity_periods(r) for r in recs)
    td, se = st.T_D
    expected = tj.dark_period_formula(p)
    ok = st.n_dark >= 200 and abs(td - expected) < 3 * se
    report(5, ok, f"T_D = {td:.0f} +- {se:.0f} from {st.n_dark} dark periods, closed form {expected:.0f}")


def test_criterion_6_cross_method_current():
    m = build_model(preset("fig3_laser_on"))
    recs = tj.run_ensemble(m, tj.TrajectoryConfig(t_max=2e6, seed=77, n_traj=64), workers=4)
    est = tj.counted_rate(recs, m)
    q = fcs.current_stats(m).q_mean
    ok = abs(est.rate - q) < 3 * est.stderr
    report(6, ok, f"jump rate {est.rate:.4e} +- {est.stderr:.1e} vs spectral q_mean {q:.4e}")


def test_criterion_7_oracle_equivalence():
    worst = 0.0
    for name in ("fig2_laser_on", "fig2_laser_off", "fig3_laser_on"):
        m = build_model(preset(name))
        for s in (-0.5, -0.05, 0.0, 0.05, 0.5):
            d = fcs.theta(m, s, method="dense").theta
            i = fcs.theta(m, s, method="iterative").theta
            worst = max(worst, abs(d - i))
    a, b = 0.7, 0.3
    q = qubit_model(a, b, omega=0.4)
    s = np.linspace(-1.5, 1.5, 13)
    qerr = max(abs(fcs.theta(q, x).theta - qubit_theta(x, a, b)) for x in s)
    report(7, worst < 1e-8 and qerr < 1e-10, f"dense vs iterative max diff {worst:.1e}, qubit oracle max diff {qerr:.1e}")


def test_criterion_8_symmetry_suite():
    off = build_model(preset("fig3_laser_off"))
    sym = build_swap(off.space)
    norm_off = max(n for _, n in check_strong_symmetry(off, sym).norms)
    recs = []
    for initial, seed in (("s", 100), ("a", 200)):
        recs += tj.run_ensemble(off, tj.TrajectoryConfig(t_max=1e5, initial=initial, seed=seed, n_traj=50), symmetry=sym.U)
    drift = max(abs(p - r.initial_parity) for r in recs for p in r.parities)
    jumps = sum(len(r.times) for r in recs)

    on = build_model(preset("fig2_laser_on"))
    norms = dict(check_strong_symmetry(on, build_swap(on.space)).norms)
    gap = abs(norms["at1"] - 2 * on.channel("at1").op.norm())
    ok = norm_off < 1e-12 and len(recs) == 100 and jumps > 0 and drift < 1e-12 and gap < 1e-12
    report(8, ok, f"laser-off max commutator {norm_off:.1e}, parity drift {drift:.1e} over {len(recs)} trajectories "
                  f"({jumps} jumps), | ||[pi,L1]|| - 2||L1|| | = {gap:.1e}")


def test_criterion_9_legendre_round_trip():
    m = build_model(preset("fig2_laser_on"))
    s = np.linspace(-0.2, 0.2, 41)
    curve = fcs.scan_theta(m, s)
    th = np.asarray(curve.theta)
    slopes = -np.diff(th) / np.diff(s)
    q = np.linspace(slopes.min(), slopes.max(), 401)
    gq = fcs.legendre(curve, q)
    ds, dq = s[1] - s[0], q[1] - q[0]
    back = fcs.legendre_inverse(gq, s)
    err = np.abs(back - th).max()
    gmax = max(gq.G)
    ok = err <= 2 * ds * dq and abs(gmax) <= ds * dq
    report(9, ok, f"round-trip error {err:.1e} (bound {2 * ds * dq:.1e}), max G = {gmax:.1e}")


def test_criterion_10_equilibrium_null():
    p = preset("equilibrium")
    assert p.n1 == p.n2 and p.omega0 == p.omega1 == 0 and p.thermal_convention == "standard"
    q = fcs.current_stats(build_model(p)).q_mean
    report(10, abs(q) < 1e-9, f"|q_mean| = {abs(q):.1e}")
