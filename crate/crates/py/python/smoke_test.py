"""Smoke test for the compiled extension. Run after `maturin develop`."""

import math

import coupled_opo as co


def close(a, b, tol):
    assert abs(a - b) < tol, (a, b)


# single downconverter at half threshold
opo = co.SystemParams(eps=50.0)
close(co.spectrum(opo, 0.0, "Y1"), 1 / 9, 1e-12)
close(co.spectrum(opo, 0.0, "X1"), 9.0, 1e-12)
assert opo.eps_crit() == 100.0

# detuned pair, zero-frequency headline numbers
det = co.SystemParams(j_a=10, j_b=1, delta_a=10, delta_b=1, pump_fraction=0.5)
s_xp, s_yp, s_xm, s_ym = co.analytic_combined(det, 0.0)
close(s_yp, 2 / 9, 1e-12)
close(co.spectrum(det, 0.0, "Yp"), s_yp, 1e-10)
close(co.duan_sum(det, 0.0), 2.2123, 1e-4)
close(co.epr_product(det, 0.0), 0.3587, 1e-3)
rec = co.correlation_record(det, 0.0)
assert rec["flags"] == "squeezed|entangled|epr", rec

# resonant pair
res = co.SystemParams(j_a=1, j_b=1, pump_fraction=0.5)
close(res.threshold_bisection(), res.eps_crit(), 1e-6 * res.eps_crit())
theta, value = co.optimize_angle(res, 1.72)
close(math.degrees(theta), 113.0, 1.0)
assert value < 1.0
assert min(z.real for z in res.stability_eigenvalues()) > 0
assert co.covariance(res, 0.5, "X1", "X2") < 0

try:
    co.spectrum(co.SystemParams(j_a=1, j_b=1, pump_fraction=1.5), 0.0, "X1")
except co.AboveThresholdError as e:
    assert "eps_c" in str(e)
else:
    raise AssertionError("expected AboveThresholdError")

vals, errs, diverged = co.sde_spectrum(
    opo, [0.0], "Y1", n_traj=256, t_transient=10.0, t_measure=60.0, seed=3
)
assert diverged == 0
assert abs(vals[0] - 1 / 9) < 4 * errs[0], (vals, errs)

print("smoke test passed")
