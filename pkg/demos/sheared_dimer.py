"""Mean length of a solvated dimer under shear, with a radial control variate.

Two bonded particles sit in a periodic 2D bath of soft spheres; a sinusoidal
shear force of amplitude nu drives the system out of equilibrium, and the
quantity of interest is the mean bond length.  The response is second order
in nu (about +1% at nu = 1), so resolving it against the double-well bond
fluctuations is expensive.

The control variate comes from the unsolvated equilibrium dimer: a radial
ODE for phi = psi' is solved by stable quadrature, and the streamed
observable |r12| + L Phi0 (Phi0 = psi(|r12|)/2, full generator including
solvent and shear terms) has the same mean with a much smaller variance at
small shear.

Run:  python3 demos/sheared_dimer.py          (~2 minutes)
      python3 demos/sheared_dimer.py --long   (adds the slow response scan)

The --long scan estimates the mean-length response itself; with the desk
budget of this demo its error bars are honest but wide.  The paper-scale
answer (response ~ nu^2) needs trajectories two orders of magnitude longer.
"""

import sys
import time

from pertcv import RngStream
from pertcv import dimer as dm
from pertcv.experiments import simulate_dimer

DT = 2e-3


def run(params, nu, profile, total_time, stream_id, t_deco=50.0):
    n_steps = int(total_time / params.dt)
    return simulate_dimer(params, nu, profile, n_steps, n_steps // 10,
                          RngStream(3, stream_id), t_deco=t_deco)


def main(long_scan=False):
    vacuum = dm.DimerParams(n=64, solvent="none", dt=DT)
    profile = dm.solve_radial_poisson(vacuum)
    print(f"radial profile: rstar = {profile.rstar:.6f}, "
          f"phi peaks at {profile.phi.max():.4f} near r = "
          f"{profile.grid.nodes[profile.phi.argmax()]:.3f}")

    print("\nunsolvated dimer at nu = 0: the modified length is the constant rstar")
    reports = run(vacuum, 0.0, profile, 400.0, 0)
    cv = reports["modified"]
    print(f"  streamed mean = {cv.mean:.6f} (rstar = {profile.rstar:.6f}), "
          f"variance {cv.asym_variance:.2e}")

    print("\nsoft solvent, variance with and without the control variate:")
    print(f"{'nu':>6} {'mean len':>18} {'var plain':>12} {'var modified':>12} {'ratio':>6}")
    soft = dm.DimerParams(n=64, solvent="soft", dt=DT)
    for j, nu in enumerate((0.25, 1.0)):
        t0 = time.perf_counter()
        reports = run(soft, nu, profile, 1000.0, 10 + j)
        plain, cv = reports["length"], reports["modified"]
        print(f"{nu:6.2f} {plain.mean:10.4f} +- {plain.mean_error_bar:.4f} "
              f"{plain.asym_variance:12.3f} {cv.asym_variance:12.3f} "
              f"{plain.asym_variance / cv.asym_variance:6.1f}   ({time.perf_counter() - t0:.0f} s)")

    if long_scan:
        print("\nresponse scan (slow): mean length vs shear amplitude")
        base = None
        for j, nu in enumerate((0.0, 0.5, 1.0)):
            reports = run(soft, nu, profile, 4000.0, 50 + j)
            cv = reports["modified"]
            if base is None:
                base = cv.mean
            rel = (cv.mean - base) / base
            print(f"  nu = {nu:4.2f}: modified mean = {cv.mean:.5f} "
                  f"+- {cv.mean_error_bar:.5f}  relative change {rel:+.4%}")
        print("  (the quadratic-response regime needs far longer runs to pin down)")


if __name__ == "__main__":
    main(long_scan="--long" in sys.argv[1:])
