"""RCAC on a one-line plant: what the filter sign does.

The plant is a discrete integrator x+ = x + 0.5 u that should track r = 1.
The performance variable is z = r - x, so a positive u lowers z.  RCAC
learns a proportional gain u = theta * z from scratch.  With sigma < 0 the
retrospective cost points the gain the right way and z decays; flipping
the sign makes the same algorithm push the wrong way.
"""
import numpy as np

from fwrcac.rcac import RcacHyper, RcacState, build_regressor_p, rcac_update


def track(sigma, steps=60):
    hyper = RcacHyper(P0=1.0, Ru=0.001, Rz=1.0, sigma=sigma, theta_max=20.0)
    state = RcacState.initial(1, hyper)
    x, zs, thetas = 0.0, [], []
    for _ in range(steps):
        z = 1.0 - x
        state, u = rcac_update(state, z, build_regressor_p(z), hyper)
        x += 0.5 * u
        zs.append(z)
        thetas.append(state.theta[0])
    return np.array(zs), np.array(thetas)


for sigma in (-0.1, 0.1):
    z, theta = track(sigma)
    print(f"sigma = {sigma:+.1f}")
    for k in (0, 1, 2, 5, 10, 20, 59):
        print(f"  step {k:2d}   z = {z[k]: .3e}   theta = {theta[k]: .3f}")

# The matching sign drives z to zero geometrically.  The wrong sign
# grows the error until the gain bound stops the drift.
