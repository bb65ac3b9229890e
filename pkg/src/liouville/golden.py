"""Calibrated constants backing the quantitative assertions.

The estimates behind the action-map bounds involve constants that depend only
on (n, kappa) but are not computable from their derivations; every inequality
we check therefore uses an empirical stand-in, calibrated once on the eps = 1
pendulum (plus the two-well potential for the multi-region bounds) and frozen
in data/golden.json. Tests and reports read them exclusively through this
module so a recalibration is a one-file change.

Keys
----
C_hat            master constant: coefficient bounds, |psi(0)| floor, measure
                 deficit deficit <= C_hat sqrt(eps) lambda |log lambda|
c_didE_interior  inf dI/dE * sqrt(eps) over librational/annular windows
c_didE_rotation  inf dI/dE * sqrt(E + eps) over rotation windows
deficit_band     max/min spread of the deficit ratio across lambda decades
C_window         analyticity-window constant: rho = sqrt(eps) lam |log lam|/C,
                 sigma = 1/(C |log lam|)
C_hess_first     |dE/dI| <= C sqrt(eps + |E|)
C_hess_second    |d2E/dI2| <= C / (lam |log lam|^3)
C_nf_drift       normal-form drift under a mu-perturbation: |g - gbar| <=
                 C sqrt(eps) mu and R-coefficient drift <= C mu
C_drift          |dI/dE - dIbar/dE| <= C mu/(lam sqrt(eps))
"""

import functools
import json
from pathlib import Path

GOLDEN_PATH = Path(__file__).parent / "data" / "golden.json"


@functools.lru_cache(maxsize=1)
def load():
    with open(GOLDEN_PATH) as fh:
        return json.load(fh)


def get(key):
    values = load()
    if key not in values:
        raise KeyError(f"no calibrated constant {key!r} in {GOLDEN_PATH.name}")
    return values[key]
