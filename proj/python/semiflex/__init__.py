"""Semiflexible chains in random environments: simulation, diffusion constants
and mixing bounds. Thin wrapper over the C++ core in ``semiflex._core``."""

import json

import numpy as np

from . import _core

__version__ = _core.__version__
DomainError = _core.DomainError


def _doc(spec):
    return spec if isinstance(spec, str) else json.dumps(spec)


def preset_names():
    return list(_core.preset_names())


def preset(name):
    return json.loads(_core.preset(name))


def law(name, dim=None):
    return json.loads(_core.law_shorthand(name, dim))


def disorder(name, dim=None):
    return json.loads(_core.disorder_shorthand(name, dim))


def moments(law):
    """(r_bar, E[r (x) r]) as numpy arrays."""
    return _core.moments(_doc(law))


def check_hypothesis(law):
    return json.loads(_core.check_hypothesis(_doc(law)))


def sigma2_series(law, disorder, seed=1, L=10000, tolerance=1e-10, threads=1):
    return json.loads(_core.sigma2_series(_doc(law), _doc(disorder), seed, L, tolerance, threads))


def sigma2_cI(c, d):
    return _core.sigma2_cI(c, d)


def sigma2_iid_closed(rbar, omega_bar):
    return _core.sigma2_iid_closed(np.asarray(rbar, float), np.asarray(omega_bar, float))


def sigma2_oracle_2d(law, disorder, seed=1):
    return json.loads(_core.sigma2_oracle_2d(_doc(law), _doc(disorder), seed))


def drift_bound_2d(law):
    return _core.drift_bound_2d(_doc(law))


def simulate_chain(law, disorder, v0, n, seed=1, disorder_seed=1):
    """Positions X_0..X_n as an (n+1, d) array."""
    return _core.simulate_chain(_doc(law), _doc(disorder), np.asarray(v0, float), n, seed, disorder_seed)


def simulate_endpoints(law, disorder, v0, checkpoints, replicas, seed=1, disorder_seed=1, threads=1):
    """One (replicas, d) array per checkpoint."""
    return _core.simulate_endpoints(_doc(law), _doc(disorder), np.asarray(v0, float), list(checkpoints),
                                    replicas, seed, disorder_seed, threads)


def empirical_cov(endpoints, n):
    return json.loads(_core.empirical_cov(np.asarray(endpoints, float), n))


def clt_from_endpoints(endpoints, n, sigma2, center=None, alpha=0.01):
    c = None if center is None else np.asarray(center, float)
    return json.loads(_core.clt_from_endpoints(np.asarray(endpoints, float), n, sigma2, c, alpha))


def mixing_report(law, ks, cutoff=4096):
    return json.loads(_core.mixing_report(_doc(law), list(ks), cutoff))


def tv_to_haar_so2(law, omega_angles, k):
    return json.loads(_core.tv_to_haar_so2(_doc(law), list(omega_angles), k))
