"""SARH(1) lattice simulation.

Per mode k the coefficient field follows the quarter-plane autoregression

    X_k(i, j) = l1 X_k(i-1, j) + l2 X_k(i, j-1) + l3 X_k(i-1, j-1) + eps_k(i, j)

with Gaussian white innovations, independent across modes and sites.  The
row recursion is solved with a first-order linear filter along columns,
which is exact and keeps the sweep in compiled code.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .basis import BasisSpec
from .errors import ParameterDomainError, StationarityError
from .field import CoeffField

THETA_BOX_EXAMPLE1 = np.array([[0.7, 4.0]])
THETA_BOX_EXAMPLE2 = np.array([[0.7, 1.3], [1.3, 1.9], [1.2, 1.8], [0.9, 1.5]])


def eigenvalues_example1(theta: float, k: int) -> tuple[float, float, float]:
    """One-parameter family: l1 = th^2/(pi^2 k^1.1), l2 = th^2/(pi^2 k^1.2), l3 = -l1*l2."""
    if not THETA_BOX_EXAMPLE1[0, 0] <= theta <= THETA_BOX_EXAMPLE1[0, 1]:
        raise ParameterDomainError(f"theta={theta} outside [0.7, 4]")
    if k < 1:
        raise ParameterDomainError("mode index k must be >= 1")
    l1 = theta**2 / (np.pi**2 * k**1.1)
    l2 = theta**2 / (np.pi**2 * k**1.2)
    return l1, l2, -l1 * l2


def eigenvalues_example2(theta, k: int) -> tuple[float, float, float]:
    """Two-operator scale/location family: l_q = th_{q,1}/(k + th_{q,2}), l3 = -l1*l2.

    ``theta`` is the vector (th_{1,1}, th_{1,2}, th_{2,1}, th_{2,2}).
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (4,):
        raise ParameterDomainError("example2 theta must have length 4")
    if np.any(theta < THETA_BOX_EXAMPLE2[:, 0]) or np.any(theta > THETA_BOX_EXAMPLE2[:, 1]):
        raise ParameterDomainError(f"theta={theta} outside the example2 box")
    if k < 1:
        raise ParameterDomainError("mode index k must be >= 1")
    l1 = theta[0] / (k + theta[1])
    l2 = theta[2] / (k + theta[3])
    return l1, l2, -l1 * l2


def _log_denominator_mean(l1: float, l2: float, l3: float, n: int = 4096) -> float:
    # (1/(2pi)^2) * integral of log|1 - l1 e^{iw1} - l2 e^{iw2} - l3 e^{i(w1+w2)}|^2,
    # reduced to 1-D: the inner w2 average of log|A - B z2|^2 is 2 log max(|A|,|B|).
    w = -np.pi + 2.0 * np.pi * np.arange(n) / n
    a = np.abs(1.0 - l1 * np.exp(1j * w))
    b = np.abs(l2 + l3 * np.exp(1j * w))
    return float(np.mean(2.0 * np.log(np.maximum(np.maximum(a, b), 1e-300))))


def c2_innovation_sd(triples) -> np.ndarray:
    """Innovation standard deviations making the field's spectral family C2-normalized.

    The spectral prefactor solving the C2 log-integral equation is
    sigma2_k = (2*pi)^-2 * exp(mean log|D_k|^2); the matching innovation
    variance of the state equation is (2*pi)^2 * sigma2_k.  For the example
    families (l3 = -l1*l2 with |l1|,|l2| < 1) this equals 1 exactly.
    """
    triples = np.atleast_2d(np.asarray(triples, dtype=float))
    return np.array([np.sqrt(np.exp(_log_denominator_mean(*t))) for t in triples])


@dataclass(frozen=True)
class Sarh1Params:
    """Parameters of the per-mode SARH(1) recursions.

    family : {"example1", "example2", "custom"}
    theta : parameter vector (length 1, 4, or 3*M for "custom" per-mode triples)
    n_modes : M
    noise_sd : per-mode innovation standard deviations, or None for the
        C2-normalizing defaults from :func:`c2_innovation_sd`.
    """

    family: str
    theta: np.ndarray
    n_modes: int
    noise_sd: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "theta", np.atleast_1d(np.asarray(self.theta, dtype=float)))
        if self.family not in ("example1", "example2", "custom"):
            raise ParameterDomainError(f"unknown family {self.family!r}")
        if self.family == "custom" and self.theta.size != 3 * self.n_modes:
            raise ParameterDomainError("custom family needs 3*M theta entries")
        if self.noise_sd is not None:
            sd = np.asarray(self.noise_sd, dtype=float)
            if sd.shape != (self.n_modes,) or np.any(sd < 0):
                raise ParameterDomainError("noise_sd must be M nonnegative values")
            object.__setattr__(self, "noise_sd", sd)

    def eig_triples(self) -> np.ndarray:
        """Eigenvalue triples (l1, l2, l3) per mode, shape (M, 3)."""
        if self.family == "example1":
            return np.array([eigenvalues_example1(float(self.theta[0]), k)
                             for k in range(1, self.n_modes + 1)])
        if self.family == "example2":
            return np.array([eigenvalues_example2(self.theta, k)
                             for k in range(1, self.n_modes + 1)])
        return self.theta.reshape(self.n_modes, 3)

    def innovation_sd(self) -> np.ndarray:
        if self.noise_sd is not None:
            return self.noise_sd
        return c2_innovation_sd(self.eig_triples())


def torus_min_abs_denominator(triple, n: int = 256) -> float:
    """min over the 256^2 torus grid |z1|=|z2|=1 of |1 - l1 z1 - l2 z2 - l3 z1 z2|."""
    l1, l2, l3 = triple
    w = 2.0 * np.pi * np.arange(n) / n
    z = np.exp(1j * w)
    a = 1.0 - l1 * z[:, None] - l2 * z[None, :] - l3 * z[:, None] * z[None, :]
    return float(np.min(np.abs(a)))


def has_torus_zero(triple, n: int = 256) -> bool:
    """Numeric zero check on the torus grid, thresholded by the grid spacing.

    A simple off-grid zero leaves a grid minimum of order |gradient| * h, so
    the cutoff scales with pi * (|l1| + |l2| + 2 |l3|) / n rather than a
    fixed epsilon.
    """
    l1, l2, l3 = triple
    tol = max(1e-9, np.pi * (abs(l1) + abs(l2) + 2.0 * abs(l3)) / n)
    return torus_min_abs_denominator(triple, n) < tol


def check_stationarity(params: Sarh1Params) -> tuple[bool, np.ndarray]:
    """Sufficient stationarity bound sum_q |l_{k,q}| < 1, applied mode-wise.

    Returns (all modes pass, per-mode margins 1 - sum_q |l_{k,q}|).
    """
    triples = params.eig_triples()
    margins = 1.0 - np.abs(triples).sum(axis=1)
    return bool(np.all(margins > 0)), margins


def simulate_sarh1(params: Sarh1Params, dims, burn_in: int = 100,
                   seed: int = 0, basis: BasisSpec | None = None) -> CoeffField:
    """Generate a stationary zero-mean Gaussian SARH(1) coefficient field.

    A margin of ``burn_in`` rows and columns is generated with zero boundary
    initialization and discarded, leaving the requested ``dims`` block.  The
    output is bit-identical for fixed (params, dims, burn_in, seed).

    When the crude bound of :func:`check_stationarity` fails for a mode but
    the AR polynomial has no zeros on the torus grid, a warning is emitted
    and simulation proceeds (the example-2 true parameters are of this
    kind); a near-zero on the torus raises :class:`StationarityError` with
    the offending mode index.
    """
    n1, n2 = int(dims[0]), int(dims[1])
    if n1 < 2 or n2 < 2:
        raise ParameterDomainError("dims must be at least (2, 2)")
    if burn_in < 0:
        raise ParameterDomainError("burn_in must be >= 0")
    triples = params.eig_triples()
    ok, margins = check_stationarity(params)
    if not ok:
        for k in np.nonzero(margins <= 0)[0]:
            if has_torus_zero(triples[k]):
                raise StationarityError(
                    f"mode {k + 1}: AR polynomial vanishes on the unit torus", mode=k + 1)
        warnings.warn(
            "eigenvalue sum bound exceeded for modes "
            f"{[int(k) + 1 for k in np.nonzero(margins <= 0)[0]]}; "
            "torus grid check found no zeros, proceeding", RuntimeWarning)

    sds = params.innovation_sd()
    rng = np.random.default_rng(seed)
    r1, r2 = n1 + burn_in, n2 + burn_in
    out = np.empty((n1, n2, params.n_modes))
    for k in range(params.n_modes):
        l1, l2, l3 = triples[k]
        eps = rng.normal(0.0, sds[k], size=(r1, r2))
        x = np.zeros((r1, r2))
        prev = np.zeros(r2)
        for i in range(r1):
            b = eps[i]
            b += l1 * prev
            b[1:] += l3 * prev[:-1]
            # X(i, j) = l2 X(i, j-1) + b(j): first-order recursion along the row
            x[i] = lfilter([1.0], [1.0, -l2], b)
            prev = x[i]
        out[:, :, k] = x[burn_in:, burn_in:]
    if basis is None:
        basis = BasisSpec(support_length=1.0, n_modes=params.n_modes)
    return CoeffField(out, basis)
