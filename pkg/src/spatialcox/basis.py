"""Sine basis on [0, L]: evaluation, design matrices, and quadrature projection.

The working basis is phi_p(t) = sin(pi * p * t / L), p = 1..M, which is
pairwise L2-orthogonal on [0, L] with squared norm L/2.  Internally the
package treats mode coefficients as coordinates with respect to the
orthonormalized basis sqrt(2/L) * phi_p; every evaluation/projection API
exposes both conventions through a ``normalized`` flag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientResolutionError, ParameterDomainError


@dataclass(frozen=True)
class BasisSpec:
    """Sine basis specification.

    Parameters
    ----------
    support_length : float
        Length L of the support interval [0, L] of the basis functions.
    n_modes : int
        Number of modes M retained.
    kind : str
        Basis family; only ``"sine"`` is implemented.
    """

    support_length: float
    n_modes: int
    kind: str = "sine"

    def __post_init__(self):
        if self.kind != "sine":
            raise ParameterDomainError(f"unsupported basis kind {self.kind!r}")
        if not self.support_length > 0:
            raise ParameterDomainError("support_length must be positive")
        if self.n_modes < 1:
            raise ParameterDomainError("n_modes must be >= 1")


def sine_basis_eval(spec: BasisSpec, p: int, t, normalized: bool = False):
    """Evaluate the p-th sine basis function at t.

    Returns sin(pi*p*t/L); with ``normalized=True`` the function is scaled
    by sqrt(2/L) to unit L2 norm.  Raises for p outside 1..M or t outside
    [0, L].
    """
    if not 1 <= p <= spec.n_modes:
        raise ParameterDomainError(f"mode index {p} outside 1..{spec.n_modes}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > spec.support_length):
        raise ParameterDomainError("t outside the basis support [0, L]")
    val = np.sin(np.pi * p * t / spec.support_length)
    if normalized:
        val = val * np.sqrt(2.0 / spec.support_length)
    return val if val.ndim else float(val)


def design_matrix(spec: BasisSpec, t_grid, normalized: bool = False) -> np.ndarray:
    """Matrix Phi with Phi[p-1, i] = phi_p(t_i), shape (M, len(t_grid))."""
    t = np.asarray(t_grid, dtype=float)
    modes = np.arange(1, spec.n_modes + 1)
    phi = np.sin(np.pi * np.outer(modes, t) / spec.support_length)
    if normalized:
        phi *= np.sqrt(2.0 / spec.support_length)
    return phi


def project_samples(t_grid, samples, spec: BasisSpec, normalized: bool = False) -> np.ndarray:
    """Project sampled curves onto the sine basis by trapezoidal quadrature.

    Parameters
    ----------
    t_grid : array, shape (T,)
        Sample abscissae; must cover [0, L] with at least 2M+1 points.
    samples : array, shape (..., T)
        Curve values on ``t_grid``; leading axes are batch axes.
    spec : BasisSpec
    normalized : bool
        False (default) returns coefficients c_p with f ~ sum_p c_p phi_p
        (raw sines), i.e. c_p = (2/L) * integral of f * phi_p.  True returns
        coordinates with respect to the orthonormalized basis,
        a_p = sqrt(L/2) * c_p.

    Returns
    -------
    array, shape (..., M)
    """
    t = np.asarray(t_grid, dtype=float)
    f = np.asarray(samples, dtype=float)
    if t.ndim != 1 or f.shape[-1] != t.size:
        raise ValueError("samples last axis must match t_grid length")
    if t.size < 2 * spec.n_modes + 1:
        raise InsufficientResolutionError(
            f"need >= {2 * spec.n_modes + 1} sample points for M={spec.n_modes}, got {t.size}"
        )
    tol = 1e-9 * spec.support_length
    if t[0] > tol or t[-1] < spec.support_length - tol:
        raise InsufficientResolutionError("t_grid must cover [0, support_length]")
    phi = design_matrix(spec, t)
    coeff = (2.0 / spec.support_length) * np.trapezoid(f[..., None, :] * phi, t, axis=-1)
    if normalized:
        coeff = coeff * np.sqrt(spec.support_length / 2.0)
    return coeff


def synthesize(coeffs, t_grid, spec: BasisSpec, normalized: bool = False) -> np.ndarray:
    """Inverse of :func:`project_samples`: sum_p coeffs[..., p-1] * phi_p(t)."""
    phi = design_matrix(spec, t_grid, normalized=normalized)
    return np.asarray(coeffs, dtype=float) @ phi
