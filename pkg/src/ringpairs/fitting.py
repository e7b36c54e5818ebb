"""Fit result container and the damped least-squares driver used by every fit."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import FitError

MAX_ITERATIONS = 200
XTOL = 1e-9


@dataclass
class FitResult:
    parameters: dict[str, float]
    sigmas: dict[str, float]
    residual_rms: float
    iterations: int
    converged: bool
    extras: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.parameters[name]

    def to_dict(self):
        out = {
            "parameters": dict(self.parameters),
            "sigmas": dict(self.sigmas),
            "residual_rms": self.residual_rms,
            "iterations": self.iterations,
            "converged": self.converged,
        }
        out.update(self.extras)
        return out


def covariance_from_jacobian(jac, scale=1.0):
    """(J^T J)^-1 scaled by ``scale``; pseudo-inverse keeps degenerate fits finite."""
    jtj = jac.T @ jac
    try:
        cov = np.linalg.inv(jtj)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(jtj)
    return cov * scale


def solve(residuals, x0, names, *, absolute_sigma=False, bounds=(-np.inf, np.inf), x_scale=1.0):
    """Levenberg-Marquardt (or trust-region when bounded) least squares.

    ``residuals`` must already be weighted.  With ``absolute_sigma`` the
    covariance is taken as-is (weights are true 1/sigma); otherwise it is
    rescaled by the reduced chi-square.
    """
    bounded = np.any(np.isfinite(bounds[0])) or np.any(np.isfinite(bounds[1]))
    method = "trf" if bounded else "lm"
    try:
        res = least_squares(
            residuals, np.asarray(x0, float), method=method, bounds=bounds,
            xtol=XTOL, ftol=1e-12, gtol=1e-12, x_scale=x_scale,
            max_nfev=MAX_ITERATIONS * (len(x0) + 1),
        )
    except (ValueError, FloatingPointError) as exc:
        raise FitError(f"least squares failed: {exc}") from exc
    if not np.all(np.isfinite(res.x)):
        raise FitError("fit produced non-finite parameters")
    converged = res.status > 0
    n, p = res.fun.size, res.x.size
    chi2 = float(res.fun @ res.fun)
    scale = 1.0 if absolute_sigma else (chi2 / (n - p) if n > p else 0.0)
    cov = covariance_from_jacobian(res.jac, scale)
    sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return res.x, sig, cov, FitResult(
        parameters=dict(zip(names, map(float, res.x))),
        sigmas=dict(zip(names, map(float, sig))),
        residual_rms=float(np.sqrt(chi2 / n)),
        iterations=int(res.njev) if res.njev is not None else -(-int(res.nfev) // (p + 1)),
        converged=bool(converged),
    )
