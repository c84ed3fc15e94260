"""Component-function basis for color-change trajectories.

A trajectory is represented as ``y(t) = phi(t) @ beta`` where ``phi`` stacks
nine fixed functions of normalized time ``t`` in [0, 1]::

    1, t, t^2, 1/(t+1), sin(2 pi t), cos(2 pi t),
    t sin(2 pi t), t cos(2 pi t), ln(t + delta)

The log term is shifted by ``delta`` so the basis stays finite at ``t = 0``.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import IllConditionedWarning, OutOfDomain, RankDeficient

log = logging.getLogger(__name__)

N_BASIS = 9
DEFAULT_DELTA = 0.01
COND_WARN_THRESHOLD = 1e10

BASIS_NAMES = (
    "const",
    "t",
    "t^2",
    "1/(t+1)",
    "sin(2pi t)",
    "cos(2pi t)",
    "t sin(2pi t)",
    "t cos(2pi t)",
    "log(t+delta)",
)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Normalized-time series of Delta E values."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if times.ndim != 1 or values.ndim != 1:
            raise ValueError("times and values must be one-dimensional")
        if times.shape != values.shape:
            raise ValueError(
                f"times and values differ in length ({times.size} vs {values.size})"
            )
        if times.size < 2:
            raise ValueError("a trajectory needs at least 2 points")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.times.size

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return np.array_equal(self.times, other.times) and np.array_equal(
            self.values, other.values
        )

    __hash__ = None

    def with_values(self, values):
        return Trajectory(self.times, values)


def _check_domain(t):
    t = np.asarray(t, dtype=np.float64)
    if np.any(~np.isfinite(t)) or np.any(t < 0.0) or np.any(t > 1.0):
        bad = t[(~np.isfinite(t)) | (t < 0.0) | (t > 1.0)].ravel()[0]
        raise OutOfDomain(f"basis evaluated outside [0, 1] at t={bad!r}")
    return t


def design_matrix(times, delta=DEFAULT_DELTA):
    """Return the ``(len(times), 9)`` matrix whose rows are ``phi(t_i)``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    t = _check_domain(np.atleast_1d(times))
    w = 2.0 * np.pi * t
    s, c = np.sin(w), np.cos(w)
    return np.stack(
        [np.ones_like(t), t, t * t, 1.0 / (t + 1.0), s, c, t * s, t * c, np.log(t + delta)],
        axis=-1,
    )


def eval_basis(t, delta=DEFAULT_DELTA):
    """Evaluate the nine component functions at a single time ``t``."""
    if np.ndim(t) != 0:
        raise ValueError("eval_basis takes a scalar; use design_matrix for arrays")
    return design_matrix(float(t), delta)[0]


def _as_beta(beta):
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (N_BASIS,):
        raise ValueError(f"coefficient vector must have shape ({N_BASIS},), got {beta.shape}")
    if not np.all(np.isfinite(beta)):
        raise ValueError("coefficient vector has non-finite entries")
    return beta


def reconstruct(beta, times, delta=DEFAULT_DELTA):
    """Evaluate ``phi(t) @ beta`` on ``times`` and wrap it as a Trajectory."""
    beta = _as_beta(beta)
    times = np.asarray(times, dtype=np.float64)
    return Trajectory(times, design_matrix(times, delta) @ beta)


def fit_least_squares(traj, ridge=0.0, delta=DEFAULT_DELTA, n_terms=N_BASIS, refine=2):
    """Closed-form (ridge) least-squares coefficients for ``traj``.

    Solves ``(Phi^T Phi + ridge I) beta = Phi^T y`` with an LU solve (partial
    pivoting), followed by ``refine`` steps of iterative refinement. The Gram
    matrix of the full basis on a 73-point grid has condition number around
    6e9, which costs plain normal equations roughly five digits.

    ``n_terms`` restricts the fit to the leading basis columns; the returned
    vector is zero-padded to length 9.
    """
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    if not 1 <= n_terms <= N_BASIS:
        raise ValueError(f"n_terms must lie in [1, {N_BASIS}]")
    times = np.asarray(traj.times, dtype=np.float64)
    y = np.asarray(traj.values, dtype=np.float64)
    n_distinct = np.unique(times).size
    if ridge == 0 and n_distinct < n_terms:
        raise RankDeficient(
            f"{n_distinct} distinct time points cannot determine {n_terms} coefficients"
        )

    phi = design_matrix(times, delta)[:, :n_terms]
    gram = phi.T @ phi + ridge * np.eye(n_terms)
    cond = np.linalg.cond(gram)
    log.debug("basis Gram matrix condition number: %.3e", cond)
    if not np.isfinite(cond):
        raise RankDeficient("basis Gram matrix is singular")
    if cond > COND_WARN_THRESHOLD:
        warnings.warn(
            f"basis Gram matrix is ill-conditioned (cond={cond:.3e})",
            IllConditionedWarning,
            stacklevel=2,
        )

    beta = np.linalg.solve(gram, phi.T @ y)
    for _ in range(refine):
        # residual formed against the design matrix, not the Gram product
        correction = phi.T @ (y - phi @ beta) - ridge * beta
        beta = beta + np.linalg.solve(gram, correction)

    out = np.zeros(N_BASIS)
    out[:n_terms] = beta
    return out


def residual_sum_of_squares(traj, beta, delta=DEFAULT_DELTA):
    resid = np.asarray(traj.values) - design_matrix(traj.times, delta) @ _as_beta(beta)
    return float(resid @ resid)
