"""Weighted GLM fitters used by every estimation stage.

Three families are implemented from scratch on top of numpy linear algebra:

* logistic regression (treatment probability models),
* Gaussian linear regression with a residual SD (mediator density models),
* Poisson regression with a log link and HC0 sandwich standard errors
  (risk-ratio outcome model; binary outcomes are allowed).

All fitters accept nonnegative case weights that multiply the
log-likelihood. Coefficients are invariant to rescaling the weights by a
positive constant.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, gammaln

from .errors import (
    DegenerateDataError,
    DegenerateInputError,
    SeparationWarning,
    SingularDesignError,
)

MAX_ITER = 100
GRAD_TOL = 1e-8
DEVIANCE_RTOL = 1e-10
SEPARATION_BOUND = 30.0
_MU_EPS = 1e-12

SQRT_TWO_PI = math.sqrt(2.0 * math.pi)


class InsufficientDof(DegenerateDataError):
    """Weighted sample too small for the number of columns."""


@dataclass
class DesignMatrix:
    """Dense design matrix with column names and optional case weights.

    The first column is expected to be the intercept unless the caller
    deliberately suppresses it; nothing in the fitters assumes it beyond
    error messages.
    """

    values: np.ndarray
    names: list[str]
    case_weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DegenerateInputError("design matrix must be 2-dimensional")
        if len(self.names) != self.values.shape[1]:
            raise DegenerateInputError(
                f"{len(self.names)} names for {self.values.shape[1]} columns"
            )
        if not np.all(np.isfinite(self.values)):
            raise DegenerateInputError("design matrix contains non-finite entries")
        if self.case_weights is not None:
            self.case_weights = np.asarray(self.case_weights, dtype=np.float64)
            if self.case_weights.shape != (self.values.shape[0],):
                raise DegenerateInputError("case weight length does not match rows")
            if np.any(self.case_weights < 0) or not np.all(
                np.isfinite(self.case_weights)
            ):
                raise DegenerateInputError("case weights must be finite and >= 0")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_columns(
        cls,
        columns: dict[str, np.ndarray],
        intercept: bool = True,
        case_weights: np.ndarray | None = None,
    ) -> "DesignMatrix":
        names = (["intercept"] if intercept else []) + list(columns)
        cols = []
        n = len(next(iter(columns.values()))) if columns else 0
        if intercept:
            cols.append(np.ones(n))
        cols.extend(np.asarray(v, dtype=np.float64) for v in columns.values())
        return cls(np.column_stack(cols), names, case_weights)


@dataclass
class GlmFit:
    """Result of a single GLM fit."""

    family: str
    names: list[str]
    coef: np.ndarray
    se: np.ndarray | None
    robust_se: np.ndarray | None = None
    residual_sd: float | None = None
    converged: bool = True
    iterations: int = 0
    loglik: float = float("nan")
    n_obs: int = 0
    sum_weights: float = 0.0
    warnings_: list[str] = field(default_factory=list)

    def linear_predictor(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.coef

    def predict_mean(self, X: np.ndarray) -> np.ndarray:
        eta = self.linear_predictor(X)
        if self.family == "logistic":
            return expit(eta)
        if self.family == "poisson":
            return np.exp(eta)
        return eta


def _resolve_weights(X: DesignMatrix, case_weights) -> np.ndarray:
    if case_weights is not None:
        w = np.asarray(case_weights, dtype=np.float64)
    elif X.case_weights is not None:
        w = X.case_weights
    else:
        w = np.ones(X.n_rows)
    if w.shape != (X.n_rows,):
        raise DegenerateInputError("case weight length does not match design rows")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DegenerateInputError("case weights must be finite and >= 0")
    if w.sum() <= 0:
        raise DegenerateDataError("all case weights are zero")
    return w


def _solve_weighted(X: np.ndarray, wdiag: np.ndarray, z: np.ndarray) -> np.ndarray:
    xtw = X.T * wdiag
    gram = xtw @ X
    rhs = xtw @ z
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise SingularDesignError(
            "weighted design matrix is singular (collinear columns?)"
        ) from exc
    out = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
    return out


def _inverse_gram(X: np.ndarray, wdiag: np.ndarray) -> np.ndarray:
    gram = (X.T * wdiag) @ X
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise SingularDesignError("information matrix is singular") from exc
    eye = np.eye(gram.shape[0])
    return np.linalg.solve(chol.T, np.linalg.solve(chol, eye))


def loglik_and_gradient(
    family: str,
    X: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    beta: np.ndarray,
    residual_sd: float = 1.0,
) -> tuple[float, np.ndarray]:
    """Weighted log-likelihood and its gradient at an arbitrary beta.

    For the linear family the Gaussian likelihood is evaluated at the
    supplied ``residual_sd``. Gradients are exact for the canonical links
    used here, so IRLS optima zero them out.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    eta = X @ beta
    if family == "logistic":
        mu = np.clip(expit(eta), _MU_EPS, 1.0 - _MU_EPS)
        ll = float(np.sum(w * (y * np.log(mu) + (1.0 - y) * np.log(1.0 - mu))))
        grad = X.T @ (w * (y - mu))
    elif family == "poisson":
        mu = np.exp(eta)
        ll = float(np.sum(w * (y * eta - mu - gammaln(y + 1.0))))
        grad = X.T @ (w * (y - mu))
    elif family == "linear":
        sd2 = residual_sd**2
        resid = y - eta
        ll = float(
            -0.5 * np.sum(w * (resid**2 / sd2 + math.log(2.0 * math.pi * sd2)))
        )
        grad = X.T @ (w * resid) / sd2
    else:
        raise ValueError(f"unknown family {family!r}")
    return ll, grad


def _irls(
    family: str,
    X: np.ndarray,
    y: np.ndarray,
    w: np.ndarray,
    start: np.ndarray | None = None,
):
    """Run IRLS for a canonical-link family; returns (beta, wdiag, mu, info).

    ``start`` warm-starts the iteration; the optimum is unchanged, only the
    path to it. Convergence still requires the usual tolerances.
    """
    n, p = X.shape
    if start is not None and np.all(np.isfinite(start)) and len(start) == p:
        eta = X @ np.asarray(start, dtype=np.float64)
    else:
        ybar = float(np.sum(w * y) / np.sum(w))
        if family == "logistic":
            eta = np.full(n, math.log(max(ybar, 1e-6) / max(1.0 - ybar, 1e-6)))
        else:
            eta = np.full(n, math.log(max(ybar, 1e-6)))
    beta = None
    deviance = np.inf
    converged = False
    separated = False
    iterations = 0
    for iterations in range(1, MAX_ITER + 1):
        if family == "logistic":
            mu = np.clip(expit(eta), _MU_EPS, 1.0 - _MU_EPS)
            var = mu * (1.0 - mu)
        else:
            mu = np.maximum(np.exp(eta), _MU_EPS)
            var = mu
        wdiag = w * var
        z = eta + (y - mu) / var
        beta = _solve_weighted(X, wdiag, z)
        eta = X @ beta
        if np.max(np.abs(beta)) > SEPARATION_BOUND:
            separated = True
            break
        if family == "logistic":
            mu = np.clip(expit(eta), _MU_EPS, 1.0 - _MU_EPS)
            new_dev = -2.0 * float(
                np.sum(w * (y * np.log(mu) + (1.0 - y) * np.log(1.0 - mu)))
            )
        else:
            mu = np.maximum(np.exp(eta), _MU_EPS)
            new_dev = -2.0 * float(np.sum(w * (y * eta - mu)))
        grad = X.T @ (w * (y - mu))
        rel = abs(new_dev - deviance) / max(abs(new_dev), 1.0)
        deviance = new_dev
        if np.max(np.abs(grad)) < GRAD_TOL or rel < DEVIANCE_RTOL:
            converged = True
            break
    if family == "logistic":
        mu = np.clip(expit(eta), _MU_EPS, 1.0 - _MU_EPS)
        var = mu * (1.0 - mu)
    else:
        mu = np.maximum(np.exp(eta), _MU_EPS)
        var = mu
    return beta, w * var, mu, converged and not separated, separated, iterations


def fit_logistic(
    X: DesignMatrix,
    y: np.ndarray,
    case_weights: np.ndarray | None = None,
    start: np.ndarray | None = None,
    compute_se: bool = True,
) -> GlmFit:
    """Weighted logistic regression via IRLS.

    Raises :class:`DegenerateDataError` when the response is constant and
    emits a :class:`SeparationWarning` (with ``converged=False``) when
    coefficients diverge past ``SEPARATION_BOUND``. ``compute_se=False``
    skips standard errors and the log-likelihood (probability-model use).
    """
    y = np.asarray(y, dtype=np.float64)
    if not np.all((y == 0.0) | (y == 1.0)):
        raise DegenerateInputError("logistic response must be coded 0/1")
    w = _resolve_weights(X, case_weights)
    active = y[w > 0]
    if active.size == 0 or np.all(active == active[0]):
        raise DegenerateDataError("response is constant; logistic fit is degenerate")
    beta, wdiag, mu, converged, separated, iters = _irls(
        "logistic", X.values, y, w, start=start
    )
    fit = GlmFit(
        family="logistic",
        names=list(X.names),
        coef=beta,
        se=np.sqrt(np.diag(_inverse_gram(X.values, wdiag))) if compute_se else None,
        converged=converged,
        iterations=iters,
        loglik=loglik_and_gradient("logistic", X.values, y, w, beta)[0]
        if compute_se
        else float("nan"),
        n_obs=X.n_rows,
        sum_weights=float(w.sum()),
    )
    if separated:
        msg = "possible separation: |coefficient| exceeded 30"
        fit.warnings_.append(msg)
        warnings.warn(msg, SeparationWarning, stacklevel=2)
    return fit


def fit_linear(
    X: DesignMatrix,
    y: np.ndarray,
    case_weights: np.ndarray | None = None,
    compute_se: bool = True,
) -> GlmFit:
    """Weighted least squares with residual SD, solved by QR (lstsq)."""
    y = np.asarray(y, dtype=np.float64)
    w = _resolve_weights(X, case_weights)
    sw = np.sqrt(w)
    A = X.values * sw[:, None]
    b = y * sw
    coef, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    if rank < X.n_cols:
        raise SingularDesignError(
            f"design matrix has rank {rank} < {X.n_cols} columns"
        )
    resid = y - X.values @ coef
    rss = float(np.sum(w * resid**2))
    dof = float(w.sum()) - X.n_cols
    if dof <= 0:
        raise InsufficientDof(
            f"effective sample {w.sum():.1f} too small for {X.n_cols} columns"
        )
    residual_sd = math.sqrt(max(rss, 0.0) / dof)
    if not compute_se:
        ll, se = float("nan"), None
    elif residual_sd > 0:
        ll = loglik_and_gradient("linear", X.values, y, w, coef, residual_sd)[0]
        se = residual_sd * np.sqrt(np.diag(_inverse_gram(X.values, w)))
    else:
        ll = float("inf")
        se = np.zeros(X.n_cols)
    return GlmFit(
        family="linear",
        names=list(X.names),
        coef=coef,
        se=se,
        residual_sd=residual_sd,
        converged=True,
        iterations=1,
        loglik=ll,
        n_obs=X.n_rows,
        sum_weights=float(w.sum()),
    )


def fit_poisson_robust(
    X: DesignMatrix,
    y: np.ndarray,
    case_weights: np.ndarray | None = None,
    cluster: np.ndarray | None = None,
    start: np.ndarray | None = None,
) -> GlmFit:
    """Log-link Poisson regression with HC0 sandwich standard errors.

    Binary responses are allowed; the slope on a binary covariate is then a
    log risk ratio. Passing ``cluster`` switches the sandwich meat to
    cluster-summed scores.
    """
    y = np.asarray(y, dtype=np.float64)
    if np.any(y < 0):
        raise DegenerateInputError("poisson response must be nonnegative")
    w = _resolve_weights(X, case_weights)
    if np.sum(w * y) <= 0:
        raise DegenerateDataError("response is all zero; poisson fit is degenerate")
    beta, wdiag, mu, converged, separated, iters = _irls(
        "poisson", X.values, y, w, start=start
    )
    bread_inv = _inverse_gram(X.values, wdiag)
    scores = X.values * (w * (y - mu))[:, None]
    if cluster is not None:
        cluster = np.asarray(cluster)
        order = np.argsort(cluster, kind="stable")
        boundaries = np.flatnonzero(
            np.r_[True, cluster[order][1:] != cluster[order][:-1]]
        )
        grouped = np.add.reduceat(scores[order], boundaries, axis=0)
        meat = grouped.T @ grouped
    else:
        meat = scores.T @ scores
    sandwich = bread_inv @ meat @ bread_inv
    fit = GlmFit(
        family="poisson",
        names=list(X.names),
        coef=beta,
        se=np.sqrt(np.maximum(np.diag(bread_inv), 0.0)),
        robust_se=np.sqrt(np.maximum(np.diag(sandwich), 0.0)),
        converged=converged,
        iterations=iters,
        loglik=loglik_and_gradient("poisson", X.values, y, w, beta)[0],
        n_obs=X.n_rows,
        sum_weights=float(w.sum()),
    )
    if separated:
        msg = "poisson coefficients diverged past 30; flagged as non-converged"
        fit.warnings_.append(msg)
        warnings.warn(msg, SeparationWarning, stacklevel=2)
    return fit


def gaussian_density(value, mean, sd):
    """Normal pdf evaluated elementwise; ``sd`` must be strictly positive."""
    sd_arr = np.asarray(sd, dtype=np.float64)
    if np.any(sd_arr <= 0):
        raise DegenerateInputError("gaussian_density requires sd > 0")
    z = (np.asarray(value, dtype=np.float64) - np.asarray(mean, dtype=np.float64)) / sd_arr
    return np.exp(-0.5 * z**2) / (sd_arr * SQRT_TWO_PI)
