"""Single-output Gaussian-process regression with an RBF kernel.

Provides exact posterior inference with fixed or per-point observation noise,
marginal-likelihood hyperparameter search, a two-stage heteroscedastic noise
model (a second GP regresses the log of an empirical variance estimate and
feeds it back as per-point noise), and elementwise Gaussian fusion.

Conventions
-----------
Noise arguments are variances, not standard deviations. Targets are centered
by their mean at fit time and the offset is restored at prediction, so the
prior mean is the constant data mean. A small jitter proportional to the mean
kernel diagonal is always added before factorization and escalated tenfold on
failure up to a hard ceiling.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.linalg import LinAlgError
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize

from .errors import (InconsistentConstraintError, InvalidInputError,
                     InsufficientDataError, NotFittedError,
                     NumericalConditioningError, OptimizationFailureError)

# Jitter added to the Gram diagonal, as fractions of mean(diag K).
JITTER_START_FRAC = 1e-10
JITTER_MAX_FRAC = 1e-4

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class KernelParams:
    """RBF kernel k(t, t') = signal_std^2 * exp(-(t - t')^2 / (2 l^2))."""

    length_scale: float
    signal_std: float

    def __post_init__(self):
        if not (self.length_scale > 0.0 and math.isfinite(self.length_scale)):
            raise InvalidInputError("length_scale must be positive and finite")
        if not (self.signal_std > 0.0 and math.isfinite(self.signal_std)):
            raise InvalidInputError("signal_std must be positive and finite")


@dataclass(frozen=True)
class TrainingSet:
    """Paired inputs and targets. Duplicate inputs are allowed."""

    t: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.t, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if t.ndim != 1 or y.ndim != 1:
            raise InvalidInputError("training inputs and targets must be 1-d")
        if t.shape != y.shape:
            raise InvalidInputError("training inputs and targets differ in length")
        if t.size < 1:
            raise InvalidInputError("training set must contain at least one point")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
            raise InvalidInputError("training data must be finite")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "y", y)
        t.setflags(write=False)
        y.setflags(write=False)

    def __len__(self):
        return self.t.size


@dataclass
class PosteriorPrediction:
    """Pointwise posterior mean and variance, optional full covariance."""

    mean: np.ndarray
    var: np.ndarray
    cov: np.ndarray | None = None


def rbf_kernel(ta, tb, params: KernelParams) -> np.ndarray:
    """Gram matrix of the RBF kernel between two input vectors."""
    ta = np.atleast_1d(np.asarray(ta, dtype=float))
    tb = np.atleast_1d(np.asarray(tb, dtype=float))
    d = (ta[:, None] - tb[None, :]) / params.length_scale
    return params.signal_std ** 2 * np.exp(-0.5 * d * d)


def _as_noise_vector(noise, n):
    """Validate a scalar-or-vector noise variance and expand it to length n."""
    if np.isscalar(noise) or getattr(noise, "ndim", None) == 0:
        val = float(noise)
        if not (val >= 0.0 and math.isfinite(val)):
            raise InvalidInputError("noise variance must be finite and >= 0")
        return np.full(n, val), True
    vec = np.asarray(noise, dtype=float)
    if vec.shape != (n,):
        raise InvalidInputError("noise vector length must match the training set")
    if not np.all(np.isfinite(vec)) or np.any(vec < 0.0):
        raise InvalidInputError("noise variances must be finite and >= 0")
    return vec, False


def _check_singular_duplicates(t, r):
    # Exact duplicate inputs with zero noise make the Gram matrix singular in
    # exact arithmetic; refuse them instead of letting jitter paper over it.
    order = np.argsort(t, kind="stable")
    ts, rs = t[order], r[order]
    same = ts[1:] == ts[:-1]
    if np.any(same & (rs[1:] == 0.0) & (rs[:-1] == 0.0)):
        raise NumericalConditioningError(
            "duplicate timestamps with zero noise produce a singular Gram matrix")


def _factorize(K, r_vec):
    """Cholesky of K + diag(r) + jitter*I with escalating jitter."""
    base = float(np.mean(np.diag(K)))
    if base <= 0.0:
        base = 1.0
    n = K.shape[0]
    Ky = K + np.diag(r_vec)
    jitter = JITTER_START_FRAC * base
    ceiling = JITTER_MAX_FRAC * base
    while True:
        try:
            chol = cho_factor(Ky + jitter * np.eye(n), lower=True)
            return chol, jitter
        except LinAlgError:
            jitter *= 10.0
            if jitter > ceiling * (1.0 + 1e-12):
                raise NumericalConditioningError(
                    "Gram matrix stayed non-positive-definite at the jitter ceiling")


@dataclass
class GPModel:
    """Fitted homoscedastic (or fixed per-point noise) GP.

    Instances are immutable by convention once fit_gp returns them; the
    cached factorization is reused by every predict call.
    """

    train: TrainingSet
    params: KernelParams
    noise: float | np.ndarray
    mean_offset: float = 0.0
    jitter: float = 0.0
    _noise_vec: np.ndarray | None = field(default=None, repr=False)
    _chol: tuple | None = field(default=None, repr=False)
    _alpha: np.ndarray | None = field(default=None, repr=False)

    def _require_fitted(self):
        if self._chol is None or self._alpha is None:
            raise NotFittedError("model has no cached factorization; use fit_gp")

    def predict(self, ts, full_cov: bool = False) -> PosteriorPrediction:
        """Posterior mean and variance of the latent function at ``ts``.

        The variance does not include observation noise at the query points.
        """
        self._require_fitted()
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if not np.all(np.isfinite(ts)):
            raise InvalidInputError("query inputs must be finite")
        Ks = rbf_kernel(ts, self.train.t, self.params)
        mean = self.mean_offset + Ks @ self._alpha
        v = cho_solve(self._chol, Ks.T)
        if full_cov:
            cov = rbf_kernel(ts, ts, self.params) - Ks @ v
            var = np.diag(cov).copy()
        else:
            cov = None
            var = self.params.signal_std ** 2 - np.einsum("ij,ji->i", Ks, v)
        if np.any(var < -1e-8 * self.params.signal_std ** 2):
            warnings.warn("posterior variance dipped below the conditioning "
                          "tolerance and was clamped to zero", RuntimeWarning)
        var = np.maximum(var, 0.0)
        return PosteriorPrediction(mean=mean, var=var, cov=cov)

    def log_marginal_likelihood(self) -> float:
        self._require_fitted()
        resid = self.train.y - self.mean_offset
        n = len(self.train)
        log_det = 2.0 * float(np.sum(np.log(np.diag(self._chol[0]))))
        return float(-0.5 * resid @ self._alpha - 0.5 * log_det - 0.5 * n * LOG_2PI)


def fit_gp(train: TrainingSet, params: KernelParams, noise=0.0) -> GPModel:
    """Fit a GP with fixed hyperparameters and a known noise variance.

    ``noise`` is a scalar variance or a per-point vector. Targets are
    centered by their mean; the offset is restored at prediction time.
    """
    if not isinstance(train, TrainingSet):
        train = TrainingSet(*train)
    n = len(train)
    r_vec, _ = _as_noise_vector(noise, n)
    _check_singular_duplicates(train.t, r_vec)
    offset = float(np.mean(train.y))
    K = rbf_kernel(train.t, train.t, params)
    chol, jitter = _factorize(K, r_vec)
    alpha = cho_solve(chol, train.y - offset)
    return GPModel(train=train, params=params, noise=noise, mean_offset=offset,
                   jitter=jitter, _noise_vec=r_vec, _chol=chol, _alpha=alpha)


def log_marginal_likelihood(model: GPModel) -> float:
    return model.log_marginal_likelihood()


def lml_gradient(model: GPModel) -> np.ndarray:
    """Gradient of the log marginal likelihood.

    Components are with respect to (log length_scale, log signal_std,
    log noise_std), so the model must carry a scalar positive noise variance.
    """
    model._require_fitted()
    if model._noise_vec is None or np.ptp(model._noise_vec) != 0.0:
        raise InvalidInputError("gradient requires a scalar noise variance")
    sigma_n2 = float(model._noise_vec[0])
    if sigma_n2 <= 0.0:
        raise InvalidInputError("gradient requires a positive noise variance")
    t = model.train.t
    n = t.size
    Kf = rbf_kernel(t, t, model.params)
    Kinv = cho_solve(model._chol, np.eye(n))
    alpha = model._alpha
    A = np.outer(alpha, alpha) - Kinv

    d = (t[:, None] - t[None, :]) / model.params.length_scale
    dK_dlog_l = Kf * d * d
    dK_dlog_sf = 2.0 * Kf
    grad = np.empty(3)
    grad[0] = 0.5 * float(np.sum(A * dK_dlog_l))
    grad[1] = 0.5 * float(np.sum(A * dK_dlog_sf))
    # d K_y / d log sigma_n = 2 sigma_n^2 I, so only the diagonal of A matters.
    grad[2] = 0.5 * float(np.trace(A)) * 2.0 * sigma_n2
    return grad


# ---------------------------------------------------------------------------
# Hyperparameter search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OptConfig:
    """Multi-start L-BFGS-B search over log hyperparameters.

    Bounds left as None are derived from the data: length scale within
    [1e-3, 10 * range(t)], signal std within [1e-3, 10] * std(y), noise std
    within [1e-6, 3] * std(y). Bounds are (low, high) in the natural scale.
    """

    n_starts: int = 8
    seed: int = 0
    max_iter: int = 60
    length_scale_bounds: tuple[float, float] | None = None
    signal_std_bounds: tuple[float, float] | None = None
    noise_std_bounds: tuple[float, float] | None = None


@dataclass(frozen=True)
class OptResult:
    params: KernelParams
    noise: float | np.ndarray
    lml: float


class _Collapsed:
    """Sufficient-statistics reduction of replicated inputs.

    Observing a group of n_i targets at the same input with equal noise r is
    exactly equivalent to observing their mean with noise r / n_i, up to a
    correction term that involves only the within-group scatter. The search
    below runs on the reduced system, which keeps the cubic factorization
    cost tied to the number of distinct inputs.
    """

    def __init__(self, t, resid, r_vec):
        order = np.argsort(t, kind="stable")
        ts, ys, rs = t[order], resid[order], r_vec[order]
        boundaries = np.concatenate([[0], np.nonzero(ts[1:] != ts[:-1])[0] + 1,
                                     [ts.size]])
        self.collapsible = True
        u, ybar, counts, scatter, rbar = [], [], [], [], []
        for a, b in zip(boundaries[:-1], boundaries[1:]):
            group_r = rs[a:b]
            if np.ptp(group_r) != 0.0:
                # Unequal noise inside a duplicate group: no exact reduction.
                self.collapsible = False
                break
            m = float(np.mean(ys[a:b]))
            u.append(ts[a])
            ybar.append(m)
            counts.append(b - a)
            scatter.append(float(np.sum((ys[a:b] - m) ** 2)))
            rbar.append(float(group_r[0]))
        if self.collapsible:
            self.u = np.array(u)
            self.ybar = np.array(ybar)
            self.counts = np.array(counts, dtype=float)
            self.scatter = np.array(scatter)
            self.rbar = np.array(rbar)
        else:
            self.u = ts
            self.ybar = ys
            self.counts = np.ones(ts.size)
            self.scatter = np.zeros(ts.size)
            self.rbar = rs

    def correction(self, sigma_n2=None):
        """Log-likelihood difference between the full and reduced systems."""
        r = self.rbar if sigma_n2 is None else np.full_like(self.rbar, sigma_n2)
        extra = self.counts - 1.0
        out = -0.5 * float(np.sum(np.log(self.counts)))
        mask = extra > 0.0
        if np.any(mask):
            if np.any(r[mask] <= 0.0):
                return -np.inf
            out -= 0.5 * float(np.sum(extra[mask] * (LOG_2PI + np.log(r[mask]))))
            out -= 0.5 * float(np.sum(self.scatter[mask] / r[mask]))
        return out

    def correction_grad_log_sn(self, sigma_n2):
        extra = self.counts - 1.0
        return float(np.sum(-extra + self.scatter / sigma_n2))


def _reduced_lml_and_grad(col: _Collapsed, log_l, log_sf, log_sn):
    """LML of the full data set and its gradient, via the reduced system."""
    l, sf = math.exp(log_l), math.exp(log_sf)
    params = KernelParams(l, sf)
    sigma_n2 = math.exp(2.0 * log_sn) if log_sn is not None else None
    r = (np.full_like(col.rbar, sigma_n2) if sigma_n2 is not None else col.rbar)
    r_reduced = r / col.counts

    m = col.u.size
    Kf = rbf_kernel(col.u, col.u, params)
    try:
        chol, _ = _factorize(Kf, r_reduced)
    except NumericalConditioningError:
        return -np.inf, None
    alpha = cho_solve(chol, col.ybar)
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol[0]))))
    lml = -0.5 * float(col.ybar @ alpha) - 0.5 * log_det - 0.5 * m * LOG_2PI
    lml += col.correction(sigma_n2)

    Kinv = cho_solve(chol, np.eye(m))
    A = np.outer(alpha, alpha) - Kinv
    d = (col.u[:, None] - col.u[None, :]) / l
    grad = [0.5 * float(np.sum(A * (Kf * d * d))),
            0.5 * float(np.sum(A * (2.0 * Kf)))]
    if log_sn is not None:
        diag_term = float(np.sum(np.diag(A) * (2.0 * sigma_n2 / col.counts)))
        grad.append(0.5 * diag_term + col.correction_grad_log_sn(sigma_n2))
    return lml, np.array(grad)


def optimize_hyperparameters(train: TrainingSet, noise=None,
                             config: OptConfig = OptConfig()) -> OptResult:
    """Maximize the log marginal likelihood over kernel hyperparameters.

    ``noise`` fixes the observation noise (scalar or per-point variance
    vector) during the search; pass None to co-optimize a scalar noise
    variance alongside the kernel parameters. Starts are drawn log-uniformly
    inside the box bounds and refined with L-BFGS-B on the analytic gradient;
    the best final candidate is returned, so the result is never worse than
    any start point.
    """
    if not isinstance(train, TrainingSet):
        train = TrainingSet(*train)
    if len(train) < 2:
        raise InsufficientDataError("hyperparameter search needs at least 2 points")

    t, y = train.t, train.y
    offset = float(np.mean(y))
    resid = y - offset

    t_range = float(np.ptp(t))
    scale_t = max(t_range, 1e-3)
    sd = max(float(np.std(resid)), 1e-8)

    lb = config.length_scale_bounds or (1e-3, 10.0 * scale_t)
    sb = config.signal_std_bounds or (1e-3 * sd, 10.0 * sd)
    nb = config.noise_std_bounds or (1e-6 * sd, 3.0 * sd)
    for name, (lo, hi) in (("length_scale", lb), ("signal_std", sb),
                           ("noise_std", nb)):
        if not (0.0 < lo < hi):
            raise InvalidInputError(f"invalid {name} bounds ({lo}, {hi})")

    optimize_noise = noise is None
    if optimize_noise:
        r_vec = np.zeros(len(train))
    else:
        r_vec, _ = _as_noise_vector(noise, len(train))
    col = _Collapsed(t, resid, r_vec)

    log_bounds = [(math.log(lb[0]), math.log(lb[1])),
                  (math.log(sb[0]), math.log(sb[1]))]
    if optimize_noise:
        log_bounds.append((math.log(nb[0]), math.log(nb[1])))

    def objective(theta):
        log_sn = theta[2] if optimize_noise else None
        lml, grad = _reduced_lml_and_grad(col, theta[0], theta[1], log_sn)
        if not np.isfinite(lml) or grad is None:
            return np.inf, np.zeros(len(theta))
        return -lml, -grad

    rng = np.random.default_rng(config.seed)
    starts = [np.array([rng.uniform(lo, hi) for lo, hi in log_bounds])
              for _ in range(config.n_starts)]

    best_theta, best_lml = None, -np.inf
    for theta0 in starts:
        try:
            res = minimize(objective, theta0, jac=True, method="L-BFGS-B",
                           bounds=log_bounds,
                           options={"maxiter": config.max_iter})
        except (LinAlgError, ValueError):
            continue
        if not np.isfinite(res.fun):
            continue
        if -res.fun > best_lml:
            best_lml = -res.fun
            best_theta = res.x
    if best_theta is None:
        raise OptimizationFailureError(
            "no start point of the hyperparameter search converged")

    params = KernelParams(math.exp(best_theta[0]), math.exp(best_theta[1]))
    out_noise = (math.exp(2.0 * best_theta[2]) if optimize_noise else noise)
    return OptResult(params=params, noise=out_noise, lml=float(best_lml))


# ---------------------------------------------------------------------------
# Heteroscedastic model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HeteroConfig:
    """Two-stage heteroscedastic fit settings.

    Each round regresses the log of a smoothed empirical variance estimate
    (squared residuals pooled per distinct input, then a centered moving
    window over neighbors in time) and refits the signal GP with the
    predicted per-point noise. Signal hyperparameters are re-optimized once,
    after the first noise injection, unless disabled.
    """

    iterations: int = 3
    min_points: int = 10
    smoothing_window: int = 5
    reoptimize_after_noise: bool = True
    opt: OptConfig = OptConfig()
    noise_opt: OptConfig = OptConfig()
    noise_floor: float | None = None


@dataclass
class HeteroGPModel:
    """Signal GP plus a log-noise GP evaluated wherever noise is needed."""

    signal_gp: GPModel
    noise_gp: GPModel
    degenerate: bool = False

    @property
    def params(self) -> KernelParams:
        return self.signal_gp.params

    @property
    def train(self) -> TrainingSet:
        return self.signal_gp.train

    def noise_variance(self, ts) -> np.ndarray:
        """exp of the noise GP posterior mean: positive by construction."""
        return np.exp(self.noise_gp.predict(ts).mean)

    def predict(self, ts, full_cov: bool = False) -> PosteriorPrediction:
        """Posterior of a new observation: latent variance plus local noise."""
        out = self.signal_gp.predict(ts, full_cov=full_cov)
        r_star = self.noise_variance(ts)
        out.var = out.var + r_star
        if out.cov is not None:
            out.cov = out.cov + np.diag(r_star)
        return out


def _group_mean_square(t, resid):
    """Mean squared residual per distinct input, inputs sorted ascending."""
    order = np.argsort(t, kind="stable")
    ts, rs = t[order], resid[order]
    boundaries = np.concatenate([[0], np.nonzero(ts[1:] != ts[:-1])[0] + 1,
                                 [ts.size]])
    u = ts[boundaries[:-1]]
    sq = rs * rs
    sums = np.add.reduceat(sq, boundaries[:-1])
    counts = np.diff(boundaries)
    return u, sums / counts


def _moving_average(v, window):
    half = window // 2
    out = np.empty_like(v)
    for i in range(v.size):
        a, b = max(0, i - half), min(v.size, i + half + 1)
        out[i] = np.mean(v[a:b])
    return out


def fit_heteroscedastic(train: TrainingSet,
                        config: HeteroConfig = HeteroConfig()) -> HeteroGPModel:
    """Fit a GP whose observation noise varies over the input domain."""
    if not isinstance(train, TrainingSet):
        train = TrainingSet(*train)
    if len(train) < config.min_points:
        raise InsufficientDataError(
            f"heteroscedastic fit needs at least {config.min_points} points, "
            f"got {len(train)}")

    floor = config.noise_floor
    if floor is None:
        floor = max(1e-10 * float(np.var(train.y)), 1e-12)

    stage1 = optimize_hyperparameters(train, noise=None, config=config.opt)
    signal = fit_gp(train, stage1.params, noise=stage1.noise)
    noise_model = None
    degenerate = False

    for round_idx in range(config.iterations):
        resid = train.y - signal.predict(train.t).mean
        u, mean_sq = _group_mean_square(train.t, resid)
        smoothed = _moving_average(mean_sq, config.smoothing_window)
        degenerate = bool(np.max(smoothed) <= floor)
        z = np.log(np.maximum(smoothed, floor))

        if u.size >= 2 and not degenerate:
            noise_fit = optimize_hyperparameters(TrainingSet(u, z), noise=None,
                                                 config=config.noise_opt)
            noise_model = fit_gp(TrainingSet(u, z), noise_fit.params,
                                 noise=noise_fit.noise)
        else:
            # Variance profile flat at the floor: pin the noise GP to it.
            flat = KernelParams(length_scale=max(float(np.ptp(u)), 1e-3),
                                signal_std=1e-6)
            noise_model = fit_gp(TrainingSet(u, z), flat, noise=1e-12)

        r_train = np.exp(noise_model.predict(train.t).mean)
        if round_idx == 0 and config.reoptimize_after_noise and not degenerate:
            refit = optimize_hyperparameters(train, noise=r_train,
                                             config=config.opt)
            signal = fit_gp(train, refit.params, noise=r_train)
        else:
            signal = fit_gp(train, signal.params, noise=r_train)

    return HeteroGPModel(signal_gp=signal, noise_gp=noise_model,
                         degenerate=degenerate)


# ---------------------------------------------------------------------------
# Gaussian fusion
# ---------------------------------------------------------------------------

def gaussian_product(a: PosteriorPrediction,
                     b: PosteriorPrediction) -> PosteriorPrediction:
    """Elementwise product of two independent Gaussian predictions.

    Implements mean = (vb*ma + va*mb) / (va+vb), var = va*vb / (va+vb),
    handled so an infinite variance on one side leaves the other unchanged.
    Two exact (zero-variance) constraints must agree.
    """
    ma, va = np.asarray(a.mean, dtype=float), np.asarray(a.var, dtype=float)
    mb, vb = np.asarray(b.mean, dtype=float), np.asarray(b.var, dtype=float)
    if ma.shape != mb.shape or va.shape != vb.shape or ma.shape != va.shape:
        raise InvalidInputError("fused predictions must share their shape")
    if np.any(va < 0.0) or np.any(vb < 0.0):
        raise InvalidInputError("variances must be nonnegative")

    both_zero = (va == 0.0) & (vb == 0.0)
    if np.any(both_zero & ~np.isclose(ma, mb, rtol=0.0, atol=1e-12)):
        raise InconsistentConstraintError(
            "two zero-variance constraints disagree at the same input")

    mean = np.empty_like(ma)
    var = np.empty_like(va)

    a_inf, b_inf = np.isinf(va), np.isinf(vb)
    regular = ~(a_inf | b_inf | both_zero)
    with np.errstate(invalid="ignore", divide="ignore"):
        tot = va + vb
        mean[regular] = (vb[regular] * ma[regular]
                         + va[regular] * mb[regular]) / tot[regular]
        var[regular] = va[regular] * vb[regular] / tot[regular]
    # An infinite-variance side carries no information.
    take_a = b_inf & ~a_inf
    take_b = a_inf & ~b_inf
    mean[take_a], var[take_a] = ma[take_a], va[take_a]
    mean[take_b], var[take_b] = mb[take_b], vb[take_b]
    both_inf = a_inf & b_inf
    mean[both_inf] = 0.5 * (ma[both_inf] + mb[both_inf])
    var[both_inf] = np.inf
    mean[both_zero], var[both_zero] = ma[both_zero], 0.0
    return PosteriorPrediction(mean=mean, var=var)
