"""Least-squares fits of the HOM dip models.

The optimizer is a bounded Levenberg-Marquardt loop: damping is divided by 10
after an accepted step and multiplied by 10 after a rejected one, and bounds
are enforced by projection (variables pinned at a bound with the gradient
pointing outward are frozen for that step).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .correlator import DipCurve, analytic_visibility, mismatch_factor, overlap_ratio
from .errors import DomainError, PreconditionError
from .fock import JsaModel, QuantumModelParams, coincidence_model, g_overlap
from .signals import PhaseDistribution

QUANTUM_PARAMS = ("K", "sigma_omega", "zeta", "eta")


def r_squared(data, model) -> float:
    y = np.asarray(data, dtype=float)
    f = np.asarray(model, dtype=float)
    if y.shape != f.shape or y.size < 2:
        raise DomainError("data and model must have equal length >= 2")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise DomainError("R^2 is undefined for data with zero variance")
    return 1.0 - float(np.sum((y - f) ** 2)) / ss_tot


@dataclass
class LmResult:
    x: np.ndarray
    cost: float
    iterations: int
    converged: bool
    jacobian: np.ndarray
    residuals: np.ndarray
    history: list = field(default_factory=list)


def _jacobian(fun, x, r0, lower, upper, rel_step=1e-6):
    jac = np.empty((r0.size, x.size))
    for j in range(x.size):
        h = rel_step * max(abs(x[j]), 1.0)
        up, dn = x.copy(), x.copy()
        up[j] = min(x[j] + h, upper[j])
        dn[j] = max(x[j] - h, lower[j])
        if up[j] == dn[j]:
            jac[:, j] = 0.0
            continue
        r_up = r0 if up[j] == x[j] else fun(up)
        r_dn = r0 if dn[j] == x[j] else fun(dn)
        jac[:, j] = (r_up - r_dn) / (up[j] - dn[j])
    return jac


def levenberg_marquardt(fun: Callable[[np.ndarray], np.ndarray], x0, lower=None, upper=None,
                        max_iter: int = 200, ftol: float = 1e-10,
                        damping: float = 1e-3) -> LmResult:
    """Minimize ``sum(fun(x)**2)`` within box bounds.

    Stops when an accepted step changes the objective by less than ``ftol``
    relative, when no damping level yields a decrease, or after ``max_iter``
    iterations (then ``converged`` is False).  ``history`` lists the objective
    at every accepted iterate and is non-increasing.
    """
    x = np.asarray(x0, dtype=float).copy()
    n = x.size
    lower = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    upper = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
    x = np.clip(x, lower, upper)
    r = np.asarray(fun(x), dtype=float)
    cost = float(r @ r)
    history = [cost]
    lam = damping
    jac = _jacobian(fun, x, r, lower, upper)
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        if cost == 0.0:
            converged = True
            break
        grad = jac.T @ r
        active = ((x <= lower) & (grad > 0)) | ((x >= upper) & (grad < 0))
        free = ~active
        if not np.any(free) or not np.any(grad[free]):
            converged = True
            break
        jf = jac[:, free]
        a = jf.T @ jf
        diag = np.diag(a).copy()
        diag[diag <= 0] = 1e-12 * max(diag.max(), 1e-300)
        step = np.zeros(n)
        try:
            step[free] = np.linalg.solve(a + lam * np.diag(diag), -grad[free])
        except np.linalg.LinAlgError:
            step[free] = np.linalg.lstsq(a + lam * np.diag(diag), -grad[free], rcond=None)[0]
        x_new = np.clip(x + step, lower, upper)
        r_new = np.asarray(fun(x_new), dtype=float)
        cost_new = float(r_new @ r_new)
        if np.isfinite(cost_new) and cost_new < cost:
            rel = (cost - cost_new) / cost
            x, r, cost = x_new, r_new, cost_new
            history.append(cost)
            lam = max(lam / 10.0, 1e-15)
            if rel < ftol:
                converged = True
                break
            jac = _jacobian(fun, x, r, lower, upper)
        else:
            lam *= 10.0
            if lam > 1e16:
                # no damping level descends: stationary to working precision
                converged = True
                break
    return LmResult(x, cost, it, converged, jac, r, history)


@dataclass
class FitResult:
    params: dict
    free: dict
    r_squared: float
    residual_norm: float
    converged: bool
    iterations: int
    std_errors: dict = field(default_factory=dict)
    max_iterations: int = 200
    history: list = field(default_factory=list)

    def __post_init__(self):
        if self.r_squared > 1.0 + 1e-12:
            raise DomainError("R^2 cannot exceed 1")
        if self.iterations > self.max_iterations:
            raise DomainError("iteration count exceeds the limit")

    def to_dict(self) -> dict:
        return {
            "params": {k: {"value": float(v), "free": bool(self.free[k]),
                           "std_error": _json_float(self.std_errors.get(k))}
                       for k, v in self.params.items()},
            "r_squared": float(self.r_squared),
            "residual_norm": float(self.residual_norm),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=2, **kw)


def _json_float(v):
    if v is None or not math.isfinite(v):
        return None
    return float(v)


def _std_errors(jac_int, residuals, scales, n_free):
    dof = residuals.size - n_free
    if dof <= 0:
        return np.full(n_free, np.nan)
    s2 = float(residuals @ residuals) / dof
    cov = s2 * np.linalg.pinv(jac_int.T @ jac_int)
    return np.sqrt(np.clip(np.diag(cov), 0.0, None)) * scales


def _sorted_xy(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("delays and values must be 1-D arrays of equal length")
    order = np.lexsort((y, x))
    return x[order], y[order]


def initial_sigma_omega(delays, counts) -> float:
    """sigma_omega from the dip half-width, assuming overlap exp(-2 sigma^2 dtau^2)."""
    d = np.abs(np.asarray(delays, dtype=float))
    c = np.asarray(counts, dtype=float)
    half = 0.5 * (c.min() + c.max())
    order = np.argsort(d, kind="stable")
    d, c = d[order], c[order]
    above = np.flatnonzero(c >= half)
    width = None
    if above.size and above[0] > 0:
        k = above[0]
        d0, d1, c0, c1 = d[k - 1], d[k], c[k - 1], c[k]
        width = d1 if c1 == c0 else d0 + (half - c0) * (d1 - d0) / (c1 - c0)
    if not width or width <= 0:
        width = max(d.max() / 3.0, np.finfo(float).tiny)
    return math.sqrt(math.log(2.0) / 2.0) / width


def fit_quantum(delays, counts, jsa: JsaModel, fixed: Mapping | QuantumModelParams | None = None,
                free: Iterable[str] = ("K", "sigma_omega"), initial: Mapping | None = None,
                max_iter: int = 200) -> FitResult:
    """Fit K * C(dtau) with the noisy HOM model.

    ``fixed`` supplies ``t_power`` plus the value of every parameter not in
    ``free`` (``zeta``/``eta`` default to 0/1, ``sigma_omega`` to the JSA's).
    Free parameters start from ``initial`` or from: K = 2 max(counts),
    sigma_omega from the dip half-width, zeta = 0.02, eta = 0.99.
    """
    requested = set(free)
    unknown = requested - set(QUANTUM_PARAMS)
    if unknown:
        raise DomainError(f"unknown fit parameters {sorted(unknown)}")
    free = tuple(p for p in QUANTUM_PARAMS if p in requested)
    x_d, y = _sorted_xy(delays, counts)
    if y.size < len(free) + 2:
        raise PreconditionError("need at least two more data points than free parameters")
    if np.var(y) == 0:
        raise DomainError("R^2 is undefined for data with zero variance")

    if isinstance(fixed, QuantumModelParams):
        fixed = {"t_power": fixed.t_power, "eta": fixed.eta, "zeta": fixed.zeta,
                 "K": fixed.scale_k}
    values = {"t_power": 0.5, "zeta": 0.0, "eta": 1.0, "K": 1.0,
              "sigma_omega": jsa.sigma_omega}
    values.update(fixed or {})
    guesses = {"K": 2.0 * float(y.max()), "sigma_omega": initial_sigma_omega(x_d, y),
               "zeta": 0.02, "eta": 0.99}
    guesses.update(initial or {})
    for p in free:
        values[p] = float(guesses[p])

    scales = np.array([abs(values[p]) if p in ("K", "sigma_omega") else 1.0 for p in free])
    bounds = {"K": (1e-12, np.inf), "sigma_omega": (1e-9, np.inf),
              "zeta": (0.0, 1.0), "eta": (0.0, 1.0)}
    lower = np.array([bounds[p][0] for p in free])
    upper = np.array([bounds[p][1] for p in free])

    def unpack(x_int):
        v = dict(values)
        v.update(zip(free, x_int * scales))
        return v

    def model(v):
        params = QuantumModelParams(values["t_power"], v["eta"], v["zeta"], v["K"])
        g = g_overlap(jsa.with_sigma(v["sigma_omega"]), x_d)
        return coincidence_model(g, params)

    def residuals(x_int):
        return model(unpack(x_int)) - y

    x0 = np.array([values[p] for p in free]) / scales
    res = levenberg_marquardt(residuals, x0, lower, upper, max_iter=max_iter)
    best = unpack(res.x)
    se = _std_errors(res.jacobian, res.residuals, scales, len(free))
    out = {p: float(best[p]) for p in QUANTUM_PARAMS}
    out["t_power"] = float(values["t_power"])
    return FitResult(
        params=out,
        free={p: p in free for p in out},
        r_squared=r_squared(y, model(best)),
        residual_norm=math.sqrt(res.cost),
        converged=res.converged,
        iterations=res.iterations,
        std_errors={p: float(e) for p, e in zip(free, se)},
        max_iterations=max_iter,
        history=res.history,
    )


def classical_dip_model(tau, amplitude_ratio, envelope_sigma, visibility):
    return 1.0 - visibility * mismatch_factor(amplitude_ratio) * overlap_ratio(tau, envelope_sigma) ** 2


def ratio_for_mismatch(factor: float) -> float:
    """Amplitude ratio eps in (0, 1] whose mismatch factor equals ``factor``."""
    if not 0.0 < factor <= 1.0:
        raise DomainError("mismatch factor must lie in (0, 1]")
    q = math.sqrt(factor)
    return (1.0 - math.sqrt(max(0.0, 1.0 - q * q))) / q


def fit_classical(curve: DipCurve, dist: PhaseDistribution, envelope_sigma: float,
                  fit_sigma: bool = False, max_iter: int = 200) -> FitResult:
    """Fit the amplitude ratio eps = A2/A1 (and optionally the envelope sigma).

    Model: C(tau) = 1 - V (2 eps/(1 + eps^2))^2 exp(-tau^2/(2 sigma^2)), with
    V the ideal visibility of ``dist``.  eps is reported in (0, 1]; the model
    is symmetric under eps -> 1/eps.
    """
    if len(curve) < 3:
        raise PreconditionError("need at least 3 points")
    x_d, y = _sorted_xy(curve.tau, curve.c_mean)
    if np.var(y) == 0:
        raise DomainError("R^2 is undefined for data with zero variance")
    v_ideal = analytic_visibility(dist)

    # start from the observed dip depth
    ref = DipCurve.without_band(x_d, y).far_reference() if y.size >= 3 else y.max()
    v_obs = 1.0 - y.min() / ref
    eps0 = ratio_for_mismatch(min(max(v_obs / v_ideal, 1e-6), 1.0)) if v_ideal > 0 else 0.5
    eps0 = min(max(eps0, 1e-3), 0.999)

    names = ["amplitude_ratio"] + (["envelope_sigma"] if fit_sigma else [])
    scales = np.array([1.0] + ([envelope_sigma] if fit_sigma else []))
    lower = np.array([1e-9] + ([1e-9] if fit_sigma else []))
    upper = np.array([1.0] + ([np.inf] if fit_sigma else []))

    def unpack(x_int):
        p = x_int * scales
        return p[0], (p[1] if fit_sigma else envelope_sigma)

    def residuals(x_int):
        eps, sig = unpack(x_int)
        return classical_dip_model(x_d, eps, sig, v_ideal) - y

    x0 = np.array([eps0] + ([1.0] if fit_sigma else []))
    res = levenberg_marquardt(residuals, x0, lower, upper, max_iter=max_iter)
    eps, sig = unpack(res.x)
    se = _std_errors(res.jacobian, res.residuals, scales, len(names))
    fitted_v = v_ideal * float(mismatch_factor(eps))
    return FitResult(
        params={"amplitude_ratio": float(eps), "envelope_sigma": float(sig),
                "visibility": fitted_v},
        free={"amplitude_ratio": True, "envelope_sigma": fit_sigma, "visibility": False},
        r_squared=r_squared(y, classical_dip_model(x_d, eps, sig, v_ideal)),
        residual_norm=math.sqrt(res.cost),
        converged=res.converged,
        iterations=res.iterations,
        std_errors={p: float(e) for p, e in zip(names, se)},
        max_iterations=max_iter,
        history=res.history,
    )
