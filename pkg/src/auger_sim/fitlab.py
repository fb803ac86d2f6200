"""Deterministic Levenberg-Marquardt least squares and the curve-model zoo.

Models carry analytic Jacobians and data-driven initial guesses so that
round-trip fits need no manual seeding. Standard errors come from the
linearised covariance s^2 (J^T J)^-1 with s^2 = SSR / (n - p).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

EPS = np.finfo(float).eps


class FitError(RuntimeError):
    pass


class UnderdeterminedError(FitError):
    pass


class RankDeficiencyError(FitError):
    pass


class ConvergenceError(FitError):
    """Iteration cap hit or no further progress; ``best`` is the best-so-far FitResult."""

    def __init__(self, message: str, best: "FitResult"):
        super().__init__(f"{message}; best SSR = {best.ssr:.6g}")
        self.best = best


@dataclass(frozen=True)
class Model:
    name: str
    params: tuple[str, ...]
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jac: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    guess: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    bounds: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.params) < 1:
            raise ValueError("a model needs at least one parameter")

    def __call__(self, x, p):
        return self.func(np.asarray(x, dtype=float), np.asarray(p, dtype=float))

    def jacobian(self, x, p) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        if self.jac is not None:
            return self.jac(x, p)
        return numeric_jacobian(self.func, x, p)

    def residual(self, p, x, y):
        return self(x, p) - y


def numeric_jacobian(func, x, p, rel_step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian with step ``rel_step * max(|p_j|, 1)``."""
    p = np.asarray(p, dtype=float)
    cols = []
    for j in range(p.size):
        h = rel_step * max(abs(p[j]), 1.0)
        up, dn = p.copy(), p.copy()
        up[j] += h
        dn[j] -= h
        cols.append((func(x, up) - func(x, dn)) / (2 * h))
    return np.column_stack(cols)


@dataclass
class FitResult:
    model: str
    names: tuple[str, ...]
    values: np.ndarray
    stderr: np.ndarray
    ssr: float
    iterations: int
    converged: bool
    residuals: np.ndarray
    covariance: np.ndarray
    gradient_norm: float
    n_data: int

    @property
    def params(self) -> dict[str, float]:
        return dict(zip(self.names, map(float, self.values)))

    @property
    def errors(self) -> dict[str, float]:
        return dict(zip(self.names, map(float, self.stderr)))

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "parameters": self.params,
            "stderr": self.errors,
            "ssr": float(self.ssr),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "n_data": int(self.n_data),
            "stderr_method": "linearised covariance s^2 (J^T J)^-1, s^2 = SSR/(n-p)",
        }


def _scaled_gradient(J, r, y_norm):
    g = J.T @ r
    colnorm = np.sqrt(np.sum(J * J, axis=0))
    colnorm[colnorm == 0] = 1.0
    return float(np.max(np.abs(g) / colnorm) / y_norm)


def nls_fit(model: Model, x, y, p0=None, weights=None, fixed: Mapping[str, float] | None = None,
            max_iter: int = 500, gtol: float = 1e-10) -> FitResult:
    """Levenberg-Marquardt fit of ``model`` to (x, y).

    Converged means the scaled gradient max_j |J_j . r| / (|J_j| |y|) is
    below ``gtol``. ``fixed`` pins parameters at given values.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[0] != y.shape[0]:
        raise ValueError("x and y lengths differ")
    if p0 is None:
        if model.guess is None:
            raise ValueError(f"model {model.name!r} has no guess heuristic; pass p0")
        p0 = model.guess(x, y)
    p = np.array(p0, dtype=float)
    if p.size != len(model.params):
        raise ValueError(f"expected {len(model.params)} parameters, got {p.size}")
    fixed = dict(fixed or {})
    for k, v in fixed.items():
        p[model.params.index(k)] = v
    free = np.array([name not in fixed for name in model.params])
    nfree = int(free.sum())
    if y.size <= nfree:
        raise UnderdeterminedError(f"{y.size} data points for {nfree} free parameters")
    if weights is None:
        sw = np.ones_like(y)
    else:
        w = np.asarray(weights, dtype=float)
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        sw = np.sqrt(w)
    lo = np.array([model.bounds.get(k, (-np.inf, np.inf))[0] for k in model.params])
    hi = np.array([model.bounds.get(k, (-np.inf, np.inf))[1] for k in model.params])
    p = np.clip(p, lo, hi)

    def resid(q):
        return sw * (model(x, q) - y)

    def jac(q):
        return sw[:, None] * model.jacobian(x, q)[:, free]

    y_norm = float(np.linalg.norm(sw * y)) or 1.0
    r = resid(p)
    if not np.all(np.isfinite(r)):
        raise FitError("residual not finite at the initial guess")
    ssr = float(r @ r)
    lam = 1e-3
    it = 0
    converged = False
    stalled = False
    J = jac(p)
    while True:
        gnorm = _scaled_gradient(J, r, y_norm) if ssr > 0 else 0.0
        if gnorm <= gtol:
            converged = True
            break
        if it >= max_iter or stalled:
            break
        it += 1
        A = J.T @ J
        g = J.T @ r
        d = np.diag(A).copy()
        d[d <= 0] = EPS * max(float(d.max()), 1.0)
        while True:
            try:
                step = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                step = np.full(nfree, np.nan)
            trial = p.copy()
            trial[free] += step
            trial = np.clip(trial, lo, hi)
            r_new = resid(trial) if np.all(np.isfinite(step)) else None
            if r_new is not None and np.all(np.isfinite(r_new)):
                ssr_new = float(r_new @ r_new)
                if ssr_new < ssr:
                    p, r, ssr = trial, r_new, ssr_new
                    J = jac(p)
                    lam = max(lam / 10.0, 1e-15)
                    break
                if np.array_equal(trial, p):
                    stalled = True
                    break
                if ssr_new <= ssr * (1 + 1e-13):
                    # SSR no longer resolves progress; accept if the gradient shrinks
                    J_new = jac(trial)
                    if _scaled_gradient(J_new, r_new, y_norm) < gnorm:
                        p, r, ssr, J = trial, r_new, ssr_new, J_new
                        break
            lam *= 10.0
            if lam > 1e20:
                stalled = True
                break

    result = _finish(model, p, free, J, r, ssr, it, converged, y.size, gnorm)
    if not converged:
        why = "iteration cap reached" if it >= max_iter else "no further decrease possible"
        raise ConvergenceError(f"{model.name}: {why} (scaled gradient {gnorm:.3g})", result)
    return result


def _finish(model, p, free, J, r, ssr, it, converged, n, gnorm) -> FitResult:
    names = tuple(model.params)
    nfree = int(free.sum())
    cov = np.full((len(names), len(names)), np.nan)
    stderr = np.full(len(names), np.nan)
    if nfree:
        s = np.linalg.svd(J, compute_uv=False)
        if s[-1] <= s[0] * 1e-13 or s[-1] == 0:
            raise RankDeficiencyError(
                f"{model.name}: singular normal equations (condition {s[0] / max(s[-1], 1e-300):.3g})")
        JTJ_inv = np.linalg.inv(J.T @ J)
        dof = n - nfree
        s2 = ssr / dof if dof > 0 else np.nan
        sub = s2 * JTJ_inv
        idx = np.flatnonzero(free)
        cov[np.ix_(idx, idx)] = sub
        stderr[idx] = np.sqrt(np.clip(np.diag(sub), 0, None))
    return FitResult(model.name, names, p.copy(), stderr, ssr, it, converged, r.copy(), cov, gnorm, n)


def fit_global(model: Model, datasets: Sequence[tuple[np.ndarray, np.ndarray]], shared: Sequence[str],
               p0=None, **kw) -> FitResult:
    """Fit several series at once, sharing the parameters named in ``shared``.

    Non-shared parameters get one copy per series, named ``name[i]``.
    """
    shared = list(shared)
    local = [k for k in model.params if k not in shared]
    m = len(datasets)
    names = tuple(shared + [f"{k}[{i}]" for i in range(m) for k in local])
    xs = [np.asarray(d[0], dtype=float) for d in datasets]
    ys = [np.asarray(d[1], dtype=float) for d in datasets]
    sizes = [len(x) for x in xs]
    bounds = np.cumsum([0] + sizes)
    x_all = np.concatenate(xs)
    y_all = np.concatenate(ys)
    pos = {k: model.params.index(k) for k in model.params}

    def unpack(q, i):
        full = np.empty(len(model.params))
        for j, k in enumerate(shared):
            full[pos[k]] = q[j]
        base = len(shared) + i * len(local)
        for j, k in enumerate(local):
            full[pos[k]] = q[base + j]
        return full

    def func(_x, q):
        return np.concatenate([model(xs[i], unpack(q, i)) for i in range(m)])

    def jac(_x, q):
        out = np.zeros((bounds[-1], len(names)))
        for i in range(m):
            Ji = model.jacobian(xs[i], unpack(q, i))
            rows = slice(bounds[i], bounds[i + 1])
            for j, k in enumerate(shared):
                out[rows, j] = Ji[:, pos[k]]
            base = len(shared) + i * len(local)
            for j, k in enumerate(local):
                out[rows, base + j] = Ji[:, pos[k]]
        return out

    if p0 is None:
        if model.guess is None:
            raise ValueError("global fit needs p0 or a model guess")
        guesses = [model.guess(xs[i], ys[i]) for i in range(m)]
        # shared values from the first series
        p0 = [guesses[0][pos[k]] for k in shared]
        for g in guesses:
            p0 += [g[pos[k]] for k in local]
    b = {}
    for k, v in model.bounds.items():
        if k in shared:
            b[k] = v
        else:
            b.update({f"{k}[{i}]": v for i in range(m)})
    combined = Model(f"{model.name}[global]", names, func, jac, None, b)
    return nls_fit(combined, x_all, y_all, p0=p0, **kw)


# ---------------------------------------------------------------- model zoo

def _first_crossing(x, frac_curve, level):
    """x at which ``frac_curve`` first passes ``level`` (linear interpolation)."""
    above = frac_curve >= level
    idx = np.flatnonzero(above != above[0])
    if idx.size == 0:
        return None
    i = idx[0]
    x0, x1 = x[i - 1], x[i]
    f0, f1 = frac_curve[i - 1], frac_curve[i]
    if f1 == f0:
        return x1
    return x0 + (level - f0) * (x1 - x0) / (f1 - f0)


def _sorted(x, y):
    o = np.argsort(x, kind="stable")
    return x[o], y[o]


def _damped_sinusoid(x, p):
    A, tau, omega, phi, C = p
    return A * np.exp(-x / tau) * np.sin(omega * x + phi) + C


def _damped_sinusoid_jac(x, p):
    A, tau, omega, phi, C = p
    e = np.exp(-x / tau)
    s, c = np.sin(omega * x + phi), np.cos(omega * x + phi)
    return np.column_stack([e * s, A * e * s * x / tau ** 2, A * e * c * x, A * e * c, np.ones_like(x)])


def _damped_sinusoid_guess(x, y):
    x, y = _sorted(x, y)
    C = float(np.mean(y))
    yc = y - C
    zc = np.flatnonzero(np.signbit(yc[1:]) != np.signbit(yc[:-1]))
    span = float(x[-1] - x[0]) or 1.0
    if zc.size >= 2:
        omega = math.pi / float(np.mean(np.diff(x[zc])))
    else:
        omega = math.pi / span
    tau = span
    e = np.exp(-x / tau)
    basis = np.column_stack([e * np.sin(omega * x), e * np.cos(omega * x)])
    (a, b), *_ = np.linalg.lstsq(basis, yc, rcond=None)
    A = math.hypot(a, b) or float(np.ptp(y)) / 2
    phi = math.atan2(b, a)
    return np.array([A, tau, omega, phi, C])


def damped_sinusoid() -> Model:
    """y = A exp(-x/tau) sin(omega x + phi) + C."""
    return Model("damped_sinusoid", ("A", "tau", "omega", "phi", "C"),
                 _damped_sinusoid, _damped_sinusoid_jac, _damped_sinusoid_guess,
                 {"tau": (1e-12, np.inf)})


def _single_exp(x, p):
    A, tau, C = p
    return A * np.exp(-x / tau) + C


def _single_exp_jac(x, p):
    A, tau, C = p
    e = np.exp(-x / tau)
    return np.column_stack([e, A * e * x / tau ** 2, np.ones_like(x)])


def _single_exp_guess(x, y):
    x, y = _sorted(x, y)
    C = float(y[-1])
    A = float(y[0] - C)
    tau = None
    if A != 0:
        tau = _first_crossing(x, (y - C) / A, math.exp(-1.0))
    if not tau or tau <= x[0]:
        tau = float(x[-1] - x[0]) / 3 or 1.0
    else:
        tau = tau - x[0]
        A = A * math.exp(x[0] / tau)
    return np.array([A, tau, C])


def single_exponential() -> Model:
    """y = A exp(-x/tau) + C."""
    return Model("single_exponential", ("A", "tau", "C"), _single_exp, _single_exp_jac,
                 _single_exp_guess, {"tau": (1e-12, np.inf)})


def _fill(x, p):
    A, tau, C = p
    return A * (1.0 - np.exp(-x / tau)) + C


def _fill_jac(x, p):
    A, tau, C = p
    e = np.exp(-x / tau)
    return np.column_stack([1.0 - e, -A * e * x / tau ** 2, np.ones_like(x)])


def _fill_guess(x, y):
    x, y = _sorted(x, y)
    lo, hi = float(y[0]), float(y[-1])
    tau = None
    if hi != lo:
        tau = _first_crossing(x, (y - lo) / (hi - lo), 1 - math.exp(-1.0))
    if not tau or tau <= x[0]:
        tau = float(x[-1] - x[0]) / 3 or 1.0
    else:
        tau = tau - x[0]
    A = hi - lo
    C = lo - A * (1.0 - math.exp(-x[0] / tau))
    return np.array([A, tau, C])


def exponential_fill() -> Model:
    """y = A (1 - exp(-x/tau)) + C."""
    return Model("exponential_fill", ("A", "tau", "C"), _fill, _fill_jac, _fill_guess,
                 {"tau": (1e-12, np.inf)})


def _lorentzian(x, p):
    A, x0, gamma, C = p
    h2 = (0.5 * gamma) ** 2
    return A * h2 / ((x - x0) ** 2 + h2) + C


def _lorentzian_jac(x, p):
    A, x0, gamma, C = p
    h = 0.5 * gamma
    u = x - x0
    D = u * u + h * h
    L = h * h / D
    return np.column_stack([L, 2 * A * h * h * u / D ** 2, A * h * u * u / D ** 2, np.ones_like(x)])


def _half_width(x, y, k, level):
    left = np.flatnonzero(y[:k] <= level) if level < y[k] else np.flatnonzero(y[:k] >= level)
    right = np.flatnonzero(y[k:] <= level) if level < y[k] else np.flatnonzero(y[k:] >= level)
    xl = x[left[-1]] if left.size else x[0]
    xr = x[k + right[0]] if right.size else x[-1]
    return float(xr - xl) or float(x[-1] - x[0]) / 4


def _lorentzian_guess(x, y):
    x, y = _sorted(x, y)
    C = float(min(y[0], y[-1]))
    k = int(np.argmax(y))
    A = float(y[k] - C)
    gamma = _half_width(x, y, k, C + 0.5 * A)
    return np.array([A, float(x[k]), gamma, C])


def lorentzian() -> Model:
    """y = A (gamma/2)^2 / ((x - x0)^2 + (gamma/2)^2) + C; gamma is the FWHM."""
    return Model("lorentzian", ("A", "x0", "gamma", "C"), _lorentzian, _lorentzian_jac,
                 _lorentzian_guess, {"gamma": (1e-300, np.inf)})


def _gauss_dip(x, p):
    A, x0, sigma, C = p
    return C - A * np.exp(-((x - x0) ** 2) / (2 * sigma ** 2))


def _gauss_dip_jac(x, p):
    A, x0, sigma, C = p
    u = x - x0
    G = np.exp(-(u ** 2) / (2 * sigma ** 2))
    return np.column_stack([-G, -A * G * u / sigma ** 2, -A * G * u * u / sigma ** 3, np.ones_like(x)])


def _gauss_dip_guess(x, y):
    x, y = _sorted(x, y)
    C = float(max(y[0], y[-1]))
    k = int(np.argmin(y))
    A = float(C - y[k])
    fwhm = _half_width(x, y, k, C - 0.5 * A)
    return np.array([A, float(x[k]), fwhm / (2 * math.sqrt(2 * math.log(2))), C])


def gaussian_dip() -> Model:
    """y = C - A exp(-(x - x0)^2 / (2 sigma^2)); FWHM = 2 sqrt(2 ln 2) sigma."""
    return Model("gaussian_dip", ("A", "x0", "sigma", "C"), _gauss_dip, _gauss_dip_jac,
                 _gauss_dip_guess, {"sigma": (1e-300, np.inf)})


ZOO: dict[str, Callable[[], Model]] = {
    "damped_sinusoid": damped_sinusoid,
    "single_exponential": single_exponential,
    "exponential_fill": exponential_fill,
    "lorentzian": lorentzian,
    "gaussian_dip": gaussian_dip,
}


def get_model(name: str) -> Model:
    try:
        return ZOO[name]()
    except KeyError:
        raise KeyError(f"unknown model {name!r}; available: {', '.join(sorted(ZOO))}") from None
