"""Dimensionally-constrained power-law identification.

Fits y = w0 * prod_i x_i^{w_i} over nine process/material quantities while
forcing the exponents to satisfy one linear equality per base unit (kg, m,
s, K), so the right-hand side carries the target's dimensions exactly.
All arithmetic here is in SI units; this module is the single place where
dataset-convention values are converted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import ConvergenceError, ValidationError, rng_stream
from .data_model import Dataset, select_complete

# (symbol, description, (kg, m, s, K), dataset unit, factor dataset -> SI)
QUANTITIES = (
    ("P", "beam power", (1, 2, -3, 0), "W", 1.0),
    ("V", "scanning speed", (0, 1, -1, 0), "mm/s", 1e-3),
    ("L", "layer thickness", (0, 1, 0, 0), "um", 1e-6),
    ("B", "beam diameter", (0, 1, 0, 0), "um", 1e-6),
    ("rho", "density", (1, -3, 0, 0), "g/cm3", 1e3),
    ("cp", "specific heat", (0, 2, -2, -1), "J/(kg K)", 1.0),
    ("cte", "thermal expansion coefficient", (0, 0, 0, -1), "1e-6/K", 1e-6),
    ("k", "thermal conductivity", (1, 1, -3, -1), "W/(m K)", 1.0),
    ("dT", "melting minus ambient temperature", (0, 0, 0, 1), "K", 1.0),
)

QUANTITY_SYMBOLS = tuple(q[0] for q in QUANTITIES)
BASE_UNITS = ("kg", "m", "s", "K")

PA_DIMS = (1, -1, -2, 0)

# Labels with a pressure dimension, and their conversion to Pa.
TARGETS = {"ys": 1e6, "uts": 1e6, "e_mod": 1e9}

DEFAULT_T0 = 25.0  # degC ambient reference; configurable everywhere it is used


def dimension_matrix() -> np.ndarray:
    """9 quantities x 4 base units."""
    return np.array([q[2] for q in QUANTITIES], dtype=np.float64)


def derive_constraints(target_dims=PA_DIMS, paper_constraints: bool = False):
    """Equality constraints A w = b, one row per base unit.

    ``paper_constraints`` flips the sign of the specific-heat coefficient in
    the temperature row to match the printed form of the constraint set,
    which disagrees with the dimension table it was derived from; the
    default keeps the table-derived sign.
    """
    A = dimension_matrix().T.copy()  # (4, 9)
    b = np.asarray(target_dims, dtype=np.float64).copy()
    if paper_constraints:
        cp_idx = QUANTITY_SYMBOLS.index("cp")
        A[3, cp_idx] = -A[3, cp_idx]
    return A, b


def constraint_residuals(w, A, b) -> np.ndarray:
    return A @ np.asarray(w, dtype=np.float64) - b


def extract_quantities(ds: Dataset, label: str, condition: str | None = None,
                       subprocess: str | None = None, t0: float = DEFAULT_T0):
    """SI quantity matrix and target vector for the power-law fit.

    Keeps records that carry the label, all four processing parameters, and
    a positive melting-point excess over ``t0``.  Returns (X, y, row_ids,
    n_dropped_nonpositive).
    """
    if label not in TARGETS:
        raise ValidationError(f"label {label!r} has no pressure dimension; choose from {sorted(TARGETS)}")
    ds_sel = select_complete(ds, ("beam_power", "scan_speed", "layer_thickness", "beam_diameter"), label)

    rows, ys, ids = [], [], []
    dropped = 0
    for i, rec in enumerate(ds_sel.records):
        if condition is not None and rec.post_processing != condition:
            continue
        if subprocess is not None and rec.subprocess != subprocess:
            continue
        spec = ds_sel.registry[rec.material]
        dT = spec.melting_temperature - t0
        if dT <= 0:
            dropped += 1
            continue
        raw = (rec.beam_power, rec.scan_speed, rec.layer_thickness, rec.beam_diameter,
               spec.density, spec.specific_heat, spec.cte, spec.thermal_conductivity, dT)
        rows.append([v * q[4] for v, q in zip(raw, QUANTITIES)])
        ys.append(rec.labels[label] * TARGETS[label])
        ids.append(i)
    X = np.asarray(rows, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    return X, y, np.asarray(ids, dtype=np.int64), dropped


def _check_positive(X, y=None):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(QUANTITIES):
        raise ValidationError(f"quantity matrix must be n x {len(QUANTITIES)}")
    if not np.all(X > 0):
        raise ValidationError("all quantity values must be strictly positive")
    if y is not None:
        y = np.asarray(y, dtype=np.float64)
        if not np.all(y > 0):
            raise ValidationError("all target values must be strictly positive")
        return X, y
    return X


def fit_loglinear(X, y, A, b):
    """Closed-form equality-constrained least squares in log space.

    Solves min ||log y - (log w0 + log X w)||^2 s.t. A w = b through the
    stationarity (KKT) system.  Returns (w, w0).
    """
    X, y = _check_positive(X, y)
    n = X.shape[0]
    Xl = np.log(X)
    yl = np.log(y)
    D = np.hstack([np.ones((n, 1)), Xl])              # unknowns: (log w0, w)
    At = np.hstack([np.zeros((A.shape[0], 1)), A])    # constraints ignore log w0
    size = D.shape[1] + A.shape[0]
    kkt = np.zeros((size, size))
    kkt[:D.shape[1], :D.shape[1]] = D.T @ D
    kkt[:D.shape[1], D.shape[1]:] = At.T
    kkt[D.shape[1]:, :D.shape[1]] = At
    rhs = np.concatenate([D.T @ yl, b])
    if np.linalg.matrix_rank(kkt) < size:
        raise ValidationError(
            "constrained log-linear system is rank deficient; check for collinear "
            "quantities (identical layer-thickness and beam-diameter columns, or too few distinct rows)")
    sol = np.linalg.solve(kkt, rhs)
    w0 = float(np.exp(sol[0]))
    w = sol[1:D.shape[1]]
    if np.max(np.abs(constraint_residuals(w, A, b))) > 1e-10:
        raise ConvergenceError("log-linear KKT solve failed to satisfy the constraints")
    return w, w0


@dataclass
class PowerLawModel:
    w0: float
    w: np.ndarray
    label: str
    condition: str | None
    t0: float
    fit_r2: float
    constraint_residuals: np.ndarray
    converged: bool
    n_rows: int
    objective: float
    paper_constraints: bool = False
    extras: dict = field(default_factory=dict)

    def predict(self, X) -> np.ndarray:
        X = _check_positive(X)
        return self.w0 * np.exp(np.log(X) @ self.w)

    def equation(self) -> str:
        terms = " ".join(f"{sym}^{wi:.2f}" for sym, wi in zip(("P", "V", "L", "B", "rho", "C_p", "CTE", "k", "(T_m - T_0)"), self.w))
        return f"{self.label.upper()} = {self.w0:.3g} x {terms}"

    def to_dict(self) -> dict:
        return {
            "w0": self.w0,
            "w": {sym: float(wi) for sym, wi in zip(QUANTITY_SYMBOLS, self.w)},
            "label": self.label,
            "condition": self.condition,
            "t0_degC": self.t0,
            "fit_r2": self.fit_r2,
            "constraint_residuals": {u: float(r) for u, r in zip(BASE_UNITS, self.constraint_residuals)},
            "converged": self.converged,
            "n_rows": self.n_rows,
            "objective": self.objective,
            "paper_constraints": self.paper_constraints,
            "equation": self.equation(),
            "units": {sym: f"SI ({q[3]} converted x {q[4]:g})" for sym, q in zip(QUANTITY_SYMBOLS, QUANTITIES)},
            "w0_units": "dimensionless under exact constraints; inputs SI, output Pa",
            **self.extras,
        }


def _lm_refine(u0, z0, G, c, y, max_iter, tol):
    """Levenberg-Marquardt on theta = (log w0, z); constraints hold by construction."""
    theta = np.concatenate([[u0], z0])
    Jbase = np.hstack([np.ones((G.shape[0], 1)), G])

    def model(th):
        m = th[0] + G @ th[1:] + c
        return np.exp(np.clip(m, -700.0, 700.0))

    yhat = model(theta)
    sse = float(np.sum((y - yhat) ** 2))
    lam = 1e-3
    converged = False
    for _ in range(max_iter):
        r = y - yhat
        J = yhat[:, None] * Jbase
        JtJ = J.T @ J
        g = J.T @ r
        if float(np.max(np.abs(g))) <= tol * (1.0 + sse):
            converged = True
            break
        step_ok = False
        for _ in range(40):
            try:
                delta = np.linalg.solve(JtJ + lam * np.diag(np.maximum(np.diag(JtJ), 1e-12)), g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand = theta + delta
            cand_yhat = model(cand)
            cand_sse = float(np.sum((y - cand_yhat) ** 2))
            if np.isfinite(cand_sse) and cand_sse <= sse:
                improvement = sse - cand_sse
                theta, yhat, sse = cand, cand_yhat, cand_sse
                lam = max(lam / 3.0, 1e-12)
                step_ok = True
                if improvement <= tol * (1.0 + sse) and float(np.linalg.norm(delta)) <= 1e-10:
                    converged = True
                break
            lam *= 10.0
        if not step_ok or converged:
            break
    return theta, sse, converged


def fit_powerlaw(X, y, A, b, *, label: str = "ys", condition: str | None = None,
                 t0: float = DEFAULT_T0, max_iter: int = 500, tol: float = 1e-12,
                 n_starts: int = 8, seed: int = 0,
                 paper_constraints: bool = False) -> PowerLawModel:
    """Original-space constrained fit, initialized from the log-linear solve.

    The exponent vector is parametrized as w = w_p + N z with N an
    orthonormal null-space basis of A, so every iterate satisfies the
    constraints to machine precision; Levenberg-Marquardt steps then refine
    (log w0, z) in the original space.  ``n_starts`` perturbed restarts keep
    the best local optimum (ties broken by start index).
    """
    X, y = _check_positive(X, y)
    w_ll, w0_ll = fit_loglinear(X, y, A, b)

    U, S, Vt = np.linalg.svd(A)
    rank = int(np.sum(S > 1e-12 * S[0]))
    N = Vt[rank:].T                            # (9, 9 - rank), orthonormal
    w_p = np.linalg.lstsq(A, b, rcond=None)[0]  # min-norm particular solution

    Xl = np.log(X)
    G = Xl @ N
    c = Xl @ w_p
    z_ll = N.T @ (w_ll - w_p)
    u_ll = float(np.log(w0_ll))

    best = None
    for s in range(max(1, n_starts)):
        if s == 0:
            u0, z0 = u_ll, z_ll
        else:
            rng = rng_stream(seed, s)
            scale = 0.1 * (np.linalg.norm(z_ll) / max(np.sqrt(z_ll.size), 1.0) + 1.0)
            z0 = z_ll + rng.normal(0.0, scale, size=z_ll.shape)
            u0 = u_ll + rng.normal(0.0, 0.1)
        theta, sse, converged = _lm_refine(u0, z0, G, c, y, max_iter, tol)
        if best is None or sse < best[1]:
            best = (theta, sse, converged)

    theta, sse, converged = best
    w = w_p + N @ theta[1:]
    w0 = float(np.exp(theta[0]))
    yhat = w0 * np.exp(Xl @ w)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    fit_r2 = 1.0 - sse / ss_tot if ss_tot > 0 else float("nan")
    return PowerLawModel(
        w0=w0, w=w, label=label, condition=condition, t0=t0, fit_r2=float(fit_r2),
        constraint_residuals=constraint_residuals(w, A, b), converged=bool(converged),
        n_rows=X.shape[0], objective=float(sse), paper_constraints=paper_constraints,
    )


def evaluate_powerlaw(model: PowerLawModel, X, y=None):
    """Predictions (and R^2 when targets are supplied) on SI-unit inputs."""
    yhat = model.predict(X)
    score = None
    if y is not None:
        y = np.asarray(y, dtype=np.float64)
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        if ss_tot == 0:
            raise ValidationError("R^2 undefined for zero-variance targets")
        score = 1.0 - float(np.sum((y - yhat) ** 2)) / ss_tot
    return yhat, score


def discover(ds: Dataset, label: str, condition: str | None = "as_built",
             subprocess: str | None = None, t0: float = DEFAULT_T0,
             paper_constraints: bool = False, seed: int = 0,
             n_starts: int = 8) -> PowerLawModel:
    """End-to-end identification on a dataset: filter, convert to SI, fit."""
    X, y, row_ids, dropped = extract_quantities(ds, label, condition, subprocess, t0)
    if X.shape[0] < 10:
        raise ValidationError(f"only {X.shape[0]} usable rows for label {label!r}, condition {condition!r}")
    A, b = derive_constraints(PA_DIMS, paper_constraints)
    model = fit_powerlaw(X, y, A, b, label=label, condition=condition, t0=t0,
                         seed=seed, n_starts=n_starts, paper_constraints=paper_constraints)
    model.extras["n_rows_dropped_nonpositive_dT"] = dropped
    model.extras["row_ids"] = row_ids.tolist()
    return model
