"""Momentum-map coordinate tables: the (tau, t, f) correspondence.

The metric potential along the fibre is 4 f(t) with f''(t) = phi(f'(t)).
Setting tau = f'(t) turns the ODE into two quadratures,

    t(tau) = integral_{mu0}^{tau} ds / phi(s),
    f(tau) = integral_{mu0}^{tau} s ds / phi(s),

normalized by f'(0) = mu0 and f(0) = 0.  Since phi(s) = 2s + O(s^2),
the t-integrand carries a 1/(2s) singularity at the puncture; it is
split off and integrated exactly as (1/2) log(tau/mu0), leaving the
continuous remainder r(s) = 1/phi(s) - 1/(2s) to the solver.  Tables
are built once by a high-order Runge-Kutta sweep with dense output and
cross-checked against adaptive quadrature at random anchors.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from .jets import Jet, _is_mp
from .profile import BaseData, phi_eval, phi_q_r, scaling_map

__all__ = ["MomentumTable", "AccuracyError", "build_table", "f_derivatives_at", "scaling_check"]

_INTERP_DEGREE = 7  # local polynomial degree of the dense output


class AccuracyError(RuntimeError):
    """Quadrature failed to reach the requested tolerance."""

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved accuracy {achieved:.3e})")
        self.achieved = achieved


def _phi_scalar(base: BaseData, s: float) -> float:
    return phi_q_r(base, s)[0]


def _remainder(base: BaseData, s: float) -> float:
    """r(s) = 1/phi - 1/(2s), continuous down to s = 0."""
    return phi_q_r(base, s)[2]


@dataclass(frozen=True)
class MomentumTable:
    """Sampled, invertible (tau, t, f) correspondence for one base and gauge."""

    base: BaseData
    mu0: float
    samples: np.ndarray        # structured array with fields tau, t, f
    interp: int
    accuracy: float
    _dense_lo: object = field(repr=False, default=None)
    _dense_hi: object = field(repr=False, default=None)

    # -- forward evaluation ---------------------------------------------
    def _reg_parts(self, tau: float) -> tuple[float, float]:
        """(t_regular, f) at tau from the dense solver output."""
        lo, hi = self.samples["tau"][0], self.samples["tau"][-1]
        if not lo <= tau <= hi:
            raise ValueError(f"tau={tau} outside the table range [{lo}, {hi}]")
        dense = self._dense_lo if tau < self.mu0 else self._dense_hi
        treg, f = dense(tau)
        return float(treg), float(f)

    def t_of_tau(self, tau: float) -> float:
        treg, _ = self._reg_parts(tau)
        return 0.5 * math.log(tau / self.mu0) + treg

    def f_of_tau(self, tau: float) -> float:
        return self._reg_parts(tau)[1]

    # -- inversion --------------------------------------------------------
    def tau_of_t(self, t: float) -> float:
        """Monotone inversion of t(tau) by bracketed root-finding."""
        ts = self.samples["t"]
        taus = self.samples["tau"]
        if not ts[0] <= t <= ts[-1]:
            raise ValueError(f"t={t} outside the table range [{ts[0]}, {ts[-1]}]")
        i = int(np.searchsorted(ts, t))
        i = min(max(i, 1), len(ts) - 1)
        a, b = taus[i - 1], taus[i]
        if a == b:
            return float(a)
        return float(brentq(lambda s: self.t_of_tau(s) - t, a, b, xtol=1e-15, rtol=1e-15))

    def f_of_t(self, t: float) -> float:
        return self.f_of_tau(self.tau_of_t(t))

    def sample(self, taus) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized (t, f) over an array of tau values inside the table range."""
        taus = np.asarray(taus, dtype=float)
        lo, hi = self.samples["tau"][0], self.samples["tau"][-1]
        if taus.size and not (lo <= taus.min() and taus.max() <= hi):
            raise ValueError(f"tau values outside the table range [{lo}, {hi}]")
        t_arr = np.empty_like(taus)
        f_arr = np.empty_like(taus)
        below = taus < self.mu0
        for mask, dense in ((below, self._dense_lo), (~below, self._dense_hi)):
            if mask.any():
                treg, f = dense(taus[mask])
                t_arr[mask] = 0.5 * np.log(taus[mask] / self.mu0) + treg
                f_arr[mask] = f
        return t_arr, f_arr

    # -- diagnostics -------------------------------------------------------
    def residual_probe(self, count: int = 50, seed: int = 0) -> float:
        """max |f''(t) - phi(f'(t))| probed by finite differences of the table.

        f'' is formed as the 5-point derivative of the tau column
        (tau = f'), whose first-difference roundoff scales like eps/h
        rather than the eps/h^2 of a direct second difference of f.
        """
        rng = np.random.default_rng(seed)
        ts = self.samples["t"]
        lo, hi = ts[2], ts[-3]
        h = 1e-3
        worst = 0.0
        for t in rng.uniform(lo + 2 * h, hi - 2 * h, size=count):
            fpp = (-self.tau_of_t(t + 2 * h) + 8 * self.tau_of_t(t + h)
                   - 8 * self.tau_of_t(t - h) + self.tau_of_t(t - 2 * h)) / (12 * h)
            worst = max(worst, abs(fpp - _phi_scalar(self.base, self.tau_of_t(t))))
        return worst

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tau", "t", "f"])
            for row in self.samples:
                writer.writerow([repr(float(row["tau"])), repr(float(row["t"])), repr(float(row["f"]))])


def build_table(base: BaseData, mu0: float = 1.0, tau_range: tuple[float, float] = None,
                tol: float = 1e-10) -> MomentumTable:
    """Integrate the momentum quadratures and return an invertible table.

    Parameters
    ----------
    base : BaseData
    mu0 : float
        Gauge f'(0) = mu0 > 0.
    tau_range : (float, float)
        Span (tau_min, tau_max) with 0 < tau_min < mu0 < tau_max.
        Defaults to (mu0 * 1e-9, max(50, 50 mu0)).
    tol : float
        Required table accuracy; verified against adaptive quadrature
        at random anchors.  Failure raises :class:`AccuracyError`.
    """
    if not mu0 > 0:
        raise ValueError(f"mu0 must be positive, got {mu0}")
    if tau_range is None:
        tau_range = (mu0 * 1e-9, max(50.0, 50.0 * mu0))
    tau_min, tau_max = map(float, tau_range)
    if not 0 < tau_min < mu0 < tau_max:
        raise ValueError(f"need 0 < tau_min < mu0 < tau_max, got {tau_range} around {mu0}")
    if not tol > 0:
        raise ValueError("tol must be positive")

    def rhs(s, y):
        phi, _, r = phi_q_r(base, s)
        return [r, s / phi if s > 0 else 0.5]

    opts = dict(method="DOP853", rtol=min(1e-12, tol), atol=min(1e-14, tol * 1e-2),
                dense_output=True)
    sol_lo = solve_ivp(rhs, (mu0, tau_min), [0.0, 0.0], **opts)
    sol_hi = solve_ivp(rhs, (mu0, tau_max), [0.0, 0.0], **opts)
    if not (sol_lo.success and sol_hi.success):
        raise AccuracyError("momentum quadrature did not converge", achieved=math.inf)

    # anchor check: dense output vs adaptive quadrature at a few nodes
    rng = np.random.default_rng(1234)
    worst = 0.0
    anchors = np.concatenate([
        np.exp(rng.uniform(math.log(tau_min), math.log(mu0), size=3)),
        np.exp(rng.uniform(math.log(mu0), math.log(tau_max), size=3)),
    ])
    for a in anchors:
        dense = sol_lo.sol if a < mu0 else sol_hi.sol
        treg, f = dense(a)
        q_t, _ = quad(lambda s: _remainder(base, s), mu0, a, epsabs=1e-13, epsrel=1e-13, limit=200)
        q_f, _ = quad(lambda s: s / _phi_scalar(base, s), mu0, a, epsabs=1e-13, epsrel=1e-13, limit=200)
        worst = max(worst, abs(treg - q_t), abs(f - q_f))
    if worst > tol:
        raise AccuracyError("momentum table misses the requested tolerance", achieved=worst)

    # geometric sample nodes on both sides of the gauge point
    lo_nodes = np.geomspace(tau_min, mu0, 160)
    hi_nodes = np.geomspace(mu0, tau_max, 240)[1:]
    taus = np.concatenate([lo_nodes, hi_nodes])
    samples = np.zeros(len(taus), dtype=[("tau", float), ("t", float), ("f", float)])
    for i, s in enumerate(taus):
        dense = sol_lo.sol if s < mu0 else sol_hi.sol
        treg, f = dense(s)
        samples["tau"][i] = s
        samples["t"][i] = 0.5 * math.log(s / mu0) + treg
        samples["f"][i] = f
    samples.flags.writeable = False

    return MomentumTable(base=base, mu0=float(mu0), samples=samples, interp=_INTERP_DEGREE,
                         accuracy=worst, _dense_lo=sol_lo.sol, _dense_hi=sol_hi.sol)


def f_derivatives_at(base: BaseData, mu0_at_point: float, order: int = 4) -> Jet:
    """Derivatives f', f'', ..., f^(order) at the t-value where f' equals mu0_at_point.

    Uses the recursion f^(m) = phi(tau) * d/dtau f^(m-1) seeded by
    f' = tau, so no table is needed.  The returned jet is in the variable
    t with divided coefficients; its constant term is a placeholder zero
    (the value of f itself is a table quantity, not a local one).

    The dtype follows ``mu0_at_point``: pass an mpmath value to run the
    ladder in the active working precision (the coefficient matrices of
    the inducibility tests need this at small mu0).
    """
    tau0 = mu0_at_point if _is_mp(mu0_at_point) else float(mu0_at_point)
    if not tau0 > 0:
        raise ValueError(f"evaluation point tau must be positive, got {tau0}")
    if not 1 <= order <= 12:
        raise ValueError(f"order must be in 1..12, got {order}")
    phi_jet = phi_eval(base, tau0, order=max(order - 1, 0)).values
    coeffs = [0 * tau0, tau0]
    current = Jet.variable(tau0, order - 1)   # F_1(tau) = f' = tau
    for m in range(2, order + 1):
        current = phi_jet.truncate(current.order - 1) * current.differentiate()
        coeffs.append(current.coeffs[0] / math.factorial(m))
    return Jet(order, coeffs)


def scaling_check(base: BaseData, c: float, mu0: float = 1.0) -> float:
    """max_t |c f(t) - fhat(t)| where fhat solves the rescaled problem.

    The rescaled base scaling_map(base, c) with gauge c*mu0 must
    reproduce c times the original momentum profile at equal t.
    """
    if not c > 0:
        raise ValueError("scale factor must be positive")
    table = build_table(base, mu0, (mu0 * 1e-4, 30 * mu0))
    scaled = build_table(scaling_map(base, c), c * mu0, (c * mu0 * 1e-4, 30 * c * mu0))
    t_lo = max(table.samples["t"][0], scaled.samples["t"][0]) * 0.5
    t_hi = min(table.samples["t"][-1], scaled.samples["t"][-1]) * 0.8
    worst = 0.0
    for t in np.linspace(t_lo, t_hi, 60):
        worst = max(worst, abs(c * table.f_of_t(t) - scaled.f_of_t(t)))
    return worst
