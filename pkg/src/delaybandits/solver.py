"""Constrained FTRL solves over the (enlarged) probability simplex.

``solve`` computes  argmin_{p in simplex} <p, z> + F(p)  where z is the
shifted cumulative loss (observed losses plus the prior offset L0) and
F = psi + phi is the underlying convex function of a
:class:`~delaybandits.regularizers.HybridRegularizer`.  The KKT system
is  grad F(p) = c - z  together with sum(p) = 1, so the solve reduces to
a one-dimensional root find in the multiplier c:

* weighted negative entropy: p_i(c) = exp(rate_i (c - z_i) - 1) in
  closed form;
* log barrier over marginals + per-rate entropy: for each arm the
  marginal q solves  q = sum_j exp(gamma_j (c - z_ij + 1/(eta q)) - 1),
  solved as a bracketed Newton iteration on the increasing function
  F(w) = logsumexp(...) + ln(eta w) of the barrier variable w = 1/(eta q),
  vectorized across arms;
* Tsallis/entropy hybrid: each coordinate solves the increasing concave
  equation  -1/(2 eta sqrt(p)) + (ln p + 1)/gamma = c - z_i.

The sum S(c) = sum(p(c)) - 1 is strictly increasing in c; the outer
loop keeps a bracket around its root and takes Newton steps inside it,
falling back to bisection whenever a step leaves the bracket.

Residuals are reported as the max-norm of grad F(p) + z - c, except at
coordinates that have collapsed below ``ACTIVITY_FLOOR`` (only possible
when loss spreads exceed roughly 700/rate, where the optimal coordinate
underflows float64): there the honest KKT statement is one-sided, and
only  c - z - grad F < 0  counts as a violation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .regularizers import (
    EVAL_FLOOR,
    HybridRegularizer,
    LogBarrierOverMarginals,
    PerRateNegEntropy,
    TsallisEntropyHybrid,
    WeightedNegEntropy,
    ZeroRegularizer,
)

TOTAL_TOL = 1e-12  # |sum(p) - 1| at acceptance
TOTAL_TOL_FALLBACK = 1e-10  # accepted when the c-bracket hits float resolution
KKT_TOL = 1e-8
COORD_TOL = 1e-10  # Tsallis coordinate equation residual
MAX_OUTER = 200
MAX_INNER = 200
CLAMP = 700.0
ACTIVITY_FLOOR = 1e-250
Q_FLOOR = 1e-300
Q_CAP = 1e9  # inner roots above this only occur while probing c far from the solution

_EPS = float(np.finfo(float).eps)

# Direct ufunc reductions for the evaluator loops: the np.all / np.sum /
# np.clip wrappers each add a python dispatch frame, paid tens of
# thousands of times per episode at desk scale.
_all = np.logical_and.reduce
_rsum = np.add.reduce
_rowmax = np.maximum.reduce

__all__ = [
    "SolveResult",
    "SolverError",
    "solve",
    "kkt_residual",
    "coordinate_solve_entropy",
    "coordinate_solve_tsallis_entropy",
    "arm_block_solve",
    "KKT_TOL",
    "TOTAL_TOL",
]


class SolverError(RuntimeError):
    """Raised when the solve does not reach its tolerances."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


@dataclass
class SolveResult:
    distribution: np.ndarray
    multiplier: float
    residual: float
    iterations: int
    marginals: np.ndarray | None = None


# ---------------------------------------------------------------------------
# per-family evaluators: S(c), S'(c), plus the distribution at the last c
# ---------------------------------------------------------------------------


class _EntropyEval:
    def __init__(self, rates: np.ndarray, z: np.ndarray):
        self.rates = rates
        self.z = z
        self.p: np.ndarray | None = None

    def default_c(self) -> float:
        return float(np.min(self.z))

    def __call__(self, c: float) -> tuple[float, float]:
        a = np.minimum(np.maximum(self.rates * (c - self.z) - 1.0, -CLAMP), CLAMP)
        p = np.exp(a)
        self.p = p
        return float(_rsum(p) - 1.0), float(np.dot(self.rates, p))

    def extract(self) -> tuple[np.ndarray, np.ndarray | None]:
        return self.p, None


class _BlockEval:
    """Per-arm fixed point  q = sum_j exp(gamma_j (c - z_j + 1/(eta q)) - 1),
    solved in the barrier variable w = 1/(eta q).  In that variable the
    equation reads  F(w) = logsumexp_j(gamma_j (c - z_j + w) - 1) + ln(eta w)
    = 0 with F strictly increasing and F' = v + 1/w for a softmax-weighted
    rate v in [gamma_min, gamma_max], so a bracketed Newton iteration is
    fast from both sides and never sees overflow.  Direct Newton on q is
    useless here: on the barrier side the steps shrink like eta q^2 / v
    while the residual stays astronomical."""

    def __init__(
        self,
        eta: float,
        gammas: np.ndarray,
        Z: np.ndarray,
        q_warm: np.ndarray | None,
    ):
        self.eta = eta
        self.gammas = gammas
        self.Z = Z
        K = Z.shape[0]
        self.q = q_warm.copy() if q_warm is not None else np.full(K, 1.0 / K)
        self.E: np.ndarray | None = None
        self.h: np.ndarray | None = None

    def default_c(self) -> float:
        return float(np.min(self.Z))

    def __call__(self, c: float) -> tuple[float, float]:
        eta = self.eta
        G = self.gammas[None, :]
        wlo0 = 1.0 / (eta * Q_CAP)
        whi0 = min(1.0 / (eta * Q_FLOOR), 1e306)
        q0 = np.minimum(np.maximum(self.q, Q_FLOOR), Q_CAP)
        w = np.minimum(np.maximum(1.0 / (eta * q0), wlo0), whi0)
        K = w.size
        wlo = np.full(K, wlo0)
        whi = np.full(K, whi0)
        B = G * (c - self.Z) - 1.0
        A = m = T = s = None
        fresh = False
        for _ in range(MAX_INNER):
            A = B + G * w[:, None]
            m = _rowmax(A, axis=1)
            T = np.exp(A - m[:, None])
            s = _rsum(T, axis=1)
            lnew = np.log(eta * w)
            F = m + np.log(s) + lnew
            neg = F < 0.0
            wlo = np.where(neg, np.maximum(wlo, w), wlo)
            whi = np.where(neg, whi, np.minimum(whi, w))
            # noise floor of F is set by the cancellation in m + ln(eta w)
            tol = 2e-13 + 2.0 * _EPS * (np.abs(m) + np.abs(lnew))
            done = (np.abs(F) <= tol) | (whi - wlo <= 4.0 * _EPS * whi)
            if _all(done):
                fresh = True
                break
            v = (T @ self.gammas) / s
            wn = w - F / (v + 1.0 / w)
            bad = ~np.isfinite(wn) | (wn <= wlo) | (wn >= whi)
            # geometric midpoint: the bracket spans hundreds of decades
            wn = np.where(bad, np.sqrt(wlo) * np.sqrt(whi), wn)
            # freeze converged blocks: a rejected zero-length step would
            # otherwise throw them back to the midpoint while the rest
            # of the blocks finish
            wn = np.where(done, w, wn)
            if _all(np.abs(wn - w) <= 2.0 * _EPS * w):
                w = wn
                break
            w = wn
        if not fresh:
            A = B + G * w[:, None]
            m = _rowmax(A, axis=1)
            T = np.exp(A - m[:, None])
            s = _rsum(T, axis=1)
        E = np.exp(np.minimum(np.maximum(A, -745.0), CLAMP))
        h = _rsum(E, axis=1)
        v = (T @ self.gammas) / s
        self.q = h
        self.E = E
        self.h = h
        dqdc = h * v / (1.0 + v * w)
        return float(_rsum(h) - 1.0), float(_rsum(dqdc))

    def extract(self) -> tuple[np.ndarray, np.ndarray | None]:
        return self.E.ravel(), self.h.copy()


class _TsallisEval:
    def __init__(self, eta: float, gamma: float, z: np.ndarray, p_warm: np.ndarray | None):
        self.eta = eta
        self.gamma = gamma
        self.z = z
        n = z.size
        self.p = p_warm.copy() if p_warm is not None else np.full(n, 1.0 / n)
        self.fp: np.ndarray | None = None

    def default_c(self) -> float:
        return float(np.min(self.z))

    def __call__(self, c: float) -> tuple[float, float]:
        y = c - self.z
        p = _tsallis_roots(self.eta, self.gamma, y, self.p)
        self.p = p
        fp = 0.25 / (self.eta * (p * np.sqrt(p))) + 1.0 / (self.gamma * p)
        self.fp = fp
        return float(_rsum(p) - 1.0), float(_rsum(1.0 / fp))

    def extract(self) -> tuple[np.ndarray, np.ndarray | None]:
        return self.p.copy(), None


def _tsallis_roots(eta: float, gamma: float, y: np.ndarray, p_init: np.ndarray) -> np.ndarray:
    """Vectorized roots of -1/(2 eta sqrt(p)) + (ln p + 1)/gamma = y.

    Solved in x = 1/sqrt(p), where the equation becomes the strictly
    decreasing  F(x) = -x/(2 eta) - (2/gamma) ln x + 1/gamma - y  and a
    bracketed Newton iteration behaves at every scale; Newton directly
    on p stalls in the square-root branch where steps cannot grow the
    iterate by more than a constant factor."""
    x = 1.0 / np.sqrt(np.minimum(np.maximum(p_init, 1e-250), Q_CAP))
    xlo = np.full_like(x, 1.0 / np.sqrt(Q_CAP))
    xhi = np.full_like(x, 1.0 / np.sqrt(1e-250))
    half_eta = 0.5 / eta
    two_gamma = 2.0 / gamma
    const = 1.0 / gamma - y
    tol0 = 1e-12 + 2.0 * _EPS * np.abs(y)
    for _ in range(MAX_INNER):
        hx = half_eta * x
        tl = two_gamma * np.log(x)
        F = const - hx - tl
        pos = F > 0.0
        xlo = np.where(pos, np.maximum(xlo, x), xlo)
        xhi = np.where(pos, xhi, np.minimum(xhi, x))
        tol = tol0 + 2.0 * _EPS * (hx + np.abs(tl))
        done = (np.abs(F) <= tol) | (xhi - xlo <= 4.0 * _EPS * xhi)
        if _all(done):
            break
        xn = x + F / (half_eta + two_gamma / x)
        bad = ~np.isfinite(xn) | (xn <= xlo) | (xn >= xhi)
        xn = np.where(bad, np.sqrt(xlo) * np.sqrt(xhi), xn)
        # freeze converged coordinates; a rejected zero-length step would
        # otherwise throw them back to the midpoint
        xn = np.where(done, x, xn)
        if _all(np.abs(xn - x) <= 2.0 * _EPS * x):
            x = xn
            break
        x = xn
    return 1.0 / (x * x)


# ---------------------------------------------------------------------------
# outer multiplier search
# ---------------------------------------------------------------------------


def _find_multiplier(ev, c0: float) -> tuple[float, int]:
    iters = 0

    def probe(c: float) -> tuple[float, float]:
        nonlocal iters
        iters += 1
        return ev(c)

    c = c0
    S, Sp = probe(c)
    if abs(S) <= TOTAL_TOL:
        return c, iters
    lo = c if S < 0.0 else None
    hi = c if S > 0.0 else None
    step = 1.0
    best = (abs(S), c)
    for _ in range(MAX_OUTER):
        if lo is not None and hi is not None:
            cn = c - S / Sp if np.isfinite(Sp) and Sp > 0.0 else None
            if cn is None or not (lo < cn < hi):
                cn = 0.5 * (lo + hi)
        else:
            # expansion: pure step doubling; Newton extrapolations here can
            # jump hundreds of decades off a derivative at the underflow
            # floor, leaving a bracket too wide to bisect in any budget
            want = 1.0 if S < 0.0 else -1.0
            cn = c + want * step
            step *= 2.0
        S, Sp = probe(cn)
        c = cn
        if S < 0.0:
            lo = c if lo is None else max(lo, c)
        elif S > 0.0:
            hi = c if hi is None else min(hi, c)
        if abs(S) <= TOTAL_TOL:
            return c, iters
        if abs(S) < best[0]:
            best = (abs(S), c)
        if (
            lo is not None
            and hi is not None
            and hi - lo <= 8.0 * _EPS * max(1.0, abs(lo), abs(hi))
        ):
            if best[0] <= TOTAL_TOL_FALLBACK:
                if best[1] != c:
                    S, Sp = probe(best[1])
                    c = best[1]
                return c, iters
            raise SolverError(
                f"multiplier bracket collapsed with |sum(p)-1| = {best[0]:.3e}",
                residual=best[0],
            )
    raise SolverError(
        f"no convergence in {MAX_OUTER} multiplier iterations, best |sum(p)-1| = {best[0]:.3e}",
        residual=best[0],
    )


# ---------------------------------------------------------------------------
# public interface
# ---------------------------------------------------------------------------


def _make_evaluator(reg: HybridRegularizer, z: np.ndarray, warm: SolveResult | None):
    psi, phi = reg.psi, reg.phi
    if isinstance(psi, WeightedNegEntropy) and isinstance(phi, ZeroRegularizer):
        return _EntropyEval(psi.rates, z)
    if isinstance(psi, LogBarrierOverMarginals) and isinstance(phi, PerRateNegEntropy):
        K, J = psi.num_arms, psi.rates_per_arm
        q_warm = None
        if warm is not None:
            if warm.marginals is not None and warm.marginals.size == K:
                q_warm = warm.marginals
            elif warm.distribution.size == K * J:
                q_warm = warm.distribution.reshape(K, J).sum(axis=1)
        return _BlockEval(psi.rate, phi.col_rates, z.reshape(K, J), q_warm)
    if isinstance(psi, TsallisEntropyHybrid) and isinstance(phi, ZeroRegularizer):
        p_warm = None
        if warm is not None and warm.distribution.size == z.size:
            p_warm = warm.distribution
        return _TsallisEval(psi.tsallis_rate, psi.entropy_rate, z, p_warm)
    raise ValueError("unsupported psi/phi combination")


def _stationarity_residual(
    p: np.ndarray, z: np.ndarray, c: float, reg: HybridRegularizer
) -> float:
    lifted = np.maximum(p, EVAL_FLOOR)
    r = reg.gradient(lifted) + z - c
    viol = np.abs(r)
    pinned = p <= ACTIVITY_FLOOR
    if np.any(pinned):
        viol[pinned] = np.maximum(0.0, -r[pinned])
    return float(viol.max())


def solve(
    total_loss: np.ndarray,
    reg: HybridRegularizer,
    warm: SolveResult | None = None,
) -> SolveResult:
    """Minimize <p, total_loss> + F(p) over the simplex.

    ``total_loss`` is the shifted loss z (cumulative estimates plus the
    prior offset).  ``warm`` may carry the previous round's result for
    the same family; it seeds both the multiplier and the inner
    iterations and never changes what the solve converges to.
    """
    z = np.asarray(total_loss, dtype=float)
    if z.ndim != 1 or z.size != reg.dimension:
        raise ValueError("total_loss shape does not match the regularizer")
    if not np.all(np.isfinite(z)):
        raise ValueError("total_loss must be finite")
    ev = _make_evaluator(reg, z, warm)
    if warm is not None and np.isfinite(warm.multiplier):
        c0 = float(warm.multiplier)
    else:
        c0 = ev.default_c()
    c, iters = _find_multiplier(ev, c0)
    p, marginals = ev.extract()
    residual = _stationarity_residual(p, z, c, reg)
    if residual > KKT_TOL:
        raise SolverError(
            f"stationarity residual {residual:.3e} exceeds {KKT_TOL:.0e}", residual=residual
        )
    return SolveResult(
        distribution=p,
        multiplier=c,
        residual=residual,
        iterations=iters,
        marginals=marginals,
    )


def kkt_residual(result: SolveResult, total_loss: np.ndarray, reg: HybridRegularizer) -> float:
    """Max-norm stationarity defect of a solve result, complementarity-aware."""
    z = np.asarray(total_loss, dtype=float)
    return _stationarity_residual(result.distribution, z, result.multiplier, reg)


def coordinate_solve_entropy(rate: float, shifted_loss: float, multiplier: float) -> float:
    """Closed-form coordinate of the weighted-entropy family:
    p = exp(rate (multiplier - shifted_loss) - 1)."""
    if rate <= 0.0 or not np.isfinite(rate):
        raise ValueError("rate must be positive and finite")
    return float(np.exp(np.clip(rate * (multiplier - shifted_loss) - 1.0, -CLAMP, CLAMP)))


def coordinate_solve_tsallis_entropy(
    tsallis_rate: float,
    entropy_rate: float,
    shifted_loss: float,
    multiplier: float,
) -> float:
    """Coordinate of the Tsallis/entropy hybrid: the root p of
    -1/(2 eta sqrt(p)) + (ln p + 1)/gamma = multiplier - shifted_loss."""
    if tsallis_rate <= 0.0 or entropy_rate <= 0.0:
        raise ValueError("rates must be positive")
    y = np.array([multiplier - shifted_loss], dtype=float)
    p = _tsallis_roots(tsallis_rate, entropy_rate, y, np.array([1.0]))
    return float(p[0])


def arm_block_solve(
    multiplier: float,
    barrier_rate: float,
    col_rates: np.ndarray,
    shifted_block: np.ndarray,
    warm_marginal: float | None = None,
) -> tuple[float, np.ndarray]:
    """Solve one arm block of the log-barrier family.

    Returns (q, block) with q = sum(block) where
    block_j = exp(gamma_j (multiplier - z_j + 1/(eta q)) - 1).
    """
    gammas = np.asarray(col_rates, dtype=float)
    Z = np.asarray(shifted_block, dtype=float).reshape(1, -1)
    if gammas.shape != (Z.shape[1],):
        raise ValueError("col_rates and shifted_block shapes disagree")
    q0 = np.array([warm_marginal if warm_marginal is not None else 1.0])
    ev = _BlockEval(barrier_rate, gammas, Z, q0)
    ev(multiplier)
    q = float(ev.h[0])
    return q, ev.E.ravel().copy()
