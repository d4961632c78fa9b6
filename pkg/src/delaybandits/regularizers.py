"""Time-varying regularizers for the FTRL solves.

A regularizer here is a sum of two convex components,

    R(p) = B_psi(p, psi_prior) + B_phi(p, phi_prior),

where B_f(p, u) = f(p) - f(u) - <grad f(u), p - u> is the Bregman
divergence of the component and the priors are fixed reference
distributions.  Three component families are supported:

* ``WeightedNegEntropy``: sum_i p_i ln(p_i) / rate_i, one learning rate
  per coordinate (used with a per-(arm, rate) grid in the full
  information learner; a single shared rate recovers plain hedge).
* ``LogBarrierOverMarginals`` + ``PerRateNegEntropy``: a log barrier on
  the per-arm marginals at rate eta plus a negative entropy at rate
  gamma_j on each rate column (the partially concealed learner).
* ``TsallisEntropyHybrid``: -(1/eta) sum_i sqrt(p_i) plus
  (1/gamma) sum_i p_i ln p_i on the plain simplex (the concealed
  learner).

Vectors over the enlarged decision set are flat with coordinate
(arm i, rate j) at index i*J + j, both 0-based; ``flat_index`` is the
codec.  Evaluation floors probabilities at ``EVAL_FLOOR`` before taking
logarithms so that root-finder probes of tiny coordinates stay finite;
the floor is never written back into any stored state.  Nonpositive
coordinates are a domain error everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EVAL_FLOOR = 1e-300

__all__ = [
    "EVAL_FLOOR",
    "WeightedNegEntropy",
    "LogBarrierOverMarginals",
    "PerRateNegEntropy",
    "TsallisEntropyHybrid",
    "ZeroRegularizer",
    "HybridRegularizer",
    "flat_index",
    "value",
    "gradient",
    "hessian_inverse_apply",
]


def flat_index(arm_index: int, rate_index: int, rates_per_arm: int) -> int:
    """Flat coordinate of (arm, rate), all 0-based."""
    return arm_index * rates_per_arm + rate_index


def _checked(p: np.ndarray, dim: int) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (dim,):
        raise ValueError(f"expected a vector of length {dim}, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or np.any(p <= 0.0):
        raise ValueError("coordinates must be finite and strictly positive")
    return p


def _xlogx(p: np.ndarray) -> np.ndarray:
    return p * np.log(np.maximum(p, EVAL_FLOOR))


def _kl_terms(p: np.ndarray, u: np.ndarray) -> np.ndarray:
    # p ln(p/u) + u - p, nonnegative for every coordinate; clip float dust
    terms = p * (np.log(np.maximum(p, EVAL_FLOOR)) - np.log(u)) + u - p
    return np.maximum(terms, 0.0)


@dataclass(frozen=True)
class WeightedNegEntropy:
    """psi(p) = sum_i p_i ln(p_i) / rates_i."""

    rates: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.rates, dtype=float)
        if r.ndim != 1 or r.size == 0 or not np.all(np.isfinite(r)) or r.min() <= 0.0:
            raise ValueError("rates must be a vector of positive finite numbers")
        object.__setattr__(self, "rates", r)

    @property
    def dimension(self) -> int:
        return self.rates.size

    def value(self, p: np.ndarray) -> float:
        p = _checked(p, self.dimension)
        return float(np.sum(_xlogx(p) / self.rates))

    def gradient(self, p: np.ndarray) -> np.ndarray:
        p = _checked(p, self.dimension)
        return (np.log(np.maximum(p, EVAL_FLOOR)) + 1.0) / self.rates

    def bregman(self, p: np.ndarray, u: np.ndarray) -> float:
        p = _checked(p, self.dimension)
        u = _checked(u, self.dimension)
        return float(np.sum(_kl_terms(p, u) / self.rates))


@dataclass(frozen=True)
class LogBarrierOverMarginals:
    """psi(p) = -(1/rate) sum_{arms} ln(q_i) with q_i = sum_j p_{(i,j)}."""

    rate: float
    num_arms: int
    rates_per_arm: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.rate) or self.rate <= 0.0:
            raise ValueError("rate must be positive and finite")
        if self.num_arms < 1 or self.rates_per_arm < 1:
            raise ValueError("num_arms and rates_per_arm must be >= 1")

    @property
    def dimension(self) -> int:
        return self.num_arms * self.rates_per_arm

    def marginals(self, p: np.ndarray) -> np.ndarray:
        return p.reshape(self.num_arms, self.rates_per_arm).sum(axis=1)

    def value(self, p: np.ndarray) -> float:
        p = _checked(p, self.dimension)
        return float(-np.sum(np.log(np.maximum(self.marginals(p), EVAL_FLOOR))) / self.rate)

    def gradient(self, p: np.ndarray) -> np.ndarray:
        p = _checked(p, self.dimension)
        q = np.maximum(self.marginals(p), EVAL_FLOOR)
        return np.repeat(-1.0 / (self.rate * q), self.rates_per_arm)

    def bregman(self, p: np.ndarray, u: np.ndarray) -> float:
        p = _checked(p, self.dimension)
        u = _checked(u, self.dimension)
        q, q0 = self.marginals(p), self.marginals(u)
        terms = -np.log(np.maximum(q / q0, EVAL_FLOOR)) + (q - q0) / q0
        return float(np.sum(np.maximum(terms, 0.0)) / self.rate)


@dataclass(frozen=True)
class PerRateNegEntropy:
    """phi(p) = sum_{i,j} p_{(i,j)} ln(p_{(i,j)}) / col_rates_j."""

    col_rates: np.ndarray
    num_arms: int

    def __post_init__(self) -> None:
        r = np.asarray(self.col_rates, dtype=float)
        if r.ndim != 1 or r.size == 0 or not np.all(np.isfinite(r)) or r.min() <= 0.0:
            raise ValueError("col_rates must be a vector of positive finite numbers")
        if self.num_arms < 1:
            raise ValueError("num_arms must be >= 1")
        object.__setattr__(self, "col_rates", r)

    @property
    def rates_per_arm(self) -> int:
        return self.col_rates.size

    @property
    def dimension(self) -> int:
        return self.num_arms * self.rates_per_arm

    def _flat_rates(self) -> np.ndarray:
        return np.tile(self.col_rates, self.num_arms)

    def value(self, p: np.ndarray) -> float:
        p = _checked(p, self.dimension)
        return float(np.sum(_xlogx(p) / self._flat_rates()))

    def gradient(self, p: np.ndarray) -> np.ndarray:
        p = _checked(p, self.dimension)
        return (np.log(np.maximum(p, EVAL_FLOOR)) + 1.0) / self._flat_rates()

    def bregman(self, p: np.ndarray, u: np.ndarray) -> float:
        p = _checked(p, self.dimension)
        u = _checked(u, self.dimension)
        return float(np.sum(_kl_terms(p, u) / self._flat_rates()))


@dataclass(frozen=True)
class TsallisEntropyHybrid:
    """-(1/tsallis_rate) sum_i sqrt(p_i) + (1/entropy_rate) sum_i p_i ln p_i."""

    tsallis_rate: float
    entropy_rate: float
    dimension: int

    def __post_init__(self) -> None:
        if not (np.isfinite(self.tsallis_rate) and self.tsallis_rate > 0.0):
            raise ValueError("tsallis_rate must be positive and finite")
        if not (np.isfinite(self.entropy_rate) and self.entropy_rate > 0.0):
            raise ValueError("entropy_rate must be positive and finite")
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")

    def value(self, p: np.ndarray) -> float:
        p = _checked(p, self.dimension)
        return float(-np.sum(np.sqrt(p)) / self.tsallis_rate + np.sum(_xlogx(p)) / self.entropy_rate)

    def gradient(self, p: np.ndarray) -> np.ndarray:
        p = _checked(p, self.dimension)
        pf = np.maximum(p, EVAL_FLOOR)
        return -0.5 / (self.tsallis_rate * np.sqrt(pf)) + (np.log(pf) + 1.0) / self.entropy_rate

    def bregman(self, p: np.ndarray, u: np.ndarray) -> float:
        p = _checked(p, self.dimension)
        u = _checked(u, self.dimension)
        root_terms = (np.sqrt(p) - np.sqrt(u)) ** 2 / (2.0 * np.sqrt(u))
        return float(
            np.sum(root_terms) / self.tsallis_rate + np.sum(_kl_terms(p, u)) / self.entropy_rate
        )


@dataclass(frozen=True)
class ZeroRegularizer:
    """phi identically zero."""

    dimension: int

    def value(self, p: np.ndarray) -> float:
        _checked(p, self.dimension)
        return 0.0

    def gradient(self, p: np.ndarray) -> np.ndarray:
        _checked(p, self.dimension)
        return np.zeros(self.dimension)

    def bregman(self, p: np.ndarray, u: np.ndarray) -> float:
        _checked(p, self.dimension)
        return 0.0


def _check_prior(prior: np.ndarray, dim: int) -> np.ndarray:
    prior = _checked(prior, dim)
    if abs(prior.sum() - 1.0) > 1e-6:
        raise ValueError("prior must sum to 1")
    return prior


@dataclass(frozen=True)
class HybridRegularizer:
    """R(p) = B_psi(p, psi_prior) + B_phi(p, phi_prior).

    ``psi`` is one of WeightedNegEntropy, LogBarrierOverMarginals or
    TsallisEntropyHybrid; ``phi`` is PerRateNegEntropy or
    ZeroRegularizer.  ``phi_prior`` may be None when phi is zero.
    """

    psi: object
    phi: object
    psi_prior: np.ndarray
    phi_prior: np.ndarray | None = None

    def __post_init__(self) -> None:
        dim = self.psi.dimension
        if self.phi.dimension != dim:
            raise ValueError("psi and phi dimensions disagree")
        object.__setattr__(self, "psi_prior", _check_prior(self.psi_prior, dim))
        if isinstance(self.phi, ZeroRegularizer):
            object.__setattr__(self, "phi_prior", None)
        else:
            if self.phi_prior is None:
                raise ValueError("phi_prior required for a nonzero phi component")
            object.__setattr__(self, "phi_prior", _check_prior(self.phi_prior, dim))

    @property
    def dimension(self) -> int:
        return self.psi.dimension

    def value(self, p: np.ndarray) -> float:
        total = self.psi.bregman(p, self.psi_prior)
        if self.phi_prior is not None:
            total += self.phi.bregman(p, self.phi_prior)
        return total

    def gradient(self, p: np.ndarray) -> np.ndarray:
        """Gradient of the underlying F = psi + phi (prior-independent part)."""
        return self.psi.gradient(p) + self.phi.gradient(p)

    def prior_gradient(self) -> np.ndarray:
        """grad psi(psi_prior) + grad phi(phi_prior)."""
        g = self.psi.gradient(self.psi_prior)
        if self.phi_prior is not None:
            g = g + self.phi.gradient(self.phi_prior)
        return g

    def loss_offset(self) -> np.ndarray:
        """The additive offset L0 = -prior_gradient() that turns the
        Bregman penalties into plain F: minimizing <p, L + L0> + F(p)
        over the simplex equals minimizing <p, L> + value(p), so a zero
        cumulative loss reproduces the prior."""
        return -self.prior_gradient()

    def hessian_apply(self, p: np.ndarray, v: np.ndarray) -> np.ndarray:
        p = _checked(p, self.dimension)
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dimension,):
            raise ValueError("vector shape mismatch")
        psi, phi = self.psi, self.phi
        if isinstance(psi, WeightedNegEntropy) and isinstance(phi, ZeroRegularizer):
            return v / (psi.rates * p)
        if isinstance(psi, LogBarrierOverMarginals) and isinstance(phi, PerRateNegEntropy):
            K, J = psi.num_arms, psi.rates_per_arm
            P = p.reshape(K, J)
            V = v.reshape(K, J)
            q = P.sum(axis=1)
            block = V.sum(axis=1) / (psi.rate * q * q)
            return (block[:, None] + V / (phi.col_rates[None, :] * P)).ravel()
        if isinstance(psi, TsallisEntropyHybrid) and isinstance(phi, ZeroRegularizer):
            diag = 0.25 / (psi.tsallis_rate * p ** 1.5) + 1.0 / (psi.entropy_rate * p)
            return v * diag
        raise ValueError("unsupported psi/phi combination")

    def hessian_inverse_apply(self, p: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Solve H(p) x = v for the structured Hessian of F at p.

        Diagonal for the entropy and Tsallis families; for the log
        barrier over marginals the per-arm block is
        ones*ones'/(rate*q^2) + diag(1/(gamma_j p)), inverted in closed
        form by a rank-one update of the diagonal inverse.
        """
        p = _checked(p, self.dimension)
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dimension,):
            raise ValueError("vector shape mismatch")
        psi, phi = self.psi, self.phi
        if isinstance(psi, WeightedNegEntropy) and isinstance(phi, ZeroRegularizer):
            return v * psi.rates * p
        if isinstance(psi, LogBarrierOverMarginals) and isinstance(phi, PerRateNegEntropy):
            K, J = psi.num_arms, psi.rates_per_arm
            P = p.reshape(K, J)
            V = v.reshape(K, J)
            q = P.sum(axis=1)
            w = phi.col_rates[None, :] * P  # diagonal inverse entries
            wv = w * V
            denom = psi.rate * q * q + w.sum(axis=1)
            return (wv - w * (wv.sum(axis=1) / denom)[:, None]).ravel()
        if isinstance(psi, TsallisEntropyHybrid) and isinstance(phi, ZeroRegularizer):
            diag = 0.25 / (psi.tsallis_rate * p ** 1.5) + 1.0 / (psi.entropy_rate * p)
            return v / diag
        raise ValueError("unsupported psi/phi combination")


def value(reg: HybridRegularizer, p: np.ndarray) -> float:
    return reg.value(p)


def gradient(reg: HybridRegularizer, p: np.ndarray) -> np.ndarray:
    return reg.gradient(p)


def hessian_inverse_apply(reg: HybridRegularizer, p: np.ndarray, v: np.ndarray) -> np.ndarray:
    return reg.hessian_inverse_apply(p, v)
