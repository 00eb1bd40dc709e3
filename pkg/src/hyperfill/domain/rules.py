from __future__ import annotations

import math
from collections.abc import Iterable


class ValidationError(ValueError):
    pass


class MetricAxiomError(ValidationError):
    def __init__(self, message: str, triple: tuple[str, str, str] | None = None) -> None:
        super().__init__(message)
        self.triple = triple


class HypothesisError(ValidationError):
    """A check was refused because the inequality it tests assumes something that fails here."""


def validate_enum(value: str | None, allowed: Iterable[str], field: str) -> None:
    if value is None:
        return
    if value not in allowed:
        raise ValidationError(f"{field} must be one of: {', '.join(sorted(allowed))}")


def require_finite(value: float, field: str) -> float:
    try:
        number = float(value)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{field} must be a number.") from exc
    if not math.isfinite(number):
        raise ValidationError(f"{field} must be finite.")
    return number


def require_int(value: int, field: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{field} must be an integer.")
    if minimum is not None and value < minimum:
        raise ValidationError(f"{field} must be >= {minimum} (got {value}).")
    return value


def tau_bound(alpha: float) -> float:
    return max(3.0, alpha / (alpha - 1.0))


def validate_filling(alpha: float, tau: float, n_min: int | None, n_max: int | None) -> None:
    alpha = require_finite(alpha, "alpha")
    if alpha <= 1:
        raise ValidationError(f"alpha must be > 1 (got {alpha:g}).")
    tau = require_finite(tau, "tau")
    bound = tau_bound(alpha)
    if tau <= bound:
        raise ValidationError(
            f"tau must satisfy tau > max{{3, alpha/(alpha-1)}} = {bound:g} (got {tau:g})."
        )
    if n_min is not None:
        require_int(n_min, "n_min")
    if n_max is not None:
        require_int(n_max, "n_max")
    if n_min is not None and n_max is not None and n_min > n_max:
        raise ValidationError(f"n_min must be <= n_max (got {n_min} > {n_max}).")


def validate_beta(beta: float) -> float:
    beta = require_finite(beta, "beta")
    if beta <= 0:
        raise ValidationError(f"beta must be > 0 (got {beta:g}).")
    return beta


def validate_besov(p: float, theta: float) -> None:
    p = require_finite(p, "p")
    if p < 1:
        raise ValidationError(f"p must be >= 1 (got {p:g}).")
    theta = require_finite(theta, "theta")
    if not 0 < theta < 1:
        raise ValidationError(f"theta must lie in (0, 1) (got {theta:g}).")


def validate_snowflake(eps: float) -> float:
    eps = require_finite(eps, "eps")
    if not 0 < eps <= 1:
        raise ValidationError(f"eps must lie in (0, 1] (got {eps:g}).")
    return eps


class ConsistencyError(RuntimeError):
    """A construction produced a state its own guarantees rule out."""
