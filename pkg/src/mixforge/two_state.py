"""Two-state stationary reversible chains used as building blocks.

A block is indexed by ``(epsilon, theta)``: stationary law ``(1 - eps, eps)``
and transition matrix ``theta * I + (1 - theta) * A`` where both rows of
``A`` are the stationary law.  Its n-step matrix is the block with
``theta**n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CompositionError, ParameterError


@dataclass(frozen=True)
class BlockParams:
    epsilon: float
    theta: float

    def __post_init__(self):
        if not (0.0 < self.epsilon <= 0.5):
            raise ParameterError(f"epsilon must lie in (0, 1/2], got {self.epsilon}")
        if not (0.0 < self.theta < 1.0):
            raise ParameterError(f"theta must lie in (0, 1), got {self.theta}")


@dataclass(frozen=True)
class JointMatrix2:
    lam: np.ndarray
    params: BlockParams


@dataclass(frozen=True)
class TransitionMatrix2:
    p: np.ndarray
    params: BlockParams


def joint_entries(eps: float, theta: float) -> np.ndarray:
    """Joint table without parameter checks (``theta`` may round to 1)."""
    c = (1.0 - eps) * eps
    return np.array([
        [(1.0 - eps) ** 2 + c * theta, c - c * theta],
        [c - c * theta, eps * eps + c * theta],
    ])


def transition_entries(eps: float, theta: float) -> np.ndarray:
    return np.array([
        [(1.0 - eps) + eps * theta, eps - eps * theta],
        [(1.0 - eps) - (1.0 - eps) * theta, eps + (1.0 - eps) * theta],
    ])


def make_joint(bp: BlockParams) -> JointMatrix2:
    """Stationary joint law of two consecutive states of the block."""
    return JointMatrix2(joint_entries(bp.epsilon, bp.theta), bp)


def make_transition(bp: BlockParams) -> TransitionMatrix2:
    return TransitionMatrix2(transition_entries(bp.epsilon, bp.theta), bp)


def compose(a: TransitionMatrix2, b: TransitionMatrix2) -> TransitionMatrix2:
    """Matrix product; stays in the family with ``theta = theta_a * theta_b``."""
    if a.params.epsilon != b.params.epsilon:
        raise CompositionError(
            f"cannot compose blocks with epsilon {a.params.epsilon} and {b.params.epsilon}"
        )
    bp = BlockParams(a.params.epsilon, a.params.theta * b.params.theta)
    return TransitionMatrix2(a.p @ b.p, bp)


def joint_from_transition(bp: BlockParams) -> JointMatrix2:
    """Push the stationary law ``(1 - eps, eps)`` through one transition."""
    pi = np.array([1.0 - bp.epsilon, bp.epsilon])
    return JointMatrix2(pi[:, None] * make_transition(bp).p, bp)


def block_coeffs(bp: BlockParams, n: int) -> tuple[float, float, float]:
    """Closed-form ``(alpha, beta, rho)`` of the block at lag ``n``."""
    if int(n) != n or n < 1:
        raise ParameterError(f"lag must be a positive integer, got {n}")
    rho = bp.theta ** int(n)
    c = (1.0 - bp.epsilon) * bp.epsilon
    return c * rho, 2.0 * c * rho, rho
