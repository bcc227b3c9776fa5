"""Closed-form integration of complex Gaussian integrands.

A :class:`ComplexQuadraticForm` stands for the function

.. math::
    x \\mapsto \\exp(-\\tfrac12 x^T A x + b^T x + c), \\qquad x \\in \\mathbb{R}^d

with complex symmetric ``A``, complex ``b`` and complex ``c``.  Products of
such functions stay in the family, and so do integrals over any subset of the
variables, which is what makes every amplitude integral of a Gaussian
pump/filter chain computable exactly.

Oscillating factors ``exp(i w t)`` enter as imaginary entries of ``b`` when
``w`` is a fixed parameter, or as imaginary off-diagonal entries of ``A`` when
both ``w`` and ``t`` are integration variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatchError, DivergentIntegralError

LOG_2PI = float(np.log(2.0 * np.pi))

# Re(A) is rejected as non-integrable below this eigenvalue ratio.
CONDITION_THRESHOLD = 1e-12


@dataclass(frozen=True, eq=False)
class ComplexQuadraticForm:
    """exp(-1/2 x^T A x + b^T x + c) for real x.

    ``A`` is symmetrized on construction.  ``c`` is stored in log space, so
    ``exp(c)`` is the value of the form at the origin.
    """

    A: np.ndarray
    b: np.ndarray
    c: complex = 0.0
    dim: int = field(init=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=complex, ndmin=2) if np.size(self.A) else np.zeros((0, 0), complex)
        b = np.array(self.b, dtype=complex).reshape(-1)
        if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
            raise DimensionMismatchError(f"A has shape {A.shape} but b has length {b.shape[0]}")
        A = 0.5 * (A + A.T)
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", complex(self.c))
        object.__setattr__(self, "dim", A.shape[0])

    @classmethod
    def zero(cls, dim: int) -> "ComplexQuadraticForm":
        """The constant function 1 on ``dim`` variables."""
        return cls(np.zeros((dim, dim)), np.zeros(dim), 0.0)

    @classmethod
    def along(cls, direction: Sequence[float], a: complex, b: complex = 0.0, c: complex = 0.0,
              shift: float = 0.0) -> "ComplexQuadraticForm":
        """Form of ``exp(-a u^2/2 + b u + c)`` with ``u = direction . x - shift``."""
        w = np.asarray(direction, dtype=float)
        # expand -a/2 (w.x - s)^2 + b (w.x - s)
        return cls(a * np.outer(w, w), (a * shift + b) * w, c - 0.5 * a * shift**2 - b * shift)

    def __call__(self, x) -> np.ndarray | complex:
        """Evaluate at one point (shape ``(d,)``) or many points (shape ``(N, d)``)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        if X.shape[1] != self.dim:
            raise DimensionMismatchError(f"expected points of dimension {self.dim}, got {X.shape[1]}")
        quad = np.einsum("ni,ij,nj->n", X, self.A, X)
        val = np.exp(-0.5 * quad + X @ self.b + self.c)
        return complex(val[0]) if single else val

    def log_value(self, x) -> np.ndarray | complex:
        x = np.asarray(x, dtype=float)
        X = np.atleast_2d(x)
        out = -0.5 * np.einsum("ni,ij,nj->n", X, self.A, X) + X @ self.b + self.c
        return complex(out[0]) if x.ndim == 1 else out

    def __mul__(self, other: "ComplexQuadraticForm") -> "ComplexQuadraticForm":
        return product(self, other)

    def conj(self) -> "ComplexQuadraticForm":
        """Pointwise complex conjugate (valid because x is real)."""
        return ComplexQuadraticForm(self.A.conj(), self.b.conj(), np.conj(self.c))

    def scale(self, factor: complex) -> "ComplexQuadraticForm":
        """Multiply the function by a nonzero constant."""
        return ComplexQuadraticForm(self.A, self.b, self.c + np.log(complex(factor)))

    def embed(self, dim: int, indices: Sequence[int]) -> "ComplexQuadraticForm":
        """Lift the form to ``dim`` variables; own variable ``k`` becomes ``indices[k]``."""
        idx = np.asarray(indices, dtype=int)
        if idx.shape != (self.dim,) or len(set(idx.tolist())) != self.dim:
            raise DimensionMismatchError(f"need {self.dim} distinct target indices, got {list(indices)}")
        A = np.zeros((dim, dim), dtype=complex)
        b = np.zeros(dim, dtype=complex)
        A[np.ix_(idx, idx)] = self.A
        b[idx] = self.b
        return ComplexQuadraticForm(A, b, self.c)

    def permute(self, order: Sequence[int]) -> "ComplexQuadraticForm":
        """Reorder variables: new variable ``k`` is old variable ``order[k]``."""
        o = np.asarray(order, dtype=int)
        return ComplexQuadraticForm(self.A[np.ix_(o, o)], self.b[o], self.c)

    def restrict(self, indices: Sequence[int], values: Sequence[float]) -> "ComplexQuadraticForm":
        """Fix the listed variables at real values, leaving a form in the rest."""
        fixed = np.asarray(indices, dtype=int)
        vals = np.asarray(values, dtype=float)
        keep = np.setdiff1d(np.arange(self.dim), fixed)
        A_kk = self.A[np.ix_(keep, keep)]
        A_kf = self.A[np.ix_(keep, fixed)]
        A_ff = self.A[np.ix_(fixed, fixed)]
        b = self.b[keep] - A_kf @ vals
        c = self.c - 0.5 * vals @ A_ff @ vals + self.b[fixed] @ vals
        return ComplexQuadraticForm(A_kk, b, c)


def product(p: ComplexQuadraticForm, q: ComplexQuadraticForm) -> ComplexQuadraticForm:
    """Pointwise product of two forms on the same variables."""
    if p.dim != q.dim:
        raise DimensionMismatchError(f"cannot multiply forms of dimension {p.dim} and {q.dim}")
    return ComplexQuadraticForm(p.A + q.A, p.b + q.b, p.c + q.c)


def product_all(forms: Iterable[ComplexQuadraticForm]) -> ComplexQuadraticForm:
    forms = list(forms)
    out = forms[0]
    for f in forms[1:]:
        out = product(out, f)
    return out


def modulus(q: ComplexQuadraticForm) -> ComplexQuadraticForm:
    """|exp(Q(x))| = exp(Re Q(x)) for real x."""
    return ComplexQuadraticForm(q.A.real, q.b.real, q.c.real)


def check_integrable(A: np.ndarray) -> None:
    """Raise unless Re(A) is positive definite within the condition threshold."""
    if A.shape[0] == 0:
        return
    ev = np.linalg.eigvalsh(A.real)
    if ev[-1] <= 0 or ev[0] <= CONDITION_THRESHOLD * ev[-1]:
        raise DivergentIntegralError(
            f"real part of the quadratic form is not positive definite (eigenvalues {ev[0]:.3g} .. {ev[-1]:.3g})"
        )


def ldl_pivots(A: np.ndarray) -> np.ndarray:
    """Pivots of the unpivoted LDL^T factorization of a complex symmetric matrix.

    When Re(A) is positive definite every Schur complement keeps a positive
    definite real part, so all pivots lie in the open right half plane and
    their principal square roots follow the integral continuously.
    """
    M = np.array(A, dtype=complex)
    d = M.shape[0]
    piv = np.empty(d, dtype=complex)
    for k in range(d):
        piv[k] = M[k, k]
        if k + 1 < d:
            col = M[k + 1:, k] / piv[k]
            M[k + 1:, k + 1:] -= np.outer(col, M[k, k + 1:])
    return piv


def log_gaussian_integral(A: np.ndarray, b: np.ndarray) -> complex:
    """log of the integral of exp(-x^T A x/2 + b^T x) over R^d, branch fixed by LDL pivots."""
    d = A.shape[0]
    if d == 0:
        return 0.0 + 0.0j
    check_integrable(A)
    piv = ldl_pivots(A)
    quad = b @ np.linalg.solve(A, b)
    return 0.5 * d * LOG_2PI - 0.5 * np.sum(np.log(piv)) + 0.5 * quad


def log_integrate_all(q: ComplexQuadraticForm) -> complex:
    """Natural log of :func:`integrate_all`, safe against overflow."""
    return complex(q.c + log_gaussian_integral(q.A, q.b))


def integrate_all(q: ComplexQuadraticForm) -> complex:
    """Integral of the form over all of R^d.

    Equals ``(2 pi)^(d/2) det(A)^(-1/2) exp(c + b^T A^{-1} b / 2)``.

    Raises
    ------
    DivergentIntegralError
        If Re(A) is not positive definite.
    """
    return complex(np.exp(log_integrate_all(q)))


def marginalize(q: ComplexQuadraticForm, subset: Sequence[int]) -> ComplexQuadraticForm:
    """Integrate out the variables in ``subset``; the rest keep their relative order.

    Uses the Schur complement of the integrated block.
    """
    S = np.unique(np.asarray(subset, dtype=int))
    if S.size and (S[0] < 0 or S[-1] >= q.dim):
        raise DimensionMismatchError(f"subset {list(subset)} out of range for dimension {q.dim}")
    K = np.setdiff1d(np.arange(q.dim), S)
    A_ss = q.A[np.ix_(S, S)]
    if S.size == 0:
        return q
    check_integrable(A_ss)
    A_ks = q.A[np.ix_(K, S)]
    sol = np.linalg.solve(A_ss, np.column_stack([A_ks.T, q.b[S]]))
    X, y = sol[:, :-1], sol[:, -1]
    A_new = q.A[np.ix_(K, K)] - A_ks @ X
    b_new = q.b[K] - A_ks @ y
    c_new = q.c + log_gaussian_integral(A_ss, q.b[S])
    return ComplexQuadraticForm(A_new, b_new, c_new)
