"""Minimal builder for LPs whose unknowns are matrices.

Matrix variables are vectorized row-major, so ``vec(A @ X @ B)`` equals
``kron(A, B.T) @ vec(X)``. Coefficient blocks are kept dense (the design
LPs are built from many small blocks) and converted to one sparse matrix
when the problem is assembled.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .lp import LpProblem


class Var:
    __slots__ = ("name", "offset", "shape")

    def __init__(self, name, offset, shape):
        self.name, self.offset, self.shape = name, offset, shape

    @property
    def size(self):
        return int(np.prod(self.shape))

    def expr(self):
        return Expr(self.shape, [(self, np.eye(self.size))])

    def sandwich(self, A=None, B=None):
        """Expression ``A @ X @ B`` (either factor may be omitted)."""
        p, q = self.shape
        A = np.eye(p) if A is None else np.atleast_2d(np.asarray(A, dtype=float))
        B = np.eye(q) if B is None else np.atleast_2d(np.asarray(B, dtype=float))
        return Expr((A.shape[0], B.shape[1]), [(self, np.kron(A, B.T))])


class Expr:
    """Affine expression with a matrix shape."""

    __slots__ = ("shape", "terms", "const")

    def __init__(self, shape, terms=(), const=None):
        self.shape = tuple(shape)
        self.terms = list(terms)
        self.const = np.zeros(self.shape) if const is None else np.asarray(const, float).reshape(self.shape)

    def _coerce(self, other):
        if isinstance(other, Expr):
            if other.shape != self.shape:
                raise ValueError(f"shape mismatch {self.shape} vs {other.shape}")
            return other
        if isinstance(other, Var):
            return self._coerce(other.expr())
        return Expr(self.shape, const=np.broadcast_to(np.asarray(other, float), self.shape))

    def __add__(self, other):
        o = self._coerce(other)
        return Expr(self.shape, self.terms + o.terms, self.const + o.const)

    __radd__ = __add__

    def __neg__(self):
        return Expr(self.shape, [(v, -c) for v, c in self.terms], -self.const)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        s = float(scalar)
        return Expr(self.shape, [(v, s * c) for v, c in self.terms], s * self.const)

    __rmul__ = __mul__


def zeros(shape):
    return Expr(shape)


class LinearModel:
    def __init__(self):
        self.vars = {}
        self.n = 0
        self._lower = []
        self._upper = []
        self._eq = []
        self._ub = []
        self._obj = []

    def var(self, name, shape, lower=-np.inf, upper=np.inf):
        if name in self.vars:
            raise KeyError(f"duplicate variable {name}")
        if isinstance(shape, int):
            shape = (shape, 1)
        v = Var(name, self.n, tuple(shape))
        self.vars[name] = v
        self.n += v.size
        self._lower.append(np.broadcast_to(np.asarray(lower, float), v.shape).ravel())
        self._upper.append(np.broadcast_to(np.asarray(upper, float), v.shape).ravel())
        return v

    def _rows(self, expr, rhs):
        m = int(np.prod(expr.shape))
        blocks = []
        for v, coef in expr.terms:
            r, c = np.nonzero(coef)
            blocks.append((r, c + v.offset, coef[r, c]))
        if blocks:
            r = np.concatenate([b[0] for b in blocks])
            c = np.concatenate([b[1] for b in blocks])
            d = np.concatenate([b[2] for b in blocks])
        else:
            r = c = np.zeros(0, int)
            d = np.zeros(0)
        rhs = np.broadcast_to(np.asarray(rhs, float), expr.shape).ravel() - expr.const.ravel()
        return (r, c, d, m, rhs)

    def eq(self, expr, rhs=0.0):
        self._eq.append(self._rows(expr, rhs))

    def le(self, expr, rhs=0.0):
        self._ub.append(self._rows(expr, rhs))

    def maximize(self, var_or_expr, weight=1.0):
        """Add ``weight * sum(entries)`` of a variable (or expression) to the objective."""
        e = var_or_expr.expr() if isinstance(var_or_expr, Var) else var_or_expr
        for v, coef in e.terms:
            self._obj.append((v.offset, weight * np.asarray(coef.sum(axis=0)).ravel()))

    def _stack(self, rows):
        if not rows:
            return None, None
        R, Cc, D, rhs = [], [], [], []
        off = 0
        for r, c, d, m, b in rows:
            R.append(r + off)
            Cc.append(c)
            D.append(d)
            rhs.append(b)
            off += m
        A = sp.csr_matrix(
            (np.concatenate(D), (np.concatenate(R), np.concatenate(Cc))), shape=(off, self.n)
        )
        return A, np.concatenate(rhs)

    def build(self):
        c = np.zeros(self.n)
        for off, w in self._obj:
            c[off:off + w.size] += w
        A_eq, b_eq = self._stack(self._eq)
        A_ub, b_ub = self._stack(self._ub)
        return LpProblem(
            c, A_ub, b_ub, A_eq, b_eq,
            np.concatenate(self._lower) if self._lower else None,
            np.concatenate(self._upper) if self._upper else None,
        )

    def value(self, x, var):
        if isinstance(var, str):
            var = self.vars[var]
        return np.asarray(x[var.offset:var.offset + var.size]).reshape(var.shape)
