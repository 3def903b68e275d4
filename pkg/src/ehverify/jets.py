"""Truncated multivariate Taylor polynomials ("jets") at a base point.

A :class:`JetPoly` stores the Taylor coefficients of one or more scalar
functions of ``n`` variables, truncated at total degree ``order``.  The
coefficient array has shape ``(*shape, N)``; the leading axes index a tensor
(or a batch of tensors) of jets and the last axis indexes monomials in
graded-lexicographic order.

A jet space may also carry ``nil`` extra nilpotent variables ``e_1..e_m``
with ``e_k**2 = 0``.  With ``nil=1`` the coefficients are dual numbers over
jets, with ``nil=2`` hyper-dual numbers; this is how derivatives of
Lagrangians with respect to jet coordinates are computed without finite
differences.
"""

from __future__ import annotations

import functools
import itertools
import math
from typing import Sequence

import numpy as np


class JetError(Exception):
    """Base class for jet arithmetic failures."""


class StructureError(JetError, ValueError):
    """Operands live in incompatible jet spaces or have bad shapes."""


class SingularityError(JetError, ArithmeticError):
    """A constant term makes the requested operation undefined."""


class OrderError(JetError):
    """An operation would read coefficients beyond the usable order."""


def _monomials(n: int, order: int) -> list[tuple[int, ...]]:
    out: list[tuple[int, ...]] = []
    for deg in range(order + 1):
        block = [
            a
            for a in itertools.product(range(deg + 1), repeat=n)
            if sum(a) == deg
        ]
        out.extend(sorted(block, reverse=True))
    return out


def pair_einsum(sa: str, sb: str, out: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``einsum("...sa,...sb->...out")`` lowered to one broadcast ``matmul``.

    Falls back to ``einsum`` when an operand repeats an index or sums an
    index that the other operand lacks.
    """
    if (
        len(set(sa)) < len(sa)
        or len(set(sb)) < len(sb)
        or any(c not in sb and c not in out for c in sa)
        or any(c not in sa and c not in out for c in sb)
    ):
        return np.einsum(f"...{sa},...{sb}->...{out}", a, b)
    la, lb = a.ndim - len(sa), b.ndim - len(sb)
    size = {c: a.shape[la + i] for i, c in enumerate(sa)}
    size.update({c: b.shape[lb + i] for i, c in enumerate(sb)})
    shared = [c for c in out if c in sa and c in sb]
    summed = [c for c in sa if c in sb and c not in out]
    keep_a = [c for c in out if c in sa and c not in sb]
    keep_b = [c for c in out if c in sb and c not in sa]

    def arrange(x, lead, subs, groups):
        order = [subs.index(c) + lead for g in groups for c in g]
        x = x.transpose(list(range(lead)) + order)
        dims = [math.prod(size[c] for c in g) for g in groups]
        return x.reshape(x.shape[:lead] + tuple(dims))

    A = arrange(a, la, sa, [shared, keep_a, summed])
    B = arrange(b, lb, sb, [shared, summed, keep_b])
    r = np.matmul(A, B)
    lead = r.ndim - 3
    r = r.reshape(r.shape[:lead] + tuple(size[c] for c in shared + keep_a + keep_b))
    now = shared + keep_a + keep_b
    return r.transpose(list(range(lead)) + [now.index(c) + lead for c in out])


class JetSpace:
    """Index bookkeeping for jets of ``n`` variables truncated at ``order``."""

    def __init__(self, n: int, order: int, nil: int = 0):
        if n < 1:
            raise StructureError(f"need at least one variable, got n={n}")
        if order < 0:
            raise OrderError(f"negative truncation order {order}")
        if nil < 0 or nil > 3:
            raise StructureError(f"unsupported number of nilpotents {nil}")
        self.n = n
        self.order = order
        self.nil = nil
        self.monomials = _monomials(n, order)
        self.nx = len(self.monomials)
        self.nmask = 1 << nil
        self.size = self.nx * self.nmask
        self.rank = {a: i for i, a in enumerate(self.monomials)}
        self.degree = np.array([sum(a) for a in self.monomials])

        xi, xj, xk = [], [], []
        for i, a in enumerate(self.monomials):
            for j, b in enumerate(self.monomials):
                c = tuple(p + q for p, q in zip(a, b))
                if sum(c) <= order:
                    xi.append(i)
                    xj.append(j)
                    xk.append(self.rank[c])
        mi, mj, mk = [], [], []
        for s in range(self.nmask):
            for t in range(self.nmask):
                if s & t == 0:
                    mi.append(s)
                    mj.append(t)
                    mk.append(s | t)
        xi, xj, xk = map(np.asarray, (xi, xj, xk))
        I = (np.asarray(mi)[:, None] * self.nx + xi[None, :]).ravel()
        J = (np.asarray(mj)[:, None] * self.nx + xj[None, :]).ravel()
        K = (np.asarray(mk)[:, None] * self.nx + xk[None, :]).ravel()
        perm = np.argsort(K, kind="stable")
        self._I = I[perm]
        self._J = J[perm]
        K = K[perm]
        self._starts = np.flatnonzero(np.r_[True, K[1:] != K[:-1]])
        assert len(self._starts) == self.size

    def __repr__(self) -> str:
        return f"JetSpace(n={self.n}, order={self.order}, nil={self.nil})"

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.n, self.order, self.nil)

    def index(self, alpha: Sequence[int], mask: int = 0) -> int:
        return mask * self.nx + self.rank[tuple(alpha)]

    def product(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Truncated product of coefficient arrays (broadcast over leading axes)."""
        return np.add.reduceat(a[..., self._I] * b[..., self._J], self._starts, axis=-1)

    def contract(self, subscripts: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        lhs, out = subscripts.split("->")
        sa, sb = lhs.split(",")
        pairs = pair_einsum(sa + "Z", sb + "Z", out + "Z", a[..., self._I], b[..., self._J])
        return np.add.reduceat(pairs, self._starts, axis=-1)

    @functools.cached_property
    def _partial_maps(self):
        lower = space(self.n, self.order - 1, self.nil)
        maps = []
        for i in range(self.n):
            src, dst, fac = [], [], []
            for mask in range(self.nmask):
                for r, a in enumerate(self.monomials):
                    if a[i] == 0:
                        continue
                    b = list(a)
                    b[i] -= 1
                    src.append(mask * self.nx + r)
                    dst.append(lower.index(b, mask))
                    fac.append(float(a[i]))
            maps.append((np.asarray(src), np.asarray(dst), np.asarray(fac)))
        return lower, maps

    def truncation_indices(self, order: int) -> np.ndarray:
        lower = space(self.n, order, self.nil)
        return np.array(
            [self.index(a, mask) for mask in range(self.nmask) for a in lower.monomials]
        )


@functools.lru_cache(maxsize=None)
def space(n: int, order: int, nil: int = 0) -> JetSpace:
    return JetSpace(n, order, nil)


class JetPoly:
    """A tensor of truncated Taylor polynomials sharing one jet space.

    ``coeffs`` has shape ``(*shape, space.size)``.  A scalar jet has
    ``shape == ()``.  The truncation order is the usable order: partial
    derivatives lower it by one and no operation reads past it.
    """

    __array_priority__ = 100

    def __init__(self, sp: JetSpace, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim == 0 or coeffs.shape[-1] != sp.size:
            raise StructureError(
                f"coefficient array of shape {coeffs.shape} does not fit {sp!r}"
            )
        # any NaN/Inf propagates into the sum; an overflowing sum of finite
        # entries is rejected too, which is the safe direction
        if not math.isfinite(coeffs.sum()):
            if not np.all(np.isfinite(coeffs)):
                raise SingularityError("non-finite jet coefficient")
            raise SingularityError("jet coefficients overflow")
        self.space = sp
        self.coeffs = coeffs

    # construction -------------------------------------------------------

    @classmethod
    def zeros(cls, sp: JetSpace, shape=()) -> "JetPoly":
        return cls(sp, np.zeros(tuple(shape) + (sp.size,)))

    @classmethod
    def constant(cls, sp: JetSpace, value) -> "JetPoly":
        value = np.asarray(value, dtype=float)
        c = np.zeros(value.shape + (sp.size,))
        c[..., 0] = value
        return cls(sp, c)

    @classmethod
    def variable(cls, sp: JetSpace, i: int, value: float = 0.0) -> "JetPoly":
        """The coordinate function ``value + x_i`` (0-based ``i``)."""
        if not 0 <= i < sp.n:
            raise StructureError(f"axis {i} out of range for n={sp.n}")
        c = np.zeros(sp.size)
        c[0] = value
        if sp.order >= 1:
            e = [0] * sp.n
            e[i] = 1
            c[sp.index(e)] = 1.0
        return cls(sp, c)

    @classmethod
    def from_taylor(cls, sp: JetSpace, terms: dict) -> "JetPoly":
        """Scalar jet from ``{multi_index: coefficient}``."""
        c = np.zeros(sp.size)
        for alpha, v in terms.items():
            if sum(alpha) > sp.order:
                raise OrderError(f"multi-index {alpha} exceeds order {sp.order}")
            c[sp.index(alpha)] = v
        return cls(sp, c)

    # basic properties ---------------------------------------------------

    @property
    def n(self) -> int:
        return self.space.n

    @property
    def order(self) -> int:
        return self.space.order

    @property
    def shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[:-1]

    @property
    def value(self) -> np.ndarray:
        """Constant term (the value at the base point)."""
        return self.coeffs[..., 0]

    def coefficient(self, alpha: Sequence[int], mask: int = 0) -> np.ndarray:
        return self.coeffs[..., self.space.index(alpha, mask)]

    def __repr__(self) -> str:
        return f"JetPoly(n={self.n}, order={self.order}, nil={self.space.nil}, shape={self.shape})"

    def __getitem__(self, idx) -> "JetPoly":
        if not isinstance(idx, tuple):
            idx = (idx,)
        if any(i is Ellipsis for i in idx):
            idx = idx + (slice(None),)
        return JetPoly(self.space, self.coeffs[idx])

    def copy(self) -> "JetPoly":
        return JetPoly(self.space, self.coeffs.copy())

    # space management ---------------------------------------------------

    def truncate(self, order: int) -> "JetPoly":
        if order == self.order:
            return self
        if order > self.order:
            raise OrderError(f"cannot raise usable order {self.order} to {order}")
        sp = space(self.n, order, self.space.nil)
        return JetPoly(sp, self.coeffs[..., self.space.truncation_indices(order)])

    def promote(self, nil: int) -> "JetPoly":
        """Embed into the space with ``nil`` nilpotent variables."""
        if nil == self.space.nil:
            return self
        if self.space.nil != 0:
            raise StructureError("only plain jets can be promoted")
        sp = space(self.n, self.order, nil)
        c = np.zeros(self.shape + (sp.size,))
        c[..., : self.space.size] = self.coeffs
        return JetPoly(sp, c)

    def primal(self) -> "JetPoly":
        """Drop all nilpotent components."""
        sp = space(self.n, self.order, 0)
        return JetPoly(sp, self.coeffs[..., : sp.size])

    def nil_part(self, mask: int) -> "JetPoly":
        """Plain jet multiplying the nilpotent monomial encoded by ``mask``."""
        sp = space(self.n, self.order, 0)
        nx = self.space.nx
        return JetPoly(sp, self.coeffs[..., mask * nx : (mask + 1) * nx])

    def _coerce(self, other):
        if isinstance(other, JetPoly):
            a, b = self, other
            if a.n != b.n or a.order != b.order:
                raise StructureError(
                    f"jet spaces differ: (n={a.n}, D={a.order}) vs (n={b.n}, D={b.order})"
                )
            if a.space.nil != b.space.nil:
                m = max(a.space.nil, b.space.nil)
                a, b = a.promote(m), b.promote(m)
            return a, b
        other = np.asarray(other, dtype=float)
        return self, JetPoly.constant(self.space, other)

    # arithmetic ---------------------------------------------------------

    def __add__(self, other):
        a, b = self._coerce(other)
        return JetPoly(a.space, a.coeffs + b.coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self._coerce(other)
        return JetPoly(a.space, a.coeffs - b.coeffs)

    def __rsub__(self, other):
        a, b = self._coerce(other)
        return JetPoly(a.space, b.coeffs - a.coeffs)

    def __neg__(self):
        return JetPoly(self.space, -self.coeffs)

    def __mul__(self, other):
        if not isinstance(other, JetPoly):
            s = np.asarray(other, dtype=float)
            return JetPoly(self.space, self.coeffs * s[..., None])
        a, b = self._coerce(other)
        return JetPoly(a.space, a.space.product(a.coeffs, b.coeffs))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, JetPoly):
            s = np.asarray(other, dtype=float)
            if np.any(s == 0):
                raise SingularityError("division by zero")
            return JetPoly(self.space, self.coeffs / s[..., None])
        return self * reciprocal(other)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise StructureError("only non-negative integer powers")
        out = JetPoly.constant(self.space, np.ones(self.shape))
        for _ in range(k):
            out = out * self
        return out

    def partial(self, i: int) -> "JetPoly":
        return partial(self, i)

    def permute(self, subscripts: str) -> "JetPoly":
        """Linear index gymnastics on tensor axes, e.g. ``"ijk->kij"`` or a trace ``"iji->j"``."""
        lhs, out = subscripts.replace(" ", "").split("->")
        return JetPoly(self.space, np.einsum(f"...{lhs}Z->...{out}Z", self.coeffs))

    def sum(self, axis=None) -> "JetPoly":
        nd = len(self.shape)
        if axis is None:
            axis = tuple(range(nd))
        return JetPoly(self.space, self.coeffs.sum(axis=axis))


def arith(a: JetPoly, b: JetPoly, kind: str) -> JetPoly:
    """Ring operation by name (``add``, ``sub`` or ``mul``)."""
    if not isinstance(a, JetPoly) or not isinstance(b, JetPoly):
        raise StructureError("arith expects two jets")
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    if kind == "mul":
        return a * b
    raise StructureError(f"unknown arithmetic kind {kind!r}")


def contract(subscripts: str, *operands) -> JetPoly:
    """``numpy.einsum`` over tensor indices with jet products in each term.

    Operands may be jets or plain arrays (treated as constants).  Leading
    batch axes broadcast; subscripts only name the trailing tensor axes.
    """
    lhs, out = subscripts.replace(" ", "").split("->")
    subs = lhs.split(",")
    if len(subs) != len(operands):
        raise StructureError("subscripts and operands disagree")
    jets = [(s, op) for s, op in zip(subs, operands) if isinstance(op, JetPoly)]
    consts = [(s, np.asarray(op, dtype=float)) for s, op in zip(subs, operands) if not isinstance(op, JetPoly)]
    if not jets:
        raise StructureError("contract needs at least one jet operand")
    n0, d0 = jets[0][1].n, jets[0][1].order
    if any(op.n != n0 or op.order != d0 for _, op in jets):
        raise StructureError("contract operands live in different jet spaces")
    nil = max(op.space.nil for _, op in jets)
    jets = [(s, op.promote(nil)) for s, op in jets]
    sp = jets[0][1].space

    # fold constants into the first jet
    s0, acc = jets[0]
    acc_c = acc.coeffs
    for k, (s, c) in enumerate(consts):
        rest = "".join(t for t, _ in jets[1:]) + "".join(t for t, _ in consts[k + 1 :]) + out
        keep = "".join(dict.fromkeys(ch for ch in s0 + s if ch in rest))
        acc_c = np.einsum(f"...{s0}Z,{s}->...{keep}Z", acc_c, c)
        s0 = keep
    for k, (s, op) in enumerate(jets[1:], start=1):
        rest = "".join(t for t, _ in jets[k + 1 :]) + out
        keep = "".join(dict.fromkeys(ch for ch in s0 + s if ch in rest))
        acc_c = sp.contract(f"{s0},{s}->{keep}", acc_c, op.coeffs)
        s0 = keep
    if s0 != out:
        acc_c = np.einsum(f"...{s0}Z->...{out}Z", acc_c)
    return JetPoly(sp, acc_c)


def _apply_series(a: JetPoly, taylor: list[np.ndarray]) -> JetPoly:
    # taylor[k] = f^(k)(a0)/k!; h = a - a0 is nilpotent of index order+nil+1
    a0 = a.value
    h = a - a0
    out = JetPoly.constant(a.space, taylor[-1])
    for c in reversed(taylor[:-1]):
        out = out * h + c
    return out


def _series_length(a: JetPoly) -> int:
    return a.order + a.space.nil + 1


def reciprocal(a: JetPoly) -> JetPoly:
    a0 = a.value
    if np.any(a0 == 0):
        raise SingularityError("reciprocal of a jet with zero constant term")
    K = _series_length(a)
    return _apply_series(a, [(-1.0) ** k / a0 ** (k + 1) for k in range(K)])


def sqrt_jet(a: JetPoly) -> JetPoly:
    a0 = a.value
    if np.any(a0 <= 0):
        raise SingularityError("square root of a jet with non-positive constant term")
    K = _series_length(a)
    s0 = np.sqrt(a0)
    return _apply_series(a, [s0 * _binom_half(k) / a0**k for k in range(K)])


def _binom_half(k: int) -> float:
    c = 1.0
    for j in range(k):
        c *= (0.5 - j) / (j + 1)
    return c


def sin(a):
    if not isinstance(a, JetPoly):
        return math.sin(a)
    a0 = a.value
    cyc = [np.sin(a0), np.cos(a0), -np.sin(a0), -np.cos(a0)]
    K = _series_length(a)
    return _apply_series(a, [cyc[k % 4] / math.factorial(k) for k in range(K)])


def cos(a):
    if not isinstance(a, JetPoly):
        return math.cos(a)
    a0 = a.value
    cyc = [np.cos(a0), -np.sin(a0), -np.cos(a0), np.sin(a0)]
    K = _series_length(a)
    return _apply_series(a, [cyc[k % 4] / math.factorial(k) for k in range(K)])


def partial(a: JetPoly, i: int) -> JetPoly:
    """Formal partial derivative along axis ``i`` (0-based); order drops by one."""
    if not 0 <= i < a.n:
        raise StructureError(f"axis {i} out of range for n={a.n}")
    if a.order == 0:
        raise OrderError("partial derivative of an order-0 jet reads beyond usable order")
    lower, maps = a.space._partial_maps
    src, dst, fac = maps[i]
    c = np.zeros(a.shape + (lower.size,))
    c[..., dst] = a.coeffs[..., src] * fac
    return JetPoly(lower, c)


def gradient(a: JetPoly) -> JetPoly:
    """All first partials stacked on a new trailing tensor axis."""
    parts = [partial(a, i).coeffs for i in range(a.n)]
    return JetPoly(space(a.n, a.order - 1, a.space.nil), np.stack(parts, axis=-2))


def compose(a: JetPoly, subs: Sequence[JetPoly]) -> JetPoly:
    """Truncated composition ``a(subs_1, ..., subs_n)``.

    Every substituted jet must have zero constant term so that base points
    correspond.  The result lives in the jet space of ``subs`` truncated to
    ``min(a.order, subs.order)``.
    """
    if a.space.nil != 0:
        raise StructureError("compose supports plain jets only")
    if len(subs) != a.n:
        raise StructureError(f"need {a.n} substitutions, got {len(subs)}")
    s0 = subs[0]
    if any(s.space.key != s0.space.key or s.shape != () for s in subs):
        raise StructureError("substitutions must be scalar jets in one space")
    if s0.space.nil != 0:
        raise StructureError("compose supports plain jets only")
    for s in subs:
        if abs(float(s.value)) != 0.0:
            raise StructureError("substitution with nonzero constant term: base points differ")
    order = min(a.order, s0.order)
    subs = [s.truncate(order) for s in subs]
    a = a.truncate(order)
    sp = subs[0].space
    one = JetPoly.constant(sp, 1.0)
    powers = []
    for s in subs:
        p = [one]
        for _ in range(order):
            p.append(p[-1] * s)
        powers.append(p)
    mono = np.empty((a.space.size, sp.size))
    for r, alpha in enumerate(a.space.monomials):
        m = one
        for i, k in enumerate(alpha):
            if k:
                m = m * powers[i][k]
        mono[r] = m.coeffs
    return JetPoly(sp, a.coeffs @ mono)


def identity_map(n: int, order: int) -> list[JetPoly]:
    sp = space(n, order)
    return [JetPoly.variable(sp, i) for i in range(n)]


def stack(jets: Sequence[JetPoly], axis: int = 0) -> JetPoly:
    sp = jets[0].space
    if any(j.space is not sp for j in jets):
        raise StructureError("stack operands live in different jet spaces")
    nd = len(jets[0].shape)
    if axis < 0:
        axis += nd + 1
    return JetPoly(sp, np.stack([j.coeffs for j in jets], axis=axis))


def common(*jets: JetPoly) -> list[JetPoly]:
    """Truncate all operands to their smallest usable order."""
    d = min(j.order for j in jets)
    return [j.truncate(d) for j in jets]


def max_abs(a: JetPoly) -> float:
    return float(np.max(np.abs(a.coeffs))) if a.coeffs.size else 0.0
