"""Forward-mode automatic differentiation with vectorized dual numbers.

A :class:`Dual` pairs an array value of shape ``S`` with a derivative block of
shape ``S + (k,)`` carrying one directional derivative per seed direction in a
trailing axis.  Values and derivative blocks may themselves be ``Dual``
instances, which is how nested (second- and third-order) differentiation
works; every differentiation pass gets a fresh tag, and in mixed expressions
the pass with the greatest tag is the active one while lower-tagged duals are
treated as constants.

Only the primitives needed by the dynamics code are provided (elementwise
arithmetic, trig, reductions, SPD solves); this is not a general AD system.
"""

from __future__ import annotations

import itertools

import numpy as np

_TAGS = itertools.count()


def _tag(x):
    return x.tag if isinstance(x, Dual) else -1


def _parts(x, tag):
    """Split ``x`` into (value, dot) with respect to the pass ``tag``."""
    if isinstance(x, Dual) and x.tag == tag:
        return x.val, x.dot
    return x, None


def vndim(x):
    """Number of value dimensions, ignoring trailing derivative axes."""
    while isinstance(x, Dual):
        x = x.val
    return np.ndim(x)


def vshape(x):
    while isinstance(x, Dual):
        x = x.val
    return np.shape(x)


def value(x):
    """Strip all dual layers, returning the underlying ndarray/scalar."""
    while isinstance(x, Dual):
        x = x.val
    return x


def expand_at(x, pos):
    """Insert a length-1 axis at nonnegative value-dimension position ``pos``."""
    if isinstance(x, Dual):
        return Dual(expand_at(x.val, pos), expand_at(x.dot, pos), x.tag)
    x = np.asarray(x)
    s = x.shape
    return x.reshape(s[:pos] + (1,) + s[pos:])


def _scale_dot(dot, c):
    """Multiply a derivative block by a value ``c`` (broadcast over directions)."""
    if np.ndim(c) == 0 and not isinstance(c, Dual):
        return mul(dot, c)
    return mul(dot, expand_at(c, vndim(c)))


class Dual:
    __slots__ = ("val", "dot", "tag")
    __array_ufunc__ = None  # force numpy to defer to our reflected operators

    def __init__(self, val, dot, tag):
        self.val = val
        self.dot = dot
        self.tag = tag

    # -- shape bookkeeping -------------------------------------------------
    @property
    def shape(self):
        return vshape(self)

    @property
    def ndim(self):
        return vndim(self)

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        if any(i is Ellipsis or i is None for i in idx):
            raise IndexError("Dual indexing supports basic ints/slices only")
        return Dual(self.val[idx], self.dot[idx], self.tag)

    # -- operators ---------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(other))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __pow__(self, p):
        return powi(self, p)

    def __repr__(self):
        return f"Dual(tag={self.tag}, val={value(self)!r})"


# ---------------------------------------------------------------------------
# elementwise arithmetic
# ---------------------------------------------------------------------------

def add(x, y):
    xD = type(x) is Dual
    yD = type(y) is Dual
    if not (xD or yD):
        return x + y
    t = max(x.tag if xD else -1, y.tag if yD else -1)
    xv, xd = _parts(x, t)
    yv, yd = _parts(y, t)
    v = add(xv, yv)
    if xd is None:
        d = yd
    elif yd is None:
        d = xd
    else:
        d = add(xd, yd)
    return Dual(v, d, t)


def neg(x):
    if isinstance(x, Dual):
        return Dual(neg(x.val), neg(x.dot), x.tag)
    return -x


def mul(x, y):
    xD = type(x) is Dual
    yD = type(y) is Dual
    if not (xD or yD):
        return x * y
    t = max(x.tag if xD else -1, y.tag if yD else -1)
    xv, xd = _parts(x, t)
    yv, yd = _parts(y, t)
    v = mul(xv, yv)
    if xd is None:
        d = _scale_dot(yd, xv)
    elif yd is None:
        d = _scale_dot(xd, yv)
    else:
        d = add(_scale_dot(xd, yv), _scale_dot(yd, xv))
    return Dual(v, d, t)


def div(x, y):
    t = max(_tag(x), _tag(y))
    if t < 0:
        return x / y
    return mul(x, powi(y, -1))


def powi(x, p):
    """x**p for a numeric (non-dual) exponent."""
    if not isinstance(x, Dual):
        return x ** p
    v = powi(x.val, p)
    d = _scale_dot(x.dot, mul(p, powi(x.val, p - 1)))
    return Dual(v, d, x.tag)


def sin(x):
    if not isinstance(x, Dual):
        return np.sin(x)
    return Dual(sin(x.val), _scale_dot(x.dot, cos(x.val)), x.tag)


def cos(x):
    if not isinstance(x, Dual):
        return np.cos(x)
    return Dual(cos(x.val), _scale_dot(x.dot, neg(sin(x.val))), x.tag)


def sqrt(x):
    if not isinstance(x, Dual):
        return np.sqrt(x)
    v = sqrt(x.val)
    return Dual(v, _scale_dot(x.dot, div(0.5, v)), x.tag)


def exp(x):
    if not isinstance(x, Dual):
        return np.exp(x)
    v = exp(x.val)
    return Dual(v, _scale_dot(x.dot, v), x.tag)


# ---------------------------------------------------------------------------
# reductions and structure
# ---------------------------------------------------------------------------

def dsum(x, axis):
    """Sum over nonnegative value axes (int or tuple)."""
    if type(x) is Dual:
        return Dual(dsum(x.val, axis), dsum(x.dot, axis), x.tag)
    return np.asarray(x).sum(axis=axis)


def dconcat(parts, axis=0):
    t = max(_tag(p) for p in parts)
    if t < 0:
        return np.concatenate([np.atleast_1d(p) for p in parts], axis=axis)
    parts = [expand_at(p, 0) if vndim(p) == 0 else p for p in parts]
    vals, dots = [], []
    for p in parts:
        v, d = _parts(p, t)
        vals.append(v)
        dots.append(d)
    k = None
    for d in dots:
        if d is not None:
            k = vshape(d)[-1]
            break
    filled = []
    for v, d in zip(vals, dots):
        if d is None:
            d = np.zeros(vshape(v) + (k,))
        filled.append(d)
    return Dual(dconcat(vals, axis=axis), dconcat(filled, axis=axis), t)


def mv(a, x):
    """Matrix-vector product contracting the last value axis of ``a``."""
    return dsum(mul(a, x), vndim(a) - 1)


def vdot(x, y):
    return dsum(mul(x, y), vndim(x) - 1 if vndim(x) else 0)


def outer(x, y):
    return mul(expand_at(x, vndim(x)), expand_at(y, vndim(y) - 1))


# ---------------------------------------------------------------------------
# SPD linear solve
# ---------------------------------------------------------------------------

class NonPositiveDefiniteError(np.linalg.LinAlgError):
    pass


def _chol_solve(a, b):
    """Base solve of an SPD system; b may carry trailing direction axes."""
    try:
        c = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as e:
        raise NonPositiveDefiniteError(str(e)) from e
    n = a.shape[0]
    bflat = b.reshape(n, -1)
    y = np.linalg.solve(c, bflat)
    x = np.linalg.solve(c.T, y)
    return x.reshape(b.shape)


def _contract_matdot(adot, x):
    """Contract adot[i, j, *dirs_a] with x[j, *dirs_x] over j.

    Returns value dims (n, *dirs_x, *dirs_a), matching the layout of the
    corresponding right-hand-side derivative block.
    """
    ra = vndim(adot) - 2
    rx = vndim(x) - 1
    a = adot
    for _ in range(rx):
        a = expand_at(a, 2)
    xe = expand_at(x, 0)
    for _ in range(ra):
        xe = expand_at(xe, vndim(xe))
    return dsum(mul(a, xe), 1)


def solve_spd(a, b):
    """Solve a x = b with a symmetric positive definite; dual-aware."""
    t = max(_tag(a), _tag(b))
    if t < 0:
        return _chol_solve(np.asarray(a, float), np.asarray(b, float))
    av, ad = _parts(a, t)
    bv, bd = _parts(b, t)
    x0 = solve_spd(av, bv)
    if ad is None:
        rhs = bd
    else:
        da_x = _contract_matdot(ad, x0)
        rhs = add(bd, neg(da_x)) if bd is not None else neg(da_x)
    xd = solve_spd(av, rhs)
    return Dual(x0, xd, t)


# ---------------------------------------------------------------------------
# seeding and extraction
# ---------------------------------------------------------------------------

def seed(x, dirs=None):
    """Attach a fresh dual layer to vector ``x``.

    ``dirs`` is an (n, k) matrix of seed directions (identity by default).
    Returns (dual, tag).
    """
    xval = x if isinstance(x, Dual) else np.asarray(x, float)
    n = vshape(xval)[0]
    if dirs is None:
        dirs = np.eye(n)
    t = next(_TAGS)
    return Dual(xval, np.asarray(dirs, float), t), t


def split_seeded(y, tag, k):
    """Return (value, dot) of ``y`` for pass ``tag``, zero-filling if absent."""
    v, d = _parts(y, tag)
    if d is None:
        d = np.zeros(vshape(v) + (k,))
    return v, d


def jacobian(fun, x):
    """Dense Jacobian of ``fun`` (vector -> vector) at ``x`` plus the value."""
    xd, t = seed(np.asarray(x, float))
    y = fun(xd)
    v, d = split_seeded(y, t, len(x))
    return np.asarray(value(v), float), np.asarray(value(d), float)
