"""Reverse-mode automatic differentiation over dense numpy arrays.

A `Tensor` wraps an ndarray plus a gradient slot and the backward closure
that produced it. Calling `backward()` on a scalar output walks the graph
in reverse topological order and accumulates gradients into every leaf
with `requires_grad=True`. Only the operators needed by the VAE and SAC
networks are provided; there is no general broadcasting (binary ops take
same-shape operands or a plain Python scalar).

Arrays default to float32. Operators preserve the dtype of their inputs,
so a graph built from float64 leaves runs end to end in float64 (the
gradient checker relies on this).
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError, ShapeMismatch, UsageError

DEFAULT_DTYPE = np.float32


class Tensor:
    """Node in the computation graph: values, grad slot, backward deps."""

    __slots__ = ("values", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, values, requires_grad=False, _parents=(), _backward=None):
        self.values = values if isinstance(values, np.ndarray) else np.asarray(values, DEFAULT_DTYPE)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.values.shape

    @property
    def dtype(self):
        return self.values.dtype

    def item(self) -> float:
        return float(self.values.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.values, requires_grad=False)

    def backward(self):
        """Accumulate d(self)/d(leaf) into every requires_grad ancestor."""
        if self.values.size != 1:
            raise UsageError("backward() starts from a scalar, got shape %s" % (self.shape,))
        order = _toposort(self)
        self.grad = np.ones_like(self.values)
        for node in reversed(order):
            if node._backward is not None:
                node._backward()

    # Thin operator sugar; the module-level functions are the real API.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __repr__(self):
        return f"Tensor(shape={self.values.shape}, dtype={self.values.dtype}, requires_grad={self.requires_grad})"


def tensor(values, requires_grad=False, dtype=DEFAULT_DTYPE) -> Tensor:
    """Leaf constructor; copies `values` into an array of `dtype`."""
    return Tensor(np.array(values, dtype=dtype), requires_grad=requires_grad)


def _toposort(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, int]] = [(root, 0)]
    while stack:
        node, child_idx = stack.pop()
        if child_idx == 0:
            if id(node) in visited:
                continue
            visited.add(id(node))
        if child_idx < len(node._parents):
            stack.append((node, child_idx + 1))
            parent = node._parents[child_idx]
            if id(parent) not in visited:
                stack.append((parent, 0))
        else:
            order.append(node)
    return order


def _accumulate(t: Tensor, g: np.ndarray):
    if t.grad is None:
        t.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g)
    else:
        t.grad = t.grad + g


def _needs_graph(*parents: Tensor) -> bool:
    return any(p.requires_grad or p._backward is not None for p in parents)


def _result(values, parents, backward) -> Tensor:
    if _needs_graph(*parents):
        out = Tensor(values, _parents=tuple(parents))
        out._backward = backward(out)
        return out
    return Tensor(values)


def _check_same_shape(a: Tensor, b: Tensor, op: str):
    if a.values.shape != b.values.shape:
        raise ShapeMismatch(f"{op}: shapes {a.values.shape} and {b.values.shape} differ")


def _as_pair(a, b, op):
    """Lift a Python scalar operand to a constant Tensor in the array dtype."""
    if not isinstance(a, Tensor) and not isinstance(b, Tensor):
        raise UsageError(f"{op}: at least one operand must be a Tensor")
    if not isinstance(a, Tensor):
        a = Tensor(np.full_like(b.values, a))
    elif not isinstance(b, Tensor):
        b = Tensor(np.full_like(a.values, b))
    else:
        _check_same_shape(a, b, op)
    return a, b


# ---------------------------------------------------------------------------
# elementwise ops


def add(a, b) -> Tensor:
    a, b = _as_pair(a, b, "add")

    def backward(out):
        def run():
            if a.requires_grad or a._backward is not None:
                _accumulate(a, out.grad)
            if b.requires_grad or b._backward is not None:
                _accumulate(b, out.grad)

        return run

    return _result(a.values + b.values, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _as_pair(a, b, "sub")

    def backward(out):
        def run():
            if a.requires_grad or a._backward is not None:
                _accumulate(a, out.grad)
            if b.requires_grad or b._backward is not None:
                _accumulate(b, -out.grad)

        return run

    return _result(a.values - b.values, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_pair(a, b, "mul")

    def backward(out):
        def run():
            if a.requires_grad or a._backward is not None:
                _accumulate(a, out.grad * b.values)
            if b.requires_grad or b._backward is not None:
                _accumulate(b, out.grad * a.values)

        return run

    return _result(a.values * b.values, (a, b), backward)


def exp(x: Tensor) -> Tensor:
    vals = np.exp(x.values)

    def backward(out):
        def run():
            _accumulate(x, out.grad * out.values)

        return run

    return _result(vals, (x,), backward)


def log(x: Tensor) -> Tensor:
    def backward(out):
        def run():
            _accumulate(x, out.grad / x.values)

        return run

    return _result(np.log(x.values), (x,), backward)


def square(x: Tensor) -> Tensor:
    def backward(out):
        def run():
            _accumulate(x, out.grad * (2.0 * x.values))

        return run

    return _result(x.values * x.values, (x,), backward)


def relu(x: Tensor) -> Tensor:
    vals = np.maximum(x.values, 0)

    def backward(out):
        def run():
            _accumulate(x, out.grad * (x.values > 0))

        return run

    return _result(vals, (x,), backward)


def tanh(x: Tensor) -> Tensor:
    vals = np.tanh(x.values)

    def backward(out):
        def run():
            _accumulate(x, out.grad * (1.0 - out.values * out.values))

        return run

    return _result(vals, (x,), backward)


def _sigmoid_vals(x: np.ndarray) -> np.ndarray:
    # tanh form is stable in both tails
    half = np.asarray(0.5, dtype=x.dtype)
    return half * (np.tanh(half * x) + np.asarray(1, dtype=x.dtype))


def sigmoid(x: Tensor) -> Tensor:
    def backward(out):
        def run():
            _accumulate(x, out.grad * out.values * (1.0 - out.values))

        return run

    return _result(_sigmoid_vals(x.values), (x,), backward)


def softplus(x: Tensor) -> Tensor:
    vals = np.logaddexp(np.asarray(0, dtype=x.values.dtype), x.values)

    def backward(out):
        def run():
            _accumulate(x, out.grad * _sigmoid_vals(x.values))

        return run

    return _result(vals, (x,), backward)


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    vals = np.clip(x.values, lo, hi)

    def backward(out):
        def run():
            mask = (x.values >= lo) & (x.values <= hi)
            _accumulate(x, out.grad * mask)

        return run

    return _result(vals, (x,), backward)


def min2(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise minimum; gradient routed to `a` on ties."""
    _check_same_shape(a, b, "min2")
    take_a = a.values <= b.values

    def backward(out):
        def run():
            if a.requires_grad or a._backward is not None:
                _accumulate(a, out.grad * take_a)
            if b.requires_grad or b._backward is not None:
                _accumulate(b, out.grad * ~take_a)

        return run

    return _result(np.minimum(a.values, b.values), (a, b), backward)


# ---------------------------------------------------------------------------
# shape ops


def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    vals = x.values.reshape(shape)

    def backward(out):
        def run():
            _accumulate(x, out.grad.reshape(x.values.shape))

        return run

    return _result(vals, (x,), backward)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = tuple(tensors)
    vals = np.concatenate([t.values for t in tensors], axis=axis)
    sizes = [t.values.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(out):
        def run():
            parts = np.split(out.grad, splits, axis=axis)
            for t, g in zip(tensors, parts):
                if t.requires_grad or t._backward is not None:
                    _accumulate(t, g)

        return run

    return _result(vals, tensors, backward)


def tsum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    vals = x.values.sum(axis=axis, keepdims=keepdims, dtype=x.values.dtype)
    if axis is None and not keepdims:
        vals = np.asarray(vals, dtype=x.values.dtype)

    def backward(out):
        def run():
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            _accumulate(x, np.broadcast_to(g, x.values.shape).astype(x.values.dtype, copy=False))

        return run

    return _result(vals, (x,), backward)


def tmean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = x.values.size if axis is None else x.values.shape[axis]
    vals = x.values.mean(axis=axis, keepdims=keepdims, dtype=x.values.dtype)
    if axis is None and not keepdims:
        vals = np.asarray(vals, dtype=x.values.dtype)

    def backward(out):
        def run():
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            scaled = (g / count).astype(x.values.dtype, copy=False)
            _accumulate(x, np.broadcast_to(scaled, x.values.shape))

        return run

    return _result(vals, (x,), backward)


# ---------------------------------------------------------------------------
# network layers


def dense(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """x @ w + b with x: (N, in), w: (in, out), b: (out,)."""
    if x.values.ndim != 2 or w.values.ndim != 2 or x.values.shape[1] != w.values.shape[0]:
        raise ShapeMismatch(f"dense: x {x.values.shape} incompatible with w {w.values.shape}")
    if b is not None and b.values.shape != (w.values.shape[1],):
        raise ShapeMismatch(f"dense: bias {b.values.shape} does not match out dim ({w.values.shape[1]},)")
    vals = x.values @ w.values
    if b is not None:
        vals = vals + b.values

    def backward(out):
        def run():
            if x.requires_grad or x._backward is not None:
                _accumulate(x, out.grad @ w.values.T)
            if w.requires_grad or w._backward is not None:
                _accumulate(w, x.values.T @ out.grad)
            if b is not None and (b.requires_grad or b._backward is not None):
                _accumulate(b, out.grad.sum(axis=0, dtype=out.grad.dtype))

        return run

    parents = (x, w) if b is None else (x, w, b)
    return _result(vals, parents, backward)


def conv_out_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int, hout: int, wout: int) -> np.ndarray:
    """(N, C, Hp, Wp) -> (N*hout*wout, C*kh*kw) patch matrix."""
    n, c, _, _ = xp.shape
    sn, sc, sh, sw = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp,
        shape=(n, c, kh, kw, hout, wout),
        strides=(sn, sc, sh, sw, sh * stride, sw * stride),
        writeable=False,
    )
    return view.transpose(0, 4, 5, 1, 2, 3).reshape(n * hout * wout, c * kh * kw)


def _col2im(cols: np.ndarray, n: int, c: int, hp: int, wp: int, kh: int, kw: int, stride: int, hout: int, wout: int) -> np.ndarray:
    """Adjoint of `_im2col`: scatter-add patches back onto the padded canvas."""
    out = np.zeros((n, c, hp, wp), dtype=cols.dtype)
    patches = cols.reshape(n, hout, wout, c, kh, kw).transpose(0, 3, 4, 5, 1, 2)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i : i + stride * hout : stride, j : j + stride * wout : stride] += patches[:, :, i, j]
    return out


def conv2d(x: Tensor, k: Tensor, b: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """2D convolution. x: (N, Cin, H, W), k: (Cout, Cin, KH, KW), b: (Cout,)."""
    if x.values.ndim != 4 or k.values.ndim != 4:
        raise ShapeMismatch(f"conv2d: expected 4D x/k, got {x.values.shape} and {k.values.shape}")
    n, cin, h, w = x.values.shape
    cout, kcin, kh, kw = k.values.shape
    if cin != kcin:
        raise ShapeMismatch(f"conv2d: input channels {x.values.shape} vs kernel {k.values.shape}")
    hout = conv_out_size(h, kh, stride, padding)
    wout = conv_out_size(w, kw, stride, padding)
    if hout <= 0 or wout <= 0:
        raise ShapeMismatch(f"conv2d: kernel {k.values.shape} too large for input {x.values.shape}")
    xp = np.pad(x.values, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.values
    cols = _im2col(xp, kh, kw, stride, hout, wout)
    k2 = k.values.reshape(cout, cin * kh * kw)
    prod = cols @ k2.T  # (N*hout*wout, Cout)
    vals = prod.reshape(n, hout, wout, cout).transpose(0, 3, 1, 2)
    if b is not None:
        if b.values.shape != (cout,):
            raise ShapeMismatch(f"conv2d: bias {b.values.shape} does not match ({cout},)")
        vals = vals + b.values[None, :, None, None]
    vals = np.ascontiguousarray(vals)

    def backward(out):
        def run():
            g2 = out.grad.transpose(0, 2, 3, 1).reshape(n * hout * wout, cout)
            if k.requires_grad or k._backward is not None:
                _accumulate(k, (g2.T @ cols).reshape(k.values.shape))
            if b is not None and (b.requires_grad or b._backward is not None):
                _accumulate(b, out.grad.sum(axis=(0, 2, 3), dtype=out.grad.dtype))
            if x.requires_grad or x._backward is not None:
                dcols = g2 @ k2
                dxp = _col2im(dcols, n, cin, h + 2 * padding, w + 2 * padding, kh, kw, stride, hout, wout)
                dx = dxp[:, :, padding : padding + h, padding : padding + w] if padding else dxp
                _accumulate(x, dx)

        return run

    parents = (x, k) if b is None else (x, k, b)
    return _result(vals, parents, backward)


def deconv_out_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size - 1) * stride - 2 * padding + kernel


def deconv2d(x: Tensor, k: Tensor, b: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """Transposed 2D convolution. x: (N, Cin, H, W), k: (Cin, Cout, KH, KW)."""
    if x.values.ndim != 4 or k.values.ndim != 4:
        raise ShapeMismatch(f"deconv2d: expected 4D x/k, got {x.values.shape} and {k.values.shape}")
    n, cin, h, w = x.values.shape
    kcin, cout, kh, kw = k.values.shape
    if cin != kcin:
        raise ShapeMismatch(f"deconv2d: input channels {x.values.shape} vs kernel {k.values.shape}")
    hout = deconv_out_size(h, kh, stride, padding)
    wout = deconv_out_size(w, kw, stride, padding)
    if hout <= 0 or wout <= 0:
        raise ShapeMismatch(f"deconv2d: degenerate output for input {x.values.shape}, kernel {k.values.shape}")
    x2 = x.values.transpose(0, 2, 3, 1).reshape(n * h * w, cin)
    k2 = k.values.reshape(cin, cout * kh * kw)
    cols = x2 @ k2  # patches laid out at every input position
    full = _col2im(cols, n, cout, hout + 2 * padding, wout + 2 * padding, kh, kw, stride, h, w)
    vals = full[:, :, padding : padding + hout, padding : padding + wout] if padding else full
    if b is not None:
        if b.values.shape != (cout,):
            raise ShapeMismatch(f"deconv2d: bias {b.values.shape} does not match ({cout},)")
        vals = vals + b.values[None, :, None, None]
    vals = np.ascontiguousarray(vals)

    def backward(out):
        def run():
            gp = np.pad(out.grad, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else out.grad
            gcols = _im2col(gp, kh, kw, stride, h, w)  # (N*h*w, Cout*kh*kw)
            if k.requires_grad or k._backward is not None:
                _accumulate(k, (x2.T @ gcols).reshape(k.values.shape))
            if b is not None and (b.requires_grad or b._backward is not None):
                _accumulate(b, out.grad.sum(axis=(0, 2, 3), dtype=out.grad.dtype))
            if x.requires_grad or x._backward is not None:
                dx2 = gcols @ k2.T
                _accumulate(x, dx2.reshape(n, h, w, cin).transpose(0, 3, 1, 2))

        return run

    parents = (x, k) if b is None else (x, k, b)
    return _result(vals, parents, backward)


def pad2d(x: Tensor, pad_h: int, pad_w: int) -> Tensor:
    """Zero-pad bottom rows / right columns of an (N, C, H, W) tensor."""
    if pad_h == 0 and pad_w == 0:
        return x
    vals = np.pad(x.values, ((0, 0), (0, 0), (0, pad_h), (0, pad_w)))

    def backward(out):
        def run():
            h, w = x.values.shape[2], x.values.shape[3]
            _accumulate(x, out.grad[:, :, :h, :w])

        return run

    return _result(vals, (x,), backward)


def crop2d(x: Tensor, height: int, width: int) -> Tensor:
    """Keep the top-left height x width window of an (N, C, H, W) tensor."""
    if x.values.shape[2] == height and x.values.shape[3] == width:
        return x
    vals = np.ascontiguousarray(x.values[:, :, :height, :width])

    def backward(out):
        def run():
            g = np.zeros_like(x.values)
            g[:, :, :height, :width] = out.grad
            _accumulate(x, g)

        return run

    return _result(vals, (x,), backward)


# ---------------------------------------------------------------------------
# stochastic layer


def reparameterize(mu: Tensor, logvar: Tensor, eps: np.ndarray) -> Tensor:
    """mu + exp(logvar / 2) * eps; gradient flows to mu and logvar only."""
    eps = np.asarray(eps, dtype=mu.values.dtype)
    _check_same_shape(mu, logvar, "reparameterize")
    if eps.shape != mu.values.shape:
        raise ShapeMismatch(f"reparameterize: eps {eps.shape} vs mu {mu.values.shape}")
    sigma = np.exp(0.5 * logvar.values)
    vals = mu.values + sigma * eps

    def backward(out):
        def run():
            if mu.requires_grad or mu._backward is not None:
                _accumulate(mu, out.grad)
            if logvar.requires_grad or logvar._backward is not None:
                _accumulate(logvar, out.grad * (0.5 * sigma * eps))

        return run

    return _result(vals, (mu, logvar), backward)


# ---------------------------------------------------------------------------
# gradient checking


def finite_difference_check(loss_fn, params, h: float = 1e-3, max_coords: int = 32, seed: int = 0) -> float:
    """Compare analytic gradients of `loss_fn()` against central differences.

    `loss_fn` must be a deterministic closure over `params` returning a
    scalar Tensor (fix any sampling noise before calling). Up to
    `max_coords` coordinates per parameter are probed. Returns the max of
    |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
    """
    params = list(params)
    rng = np.random.default_rng(seed)

    out = loss_fn()
    base = float(out.values.reshape(-1)[0])
    if not np.isfinite(base):
        raise NumericError(f"loss is not finite: {base}")
    for p in params:
        p.zero_grad()
    out.backward()
    analytic = [np.zeros_like(p.values) if p.grad is None else p.grad.copy() for p in params]

    worst = 0.0
    for p, ga in zip(params, analytic):
        if not p.values.flags["C_CONTIGUOUS"]:
            p.values = np.ascontiguousarray(p.values)
        flat = p.values.reshape(-1)  # view; perturbations hit p.values in place
        n = flat.size
        idx = np.arange(n) if n <= max_coords else rng.choice(n, size=max_coords, replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            f_plus = float(loss_fn().values.reshape(-1)[0])
            flat[i] = orig - h
            f_minus = float(loss_fn().values.reshape(-1)[0])
            flat[i] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise NumericError("loss became non-finite during perturbation")
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = float(ga.reshape(-1)[i])
            rel = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            worst = max(worst, rel)
    return worst
