"""Vector-field networks for the operator-dynamics ODE.

Three variants share a first tanh layer and an affine readout:

* ``fcn``      -- hidden layers are plain tanh(W x + b).
* ``fan``      -- hidden layers split their input into three blocks; the
                  first two pass through entrywise sin(w*x) and cos(w*x)
                  at fixed log-spaced frequencies, the rest through a
                  tanh affine block, and the blocks are concatenated.
* ``fan_time`` -- hidden blocks are gated by sin(w*t) and cos(w*t) of the
                  integration time, the remainder is affine, and the
                  concatenation passes through a mixing affine + tanh.

Forward and reverse-mode (vector-Jacobian) evaluation are both hand
written over a flat parameter vector so gradients can be chained through
the ODE solver without a framework dependency.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

VARIANTS = ("fcn", "fan", "fan_time")


def default_frequencies(count: int = 16) -> np.ndarray:
    """Log-spaced frequency ladder over [1e-1, 1e3]."""
    return np.logspace(-1.0, 3.0, count)


def default_partition(width: int) -> tuple:
    n_sin = width // 4
    return (n_sin, n_sin, width - 2 * n_sin)


@dataclass(frozen=True)
class NetworkSpec:
    variant: str
    input_dim: int
    depth: int = 3
    hidden_width: int = 128
    fan_partition: tuple | None = None
    frequencies: tuple = tuple(default_frequencies())
    append_time: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.depth < 1 or self.hidden_width < 1 or self.input_dim < 1:
            raise ValueError("depth, width and input_dim must be positive")
        if self.fan_partition is None and self.variant != "fcn":
            object.__setattr__(
                self, "fan_partition", default_partition(self.hidden_width)
            )
        if self.fan_partition is not None:
            ns, nc, nl = self.fan_partition
            if ns + nc + nl != self.hidden_width or min(ns, nc, nl) < 0:
                raise ValueError("fan_partition must tile the hidden width")
        if self.variant == "fan_time" and not self.frequencies:
            raise ValueError("fan_time requires a frequency ladder")
        if self.variant == "fan_time" and self.append_time:
            raise ValueError("fan_time takes time through its gates only")

    @property
    def in_width(self) -> int:
        return self.input_dim + (1 if self.append_time else 0)

    def unit_frequencies(self, block: int) -> np.ndarray:
        """Per-unit frequency assignment: the ladder tiled over a block."""
        freqs = np.asarray(self.frequencies, dtype=float)
        return freqs[np.arange(block) % len(freqs)]


def layer_shapes(spec: NetworkSpec):
    """Ordered (name, shape) table of every weight and bias array."""
    w = spec.hidden_width
    shapes = [("W0", (w, spec.in_width)), ("b0", (w,))]
    ns, nc, nl = spec.fan_partition or (0, 0, w)
    for l in range(1, spec.depth):
        if spec.variant == "fcn":
            shapes += [(f"W{l}", (w, w)), (f"b{l}", (w,))]
        elif spec.variant == "fan":
            shapes += [(f"W{l}", (nl, nl)), (f"b{l}", (nl,))]
        else:  # fan_time: inner affine on the linear block, then a mixer
            shapes += [
                (f"Wi{l}", (nl, nl)), (f"bi{l}", (nl,)),
                (f"Wm{l}", (w, w)), (f"bm{l}", (w,)),
            ]
    shapes += [("Wout", (spec.input_dim, w)), ("bout", (spec.input_dim,))]
    return shapes


@dataclass
class Parameters:
    """Flat parameter vector plus the (name, shape, offset) layout table."""

    values: np.ndarray
    layout: tuple  # of (name, shape, offset)

    def view(self, name: str) -> np.ndarray:
        for n, shape, off in self.layout:
            if n == name:
                size = int(np.prod(shape))
                return self.values[off:off + size].reshape(shape)
        raise KeyError(name)

    def copy(self) -> "Parameters":
        return Parameters(self.values.copy(), self.layout)

    @property
    def size(self) -> int:
        return self.values.size


def build_layout(spec: NetworkSpec) -> tuple:
    layout = []
    offset = 0
    for name, shape in layer_shapes(spec):
        layout.append((name, shape, offset))
        offset += int(np.prod(shape))
    return tuple(layout)


def init_parameters(spec: NetworkSpec, seed: int = 0) -> Parameters:
    """Glorot-uniform initialization.

    Rows of the first layer that feed the trigonometric blocks of the next
    layer are scaled down by their unit frequency, so sin(w*x) starts in
    its near-linear regime even for the large-w rungs of the ladder.
    """
    rng = np.random.default_rng(seed)
    layout = build_layout(spec)
    total = sum(int(np.prod(s)) for _, s, _ in layout)
    values = np.zeros(total)
    params = Parameters(values, layout)
    for name, shape, _ in layout:
        v = params.view(name)
        if name == "Wout":
            continue  # zero readout: the field starts at zero, keeping the
            # untrained ODE trivially integrable
        if name.startswith("W"):
            fan_out, fan_in = shape
            lim = np.sqrt(6.0 / (fan_in + fan_out))
            v[:] = rng.uniform(-lim, lim, size=shape)
        # biases stay zero
    if spec.variant in ("fan", "fan_time") and spec.depth > 1:
        ns, nc, _ = spec.fan_partition
        scale = np.concatenate([
            1.0 / np.maximum(1.0, spec.unit_frequencies(ns)),
            1.0 / np.maximum(1.0, spec.unit_frequencies(nc)),
        ])
        W0 = params.view("W0")
        W0[: ns + nc] *= scale[:, None]
    return params


class GradientBuffer:
    """Flat gradient accumulator mirroring a Parameters layout."""

    def __init__(self, params: Parameters):
        self.values = np.zeros_like(params.values)
        self.layout = params.layout

    def view(self, name: str) -> np.ndarray:
        return Parameters(self.values, self.layout).view(name)


def _affine_tanh_forward(x, W, b):
    a = np.tanh(x @ W.T + b)
    return a, (x, a)


def _affine_tanh_backward(grad_out, cache, W, gW, gb):
    x, a = cache
    gz = grad_out * (1.0 - a * a)
    gW += gz.T @ x
    gb += gz.sum(axis=0)
    return gz @ W


def forward(spec: NetworkSpec, params: Parameters, x: np.ndarray, t=None,
            caches: list | None = None) -> np.ndarray:
    """Evaluate dh/dt for a batch of states.

    ``x`` has shape (batch, input_dim); ``t`` is a scalar or a (batch,)
    vector and is required for fan_time or append_time specs.  When
    ``caches`` is a list, per-layer intermediates are appended to it for a
    later :func:`backward` call.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != spec.input_dim:
        raise ValueError(
            f"state dimension {x.shape[1]} does not match spec {spec.input_dim}"
        )
    if spec.append_time:
        if t is None:
            raise ValueError("spec appends time but no time was given")
        t_col = np.broadcast_to(np.asarray(t, dtype=float), (x.shape[0],))
        x = np.concatenate([x, t_col[:, None]], axis=1)
    if spec.variant == "fan_time" and t is None:
        raise ValueError("fan_time requires the evaluation time")

    record = caches if caches is not None else None
    h, c = _affine_tanh_forward(x, params.view("W0"), params.view("b0"))
    if record is not None:
        record.append(c)
    ns, nc, nl = spec.fan_partition or (0, 0, spec.hidden_width)
    ws = spec.unit_frequencies(ns) if ns else None
    wc = spec.unit_frequencies(nc) if nc else None

    for l in range(1, spec.depth):
        if spec.variant == "fcn":
            h, c = _affine_tanh_forward(h, params.view(f"W{l}"), params.view(f"b{l}"))
            if record is not None:
                record.append(c)
        elif spec.variant == "fan":
            x1, x2, x3 = h[:, :ns], h[:, ns:ns + nc], h[:, ns + nc:]
            s = np.sin(ws * x1) if ns else x1
            cth = np.cos(wc * x2) if nc else x2
            a3, c3 = _affine_tanh_forward(x3, params.view(f"W{l}"), params.view(f"b{l}"))
            h = np.concatenate([s, cth, a3], axis=1)
            if record is not None:
                record.append((x1, x2, c3))
        else:  # fan_time
            tb = np.broadcast_to(np.asarray(t, dtype=float), (h.shape[0],))
            gate_s = np.sin(np.outer(tb, ws)) if ns else None
            gate_c = np.cos(np.outer(tb, wc)) if nc else None
            x1, x2, x3 = h[:, :ns], h[:, ns:ns + nc], h[:, ns + nc:]
            g1 = x1 * gate_s if ns else x1
            g2 = x2 * gate_c if nc else x2
            g3 = x3 @ params.view(f"Wi{l}").T + params.view(f"bi{l}")
            u = np.concatenate([g1, g2, g3], axis=1)
            a, cm = _affine_tanh_forward(u, params.view(f"Wm{l}"), params.view(f"bm{l}"))
            h = a
            if record is not None:
                record.append((x1, x2, x3, gate_s, gate_c, cm))
    out = h @ params.view("Wout").T + params.view("bout")
    if record is not None:
        record.append(h)
    return out


def backward(spec: NetworkSpec, params: Parameters, caches: list,
             grad_out: np.ndarray, grads: GradientBuffer) -> np.ndarray:
    """Vector-Jacobian product for one recorded forward pass.

    Accumulates parameter gradients into ``grads`` and returns the
    cotangent with respect to the state input (time is not
    differentiated).
    """
    grad_out = np.atleast_2d(grad_out)
    h_last = caches[-1]
    grads.view("Wout")[...] += grad_out.T @ h_last
    grads.view("bout")[...] += grad_out.sum(axis=0)
    g = grad_out @ params.view("Wout")

    ns, nc, nl = spec.fan_partition or (0, 0, spec.hidden_width)
    ws = spec.unit_frequencies(ns) if ns else None
    wc = spec.unit_frequencies(nc) if nc else None

    for l in range(spec.depth - 1, 0, -1):
        cache = caches[l]
        if spec.variant == "fcn":
            g = _affine_tanh_backward(
                g, cache, params.view(f"W{l}"), grads.view(f"W{l}"), grads.view(f"b{l}")
            )
        elif spec.variant == "fan":
            x1, x2, c3 = cache
            g1, g2, g3 = g[:, :ns], g[:, ns:ns + nc], g[:, ns + nc:]
            gx1 = g1 * ws * np.cos(ws * x1) if ns else g1
            gx2 = -g2 * wc * np.sin(wc * x2) if nc else g2
            gx3 = _affine_tanh_backward(
                g3, c3, params.view(f"W{l}"), grads.view(f"W{l}"), grads.view(f"b{l}")
            )
            g = np.concatenate([gx1, gx2, gx3], axis=1)
        else:  # fan_time
            x1, x2, x3, gate_s, gate_c, cm = cache
            gu = _affine_tanh_backward(
                g, cm, params.view(f"Wm{l}"), grads.view(f"Wm{l}"), grads.view(f"bm{l}")
            )
            gu1, gu2, gu3 = gu[:, :ns], gu[:, ns:ns + nc], gu[:, ns + nc:]
            gx1 = gu1 * gate_s if ns else gu1
            gx2 = gu2 * gate_c if nc else gu2
            grads.view(f"Wi{l}")[...] += gu3.T @ x3
            grads.view(f"bi{l}")[...] += gu3.sum(axis=0)
            gx3 = gu3 @ params.view(f"Wi{l}")
            g = np.concatenate([gx1, gx2, gx3], axis=1)
    g = _affine_tanh_backward(
        g, caches[0], params.view("W0"), grads.view("W0"), grads.view("b0")
    )
    if spec.append_time:
        g = g[:, : spec.input_dim]
    return g


def make_field(spec: NetworkSpec, params: Parameters):
    """Wrap (spec, params) as an f(t, y) callable for the ODE solver."""

    def field(t, y):
        return forward(spec, params, y, t=t)

    return field
