"""Peephole LSTM with dropout on the hidden state and a linear 7-D pose regressor.

Parameters live in a plain ``dict[str, np.ndarray]`` keyed by ``PARAM_ORDER``.
Input-to-hidden matrices are ``H x D``, hidden-to-hidden ``H x H``, peepholes
and biases are ``H``-vectors. The regressor is ``W_reg`` (``7 x H``) and
``b_reg``; output rows 0-2 are position and 3-6 the raw quaternion (w, x, y, z).

Gate equations (``*`` is elementwise)::

    i_t = sigmoid(W_xi x_t + W_hi h_{t-1} + W_ci * c_{t-1} + b_i)
    f_t = sigmoid(W_xf x_t + W_hf h_{t-1} + W_cf * c_{t-1} + b_f)
    o_t = sigmoid(W_xo x_t + W_ho h_{t-1} + W_co * c_{t-1} + b_o)
    c_t = f_t * c_{t-1} + i_t * tanh(W_xc x_t + W_hc h_{t-1} + b_c)
    h_t = o_t * tanh(c_t)

``CellOptions.output_peephole_current_cell`` switches the output-gate peephole
to ``c_t``; ``CellOptions.peepholes=False`` drops all three peephole terms.
All functions accept a leading batch axis on inputs and states.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import CacheMismatch, ShapeMismatch
from .geometry import PosePrediction

GATES = ("i", "f", "o", "c")
LSTM_KEYS = (
    "W_xi", "W_xf", "W_xo", "W_xc",
    "W_hi", "W_hf", "W_ho", "W_hc",
    "W_ci", "W_cf", "W_co",
    "b_i", "b_f", "b_o", "b_c",
)
REGRESSOR_KEYS = ("W_reg", "b_reg")
PARAM_ORDER = LSTM_KEYS + REGRESSOR_KEYS
POSE_DIM = 7

Params = dict


@dataclass(frozen=True)
class CellOptions:
    peepholes: bool = True
    output_peephole_current_cell: bool = False


class LstmState(NamedTuple):
    h: np.ndarray
    c: np.ndarray


class GateTrace(NamedTuple):
    """Gate activations stacked over time (time is axis 0)."""

    i: np.ndarray
    f: np.ndarray
    o: np.ndarray

    def median_per_step(self) -> np.ndarray:
        """``(T, ..., 3)`` medians over hidden units of i, f, o."""
        return np.stack([np.median(g, axis=-1) for g in self], axis=-1)


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def dims(params: Params) -> tuple[int, int]:
    H, D = params["W_xi"].shape
    return D, H


def param_shapes(D: int, H: int) -> dict[str, tuple[int, ...]]:
    shapes = {}
    for g in GATES:
        shapes[f"W_x{g}"] = (H, D)
        shapes[f"W_h{g}"] = (H, H)
        shapes[f"b_{g}"] = (H,)
    for g in "ifo":
        shapes[f"W_c{g}"] = (H,)
    shapes["W_reg"] = (POSE_DIM, H)
    shapes["b_reg"] = (POSE_DIM,)
    return {k: shapes[k] for k in PARAM_ORDER}


def check_shapes(params: Params) -> tuple[int, int]:
    D, H = dims(params)
    for k, shape in param_shapes(D, H).items():
        if k not in params or params[k].shape != shape:
            got = None if k not in params else params[k].shape
            raise ShapeMismatch(f"{k}: expected {shape}, got {got}")
    return D, H


def zeros_like_params(params: Params) -> Params:
    return {k: np.zeros_like(params[k]) for k in PARAM_ORDER}


def zero_params(D: int, H: int) -> Params:
    return {k: np.zeros(s) for k, s in param_shapes(D, H).items()}


def init_params(rng: np.random.Generator, D: int, H: int, sigma_pos: float = 0.5,
                sigma_orient: float = 0.01, peepholes: bool = True) -> Params:
    """Xavier-uniform LSTM weights, Gaussian regressor rows, zero biases.

    Peephole vectors are treated as diagonal ``H x H`` matrices for the Xavier bound.
    """
    if D < 1 or H < 1:
        raise ValueError("D and H must be >= 1")
    params = zero_params(D, H)
    for k in LSTM_KEYS:
        if k.startswith("b_"):
            continue
        if k.startswith("W_x"):
            bound = np.sqrt(6.0 / (D + H))
        else:
            bound = np.sqrt(6.0 / (2 * H))
        params[k] = rng.uniform(-bound, bound, size=params[k].shape)
    if not peepholes:
        for g in "ifo":
            params[f"W_c{g}"][:] = 0.0
    W = np.empty((POSE_DIM, H))
    W[:3] = rng.normal(0.0, sigma_pos, size=(3, H))
    W[3:] = rng.normal(0.0, sigma_orient, size=(4, H))
    params["W_reg"] = W
    return params


def lstm_step(params: Params, x_t, prev: LstmState, options: CellOptions = CellOptions()):
    """One cell update. Returns ``(LstmState, (i, f, o))``."""
    D, H = dims(params)
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.shape[-1] != D or prev.h.shape[-1] != H or prev.c.shape[-1] != H:
        raise ShapeMismatch(f"x {x_t.shape}, h {prev.h.shape}, c {prev.c.shape} vs D={D}, H={H}")
    out = _step(params, x_t, prev.h, prev.c, options)
    return LstmState(out["h"], out["c"]), (out["i"], out["f"], out["o"])


def _step(p: Params, x, h_prev, c_prev, options: CellOptions) -> dict:
    a_i = x @ p["W_xi"].T + h_prev @ p["W_hi"].T + p["b_i"]
    a_f = x @ p["W_xf"].T + h_prev @ p["W_hf"].T + p["b_f"]
    a_o = x @ p["W_xo"].T + h_prev @ p["W_ho"].T + p["b_o"]
    a_g = x @ p["W_xc"].T + h_prev @ p["W_hc"].T + p["b_c"]
    if options.peepholes:
        a_i = a_i + p["W_ci"] * c_prev
        a_f = a_f + p["W_cf"] * c_prev
    i = sigmoid(a_i)
    f = sigmoid(a_f)
    g = np.tanh(a_g)
    c = f * c_prev + i * g
    if options.peepholes:
        a_o = a_o + p["W_co"] * (c if options.output_peephole_current_cell else c_prev)
    o = sigmoid(a_o)
    tc = np.tanh(c)
    return {"i": i, "f": f, "o": o, "g": g, "c": c, "tc": tc, "h": o * tc}


def zero_state(H: int, batch_shape=()) -> LstmState:
    return LstmState(np.zeros(batch_shape + (H,)), np.zeros(batch_shape + (H,)))


def lstm_forward(params: Params, xs, init: LstmState | None = None,
                 options: CellOptions = CellOptions()):
    """Fold ``lstm_step`` over ``xs`` (time on axis 0). Returns ``(states, GateTrace)``."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim < 2 or len(xs) < 1:
        raise ShapeMismatch("xs must hold at least one time step")
    _, H = dims(params)
    state = init if init is not None else zero_state(H, xs.shape[1:-1])
    states, gi, gf, go = [], [], [], []
    for x_t in xs:
        state, (i, f, o) = lstm_step(params, x_t, state, options)
        states.append(state)
        gi.append(i)
        gf.append(f)
        go.append(o)
    return states, GateTrace(np.stack(gi), np.stack(gf), np.stack(go))


def dropout_mask(shape, p: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout mask: entries are 0 or ``1 / (1 - p)``."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability {p} not in [0, 1)")
    if p == 0.0:
        return np.ones(shape)
    keep = rng.random(shape) >= p
    return keep / (1.0 - p)


def dropout(h, p: float, train: bool, rng: np.random.Generator | None = None) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if not train or p == 0.0:
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout probability {p} not in [0, 1)")
        return h.copy()
    return h * dropout_mask(h.shape, p, rng)


def regress_array(params: Params, h) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64)
    if h.shape[-1] != params["W_reg"].shape[1]:
        raise ShapeMismatch(f"hidden size {h.shape[-1]} vs regressor {params['W_reg'].shape}")
    return h @ params["W_reg"].T + params["b_reg"]


def regress(params: Params, h) -> PosePrediction:
    return PosePrediction.from_vector(regress_array(params, np.asarray(h).reshape(-1)))


@dataclass
class ForwardCache:
    xs: np.ndarray       # (B, T, D)
    masks: np.ndarray    # (B, T, H)
    steps: list          # per time step dicts from _step, plus h_prev / c_prev
    options: CellOptions


def forward_sequences(params: Params, xs, options: CellOptions = CellOptions(), *,
                      dropout_p: float = 0.0, train: bool = False, rng=None, masks=None):
    """Run a batch of sequences from a zero state.

    ``xs`` is ``(B, T, D)``. Returns ``(preds (B, T, 7), GateTrace, cache)``.
    Dropout masks are drawn from ``rng`` in train mode unless given explicitly.
    """
    xs = np.asarray(xs, dtype=np.float64)
    D, H = check_shapes(params)
    if xs.ndim != 3 or xs.shape[-1] != D:
        raise ShapeMismatch(f"xs shape {xs.shape}, expected (B, T, {D})")
    B, T, _ = xs.shape
    if masks is None:
        masks = dropout_mask((B, T, H), dropout_p, rng) if train else np.ones((B, T, H))
    h, c = np.zeros((B, H)), np.zeros((B, H))
    steps = []
    for t in range(T):
        out = _step(params, xs[:, t], h, c, options)
        out["h_prev"], out["c_prev"] = h, c
        steps.append(out)
        h, c = out["h"], out["c"]
    hs = np.stack([s["h"] for s in steps], axis=1)
    preds = regress_array(params, hs * masks)
    trace = GateTrace(*(np.stack([s[g] for s in steps]) for g in "ifo"))
    return preds, trace, ForwardCache(xs, masks, steps, options)


def backward(params: Params, xs, dpreds, cache: ForwardCache) -> Params:
    """Backpropagation through time for ``forward_sequences``.

    ``dpreds`` is the loss gradient w.r.t. the ``(B, T, 7)`` predictions.
    Gradients are summed over the batch.
    """
    xs = np.asarray(xs, dtype=np.float64)
    if xs.shape != cache.xs.shape or not np.array_equal(xs, cache.xs):
        raise CacheMismatch("forward cache was built from different inputs")
    dpreds = np.asarray(dpreds, dtype=np.float64)
    B, T, _ = xs.shape
    if dpreds.shape != (B, T, POSE_DIM):
        raise ShapeMismatch(f"dpreds shape {dpreds.shape}, expected {(B, T, POSE_DIM)}")
    opts = cache.options
    p = params
    grads = zeros_like_params(params)

    hs_drop = np.stack([s["h"] for s in cache.steps], axis=1) * cache.masks
    grads["W_reg"] = np.einsum("btk,bth->kh", dpreds, hs_drop)
    grads["b_reg"] = dpreds.sum(axis=(0, 1))
    dh_from_out = (dpreds @ p["W_reg"]) * cache.masks

    H = p["W_reg"].shape[1]
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in reversed(range(T)):
        s = cache.steps[t]
        x, h_prev, c_prev = xs[:, t], s["h_prev"], s["c_prev"]
        i, f, o, g, tc = s["i"], s["f"], s["o"], s["g"], s["tc"]
        dh = dh_from_out[:, t] + dh_next
        da_o = dh * tc * o * (1.0 - o)
        dc = dh * o * (1.0 - tc * tc) + dc_next
        if opts.peepholes and opts.output_peephole_current_cell:
            dc = dc + da_o * p["W_co"]
        da_i = dc * g * i * (1.0 - i)
        da_f = dc * c_prev * f * (1.0 - f)
        da_g = dc * i * (1.0 - g * g)
        dc_prev = dc * f
        if opts.peepholes:
            dc_prev = dc_prev + da_i * p["W_ci"] + da_f * p["W_cf"]
            o_src = s["c"] if opts.output_peephole_current_cell else c_prev
            if not opts.output_peephole_current_cell:
                dc_prev = dc_prev + da_o * p["W_co"]
            grads["W_ci"] += (da_i * c_prev).sum(axis=0)
            grads["W_cf"] += (da_f * c_prev).sum(axis=0)
            grads["W_co"] += (da_o * o_src).sum(axis=0)
        dh_prev = np.zeros_like(h_prev)
        for gate, da in zip(GATES, (da_i, da_f, da_o, da_g)):
            grads[f"W_x{gate}"] += da.T @ x
            grads[f"W_h{gate}"] += da.T @ h_prev
            grads[f"b_{gate}"] += da.sum(axis=0)
            dh_prev += da @ p[f"W_h{gate}"]
        dh_next, dc_next = dh_prev, dc_prev
    return grads
