"""Central finite-difference check of the full training gradient.

Each trial draws a small random network and batch, fixes the dropout masks,
and compares ``trainer.batch_gradient`` against central differences of the
batch loss for every parameter entry.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .geometry import normalize
from .loss import LossWeights, sequence_loss
from .net import CellOptions, PARAM_ORDER, forward_sequences, init_params

EPS = 1e-5
TOLERANCE = 1e-4
# entries smaller than this are compared on absolute error (TOLERANCE * REL_FLOOR = 1e-9);
# central-difference roundoff is about 2e-16 * |loss| / EPS, i.e. up to ~1e-9 here
REL_FLOOR = 1e-5


@dataclass
class TrialResult:
    D: int
    H: int
    T: int
    B: int
    options: CellOptions
    max_rel_error: float
    worst_param: str


def rel_error(a, b, floor: float = REL_FLOOR) -> np.ndarray:
    a, b = np.asarray(a), np.asarray(b)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def batch_loss(params, X, Y, weights, options, masks) -> float:
    preds, _, _ = forward_sequences(params, X, options, train=True, masks=masks)
    return sequence_loss(preds, Y, weights, params).as_dict()["total"] / len(X)


def numeric_gradient(f, params, eps: float = EPS) -> dict:
    grads = {}
    for k in PARAM_ORDER:
        g = np.zeros_like(params[k])
        flat, gflat = params[k].reshape(-1), g.reshape(-1)
        for j in range(flat.size):
            old = flat[j]
            flat[j] = old + eps
            up = f(params)
            flat[j] = old - eps
            down = f(params)
            flat[j] = old
            gflat[j] = (up - down) / (2 * eps)
        grads[k] = g
    return grads


def random_instance(rng: np.random.Generator, options: CellOptions | None = None):
    D = int(rng.integers(1, 7))
    H = int(rng.integers(1, 9))
    T = int(rng.integers(1, 5))
    B = int(rng.integers(1, 4))
    if options is None:
        options = CellOptions(peepholes=bool(rng.random() < 0.75),
                              output_peephole_current_cell=bool(rng.random() < 0.5))
    params = init_params(rng, D, H, sigma_pos=0.5, sigma_orient=0.3, peepholes=options.peepholes)
    if options.peepholes:
        for k in ("W_ci", "W_cf", "W_co"):
            params[k] = rng.normal(0.0, 0.8, size=H)
    for k in ("b_i", "b_f", "b_o", "b_c", "b_reg"):
        params[k] = rng.normal(0.0, 0.5, size=params[k].shape)
    X = rng.normal(0.0, 1.0, size=(B, T, D))
    Y = np.empty((B, T, 7))
    Y[..., :3] = rng.normal(0.0, 2.0, size=(B, T, 3))
    for b in range(B):
        for t in range(T):
            Y[b, t, 3:] = normalize(rng.normal(size=4))
    weights = LossWeights(beta=float(rng.uniform(0.5, 5.0)), gamma=float(rng.uniform(0.0, 0.1)),
                          delta=float(rng.uniform(0.1, 1.0)),
                          temporal_on_error=bool(rng.random() < 0.25))
    masks = (rng.random((B, T, H)) >= 0.3) / 0.7
    return params, X, Y, weights, options, masks


def check_instance(params, X, Y, weights, options, masks) -> tuple[float, str]:
    from .trainer import batch_gradient

    _, analytic = batch_gradient(params, X, Y, weights, options, masks=masks, train=True)
    numeric = numeric_gradient(lambda p: batch_loss(p, X, Y, weights, options, masks), params)
    worst, worst_key = 0.0, ""
    for k in PARAM_ORDER:
        err = float(np.max(rel_error(analytic[k], numeric[k]))) if analytic[k].size else 0.0
        if err > worst:
            worst, worst_key = err, k
    return worst, worst_key


def run_gradcheck(trials: int = 20, seed: int = 0) -> list[TrialResult]:
    rng = np.random.default_rng(seed)
    results = []
    for _ in range(trials):
        params, X, Y, weights, options, masks = random_instance(rng)
        err, key = check_instance(params, X, Y, weights, options, masks)
        B, T, D = X.shape
        results.append(TrialResult(D, params["W_reg"].shape[1], T, B, options, err, key))
    return results


def main(trials: int = 20, seed: int = 0) -> int:
    t0 = time.perf_counter()
    results = run_gradcheck(trials, seed)
    worst = max(r.max_rel_error for r in results)
    for n, r in enumerate(results):
        print(f"trial {n:2d}  D={r.D} H={r.H} T={r.T} B={r.B} peep={int(r.options.peepholes)} "
              f"oc={int(r.options.output_peephole_current_cell)}  max rel err {r.max_rel_error:.2e} "
              f"({r.worst_param})")
    ok = worst <= TOLERANCE
    print(f"gradcheck {'PASS' if ok else 'FAIL'}: worst {worst:.2e} <= {TOLERANCE:g} "
          f"over {len(results)} trials in {time.perf_counter() - t0:.1f}s")
    return 0 if ok else 1
