"""Exact derivatives of small dense coordinate networks.

Forward pass propagates truncated jets (value, input-gradient, input-Hessian)
through the layers; a hand-derived reverse sweep then yields the gradient of
any scalar loss built from those jets with respect to every weight and bias.
Everything is float64 and batched over sample points: jets are stored
channel-first as ``(C, N, width)`` so each layer is a single GEMM.

Channel layout for second-order jets (C = 12):
  channel k       (k = 0..2)  -> d/dx_k
  channel 3+3k+m  (k,m = 0..2)-> d^2/dx_k dx_m
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, NonFiniteLossError
from .field import SirenNet, _layer_frequency, normalize_rows
from .validation import check_point, check_points

_D = 3  # spatial input dimension


@dataclass(frozen=True)
class Jet2:
    """Value, gradient and (symmetric) Hessian of a scalar field at a point."""

    value: float
    grad: np.ndarray  # (3,)
    hess: np.ndarray  # (3, 3)


@dataclass(frozen=True)
class VecJet1:
    """Value and Jacobian of a vector field; jacobian[:, i] = dF/dx_i."""

    value: np.ndarray  # (3,)
    jacobian: np.ndarray  # (3, 3)


@dataclass
class Jet2Batch:
    """Batched scalar jets plus the cached intermediates for the reverse sweep."""

    points: np.ndarray  # (N, 3)
    value: np.ndarray  # (N,)
    grad: np.ndarray  # (N, 3)
    hess: np.ndarray  # (N, 3, 3)
    _cache: list


def _activation_derivs(net: SirenNet, a: np.ndarray, layer_index: int):
    """phi(a), phi'(a), phi''(a), phi'''(a) for the layer's activation."""
    if net.activation == "sine":
        w = _layer_frequency(net, layer_index)
        wa = w * a
        s, c = np.sin(wa), np.cos(wa)
        return s, w * c, -(w * w) * s, -(w**3) * c
    if net.activation == "tanh":
        t = np.tanh(a)
        d1 = 1.0 - t * t
        d2 = -2.0 * t * d1
        d3 = -2.0 * d1 * d1 - 2.0 * t * d2
        return t, d1, d2, d3
    s = 1.0 / (1.0 + np.exp(-a))
    d1 = s * (1.0 - s)
    d2 = d1 * (1.0 - 2.0 * s)
    d3 = d2 * (1.0 - 2.0 * s) - 2.0 * d1 * d1
    return s, d1, d2, d3


def _check_input(net: SirenNet, X, need_out=None):
    X = check_points(X)
    if net.in_dim != _D:
        raise DimensionMismatchError("jet evaluation requires a 3-D input network")
    if need_out is not None and net.out_dim != need_out:
        raise DimensionMismatchError(
            f"expected out_dim {need_out}, net has {net.out_dim}"
        )
    return X


def _apply_linear(W, b, h, jet):
    """a = h W^T + b and the same map on every jet channel (one GEMM)."""
    a = h @ W.T + b
    C, N, fin = jet.shape
    jet_pre = (jet.reshape(C * N, fin) @ W.T).reshape(C, N, W.shape[0])
    return a, jet_pre


def jet2_forward(net: SirenNet, X) -> Jet2Batch:
    """Value, input-gradient and input-Hessian of a scalar net on a batch."""
    X = _check_input(net, X, need_out=1)
    N = X.shape[0]
    h = X
    jet = np.zeros((12, N, _D))
    for k in range(_D):
        jet[k, :, k] = 1.0  # dh/dx_k of the identity input
    cache = []
    layers = net.layers()
    n_layers = len(layers)
    for i, (W, b) in enumerate(layers):
        a, jet_pre = _apply_linear(W, b, h, jet)
        if i == n_layers - 1:
            cache.append((h, jet, None, None))
            h, jet = a, jet_pre
            break
        derivs = _activation_derivs(net, a, i)
        cache.append((h, jet, derivs, jet_pre))
        val, d1, d2, _ = derivs
        out = np.empty_like(jet_pre)
        np.multiply(d1, jet_pre[:3], out=out[:3])
        np.multiply(d1, jet_pre[3:], out=out[3:])
        out9 = out[3:].reshape(3, 3, N, -1)
        g_pre = jet_pre[:3]
        # out9 += d2 * g_pre[k] * g_pre[m]
        out9 += (d2 * g_pre)[:, None] * g_pre[None, :]
        h = val
        jet = out
    value = h[:, 0]
    grad = jet[:3, :, 0].T.copy()
    hess = jet[3:, :, 0].T.reshape(N, 3, 3).copy()
    return Jet2Batch(points=X, value=value, grad=grad, hess=hess, _cache=cache)


def jet2_backward(net: SirenNet, jets: Jet2Batch, bar_value, bar_grad, bar_hess):
    """Parameter gradient of sum_n( bar terms . jet components ).

    Returns the flat gradient aligned with ``net.params`` for the scalar
    L = sum_n bar_value[n]*u_n + <bar_grad[n], g_n> + <bar_hess[n], H_n>.
    """
    N = jets.points.shape[0]
    bar_value = np.asarray(bar_value, dtype=np.float64).reshape(N)
    bar_grad = np.asarray(bar_grad, dtype=np.float64).reshape(N, 3)
    bar_hess = np.asarray(bar_hess, dtype=np.float64).reshape(N, 3, 3)

    layers = net.layers()
    n_layers = len(layers)
    grads_W = [None] * n_layers
    grads_b = [None] * n_layers

    # seeds at the output of the final linear layer
    bar_a = bar_value[:, None]
    bar_jet = np.empty((12, N, 1))
    bar_jet[:3] = bar_grad.T[:, :, None]
    bar_jet[3:] = bar_hess.reshape(N, 9).T[:, :, None]

    for i in range(n_layers - 1, -1, -1):
        W, _ = layers[i]
        h_in, jet_in, derivs, jet_pre = jets._cache[i]
        if i < n_layers - 1:
            # undo the activation: bar_a/bar_jet are adjoints of its output
            _, d1, d2, d3 = derivs
            g_pre = jet_pre[:3]
            h_pre = jet_pre[3:]
            bar_h_out = bar_a
            bar_g_out = bar_jet[:3]
            bar_H_out = bar_jet[3:]
            bH = bar_H_out.reshape(3, 3, N, -1)
            # t[m] = sum_k bH[k, m] * g_pre[k]; quad = sum_m t[m] * g_pre[m]
            t = (bH * g_pre[:, None]).sum(axis=0)
            quad = (t * g_pre).sum(axis=0)
            bar_a = (
                d1 * bar_h_out
                + d2 * (
                    (bar_g_out * g_pre).sum(axis=0)
                    + (bar_H_out * h_pre).sum(axis=0)
                )
                + d3 * quad
            )
            # sym[k] = sum_m (bH[k, m] + bH[m, k]) g_pre[m]
            sym = (bH * g_pre[None, :]).sum(axis=1) + (
                bH * g_pre[:, None]
            ).sum(axis=0)
            new_jet = np.empty_like(bar_jet)
            np.multiply(d1, bar_g_out, out=new_jet[:3])
            new_jet[:3] += d2 * sym
            np.multiply(d1, bar_H_out, out=new_jet[3:])
            bar_jet = new_jet
        C, _, fout = bar_jet.shape
        grads_W[i] = bar_a.T @ h_in + (
            bar_jet.reshape(C * N, fout).T @ jet_in.reshape(C * N, -1)
        )
        grads_b[i] = bar_a.sum(axis=0)
        if i > 0:
            bar_a = bar_a @ W
            bar_jet = (bar_jet.reshape(C * N, fout) @ W).reshape(C, N, -1)

    flat = np.empty(net.num_weights)
    offset = 0
    for gW, gb in zip(grads_W, grads_b):
        flat[offset : offset + gW.size] = gW.ravel()
        offset += gW.size
        flat[offset : offset + gb.size] = gb
        offset += gb.size
    return flat


def vec_jet1_forward(net: SirenNet, X):
    """Values (N,3) and Jacobians (N,3,3) of a 3-output net, differentiating
    through the unit-normalization layer when the net has one."""
    X = _check_input(net, X, need_out=3)
    N = X.shape[0]
    h = X
    jet = np.zeros((3, N, _D))
    for k in range(_D):
        jet[k, :, k] = 1.0
    layers = net.layers()
    n_layers = len(layers)
    for i, (W, b) in enumerate(layers):
        a, jet_pre = _apply_linear(W, b, h, jet)
        if i == n_layers - 1:
            h, jet = a, jet_pre
            break
        val, d1, _, _ = _activation_derivs(net, a, i)
        h = val
        jet = d1 * jet_pre
    value = h
    jac = jet.transpose(1, 2, 0)  # (N, out, k): column k = dF/dx_k
    if net.normalize_output:
        r = np.linalg.norm(value, axis=1, keepdims=True)
        y = normalize_rows(value)
        # d(v/|v|)/dx_k = (J_k - y (y . J_k)) / |v|
        proj = np.einsum("nr,nrk->nk", y, jac)
        jac = (jac - y[:, :, None] * proj[:, None, :]) / r[:, :, None]
        value = y
    return value, jac


def value_forward(net: SirenNet, X):
    """Plain forward pass with the cache needed for first-order backprop."""
    X = check_points(X)
    h = X
    cache = []
    layers = net.layers()
    n_layers = len(layers)
    pre_norm = None
    for i, (W, b) in enumerate(layers):
        a = h @ W.T + b
        cache.append((h, a))
        if i == n_layers - 1:
            h = a
            break
        h = _activation_derivs(net, a, i)[0]
    if net.normalize_output:
        pre_norm = h
        h = normalize_rows(h)
    return h, (cache, pre_norm)


def value_backward(net: SirenNet, cache_tuple, bar_out):
    """Parameter gradient of sum_n <bar_out[n], net(x_n)> (first order)."""
    cache, pre_norm = cache_tuple
    bar = np.asarray(bar_out, dtype=np.float64)
    if bar.ndim == 1:
        bar = bar[:, None]
    if net.normalize_output:
        r = np.linalg.norm(pre_norm, axis=1, keepdims=True)
        y = pre_norm / r
        bar = (bar - y * np.sum(y * bar, axis=1, keepdims=True)) / r
    layers = net.layers()
    n_layers = len(layers)
    grads_W = [None] * n_layers
    grads_b = [None] * n_layers
    for i in range(n_layers - 1, -1, -1):
        W, _ = layers[i]
        h_in, a = cache[i]
        if i < n_layers - 1:
            bar = bar * _activation_derivs(net, a, i)[1]
        grads_W[i] = bar.T @ h_in
        grads_b[i] = bar.sum(axis=0)
        if i > 0:
            bar = bar @ W
    flat = np.empty(net.num_weights)
    offset = 0
    for gW, gb in zip(grads_W, grads_b):
        flat[offset : offset + gW.size] = gW.ravel()
        offset += gW.size
        flat[offset : offset + gb.size] = gb
        offset += gb.size
    return flat


def eval_jet2(net: SirenNet, x) -> Jet2:
    """Exact value/gradient/Hessian of a scalar net at a single point."""
    x = check_point(x)
    jets = jet2_forward(net, x[None, :])
    return Jet2(value=float(jets.value[0]), grad=jets.grad[0], hess=jets.hess[0])


def eval_vec_jet1(net: SirenNet, x) -> VecJet1:
    """Exact value/Jacobian of a 3-output net at a single point."""
    x = check_point(x)
    value, jac = vec_jet1_forward(net, x[None, :])
    return VecJet1(value=value[0], jacobian=jac[0])


def first_nonfinite_row(*arrays):
    """Index of the first sample whose entries are not all finite, else None."""
    for arr in arrays:
        if arr is None:
            continue
        a = np.asarray(arr)
        flat = a.reshape(a.shape[0], -1) if a.ndim > 1 else a[:, None]
        bad = ~np.all(np.isfinite(flat), axis=1)
        if np.any(bad):
            return int(np.argmax(bad))
    return None


def loss_param_gradient(loss, net: SirenNet, points):
    """Evaluate a jet-based scalar loss and its parameter gradient.

    ``loss`` is called with the Jet2Batch for ``points`` and must return
    ``(value, (bar_value, bar_grad, bar_hess))`` -- the loss and its partial
    derivatives with respect to each jet component per sample.
    """
    jets = jet2_forward(net, points)
    value, seeds = loss(jets)
    if not np.isfinite(value):
        idx = first_nonfinite_row(jets.value, jets.grad, jets.hess, *seeds)
        raise NonFiniteLossError(
            f"loss is not finite (first bad sample index: {idx})", sample_index=idx
        )
    grad = jet2_backward(net, jets, *seeds)
    return float(value), grad
