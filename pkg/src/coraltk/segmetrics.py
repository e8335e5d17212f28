"""Segmentation losses, confusion-matrix metrics and the ShapeConv kernel.

Probability maps are ``(C, H, W)`` arrays; truth and prediction are
:class:`~coraltk.raster.ClassMask` objects or plain integer arrays, with 255
marking pixels to skip.
"""

from __future__ import annotations

import math

import numpy as np

from .raster import MASK_NODATA, ClassMask, require_aligned

PROB_FLOOR = 1e-12
FOREGROUND = (1, 2)
DEFAULT_MU = 0.4


def _ids(m):
    return m.ids if isinstance(m, ClassMask) else np.asarray(m)


def check_probmap(p, tol=1e-6):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 3:
        raise ValueError(f"probability map must be (C, H, W), got shape {p.shape}")
    if (p < 0).any():
        raise ValueError("negative probabilities")
    s = p.sum(axis=0)
    if np.abs(s - 1).max() > tol:
        raise ValueError("per-pixel probabilities do not sum to 1")
    return p


def _prepare(p, truth):
    p = check_probmap(p)
    t = _ids(truth).astype(np.int64)
    if t.shape != p.shape[1:]:
        raise ValueError(f"truth shape {t.shape} does not match probabilities {p.shape[1:]}")
    keep = t != MASK_NODATA
    if ((t[keep] < 0) | (t[keep] >= p.shape[0])).any():
        raise ValueError(f"truth ids outside 0..{p.shape[0] - 1}")
    return p, t, keep


def ce_loss(p, truth):
    """Mean ``-ln p[true class]`` over labelled pixels, floored at 1e-12."""
    p, t, keep = _prepare(p, truth)
    n = int(keep.sum())
    if n == 0:
        raise ValueError("no labelled pixels to evaluate")
    rows, cols = np.nonzero(keep)
    pt = np.maximum(p[t[rows, cols], rows, cols], PROB_FLOOR)
    return -math.fsum(np.log(pt).tolist()) / n


def soft_iou_loss(p, truth, foreground=FOREGROUND):
    """Mean over foreground classes present in ``truth`` of ``1 - I/U``.

    ``I = sum(p_c * [truth == c])`` and ``U = sum(p_c) + |truth == c| - I``.
    """
    p, t, keep = _prepare(p, truth)
    losses = []
    for c in foreground:
        is_c = (t == c) & keep
        if not is_c.any():
            continue
        pc = p[c][keep]
        inter = math.fsum(p[c][is_c].tolist())
        union = math.fsum(pc.tolist()) + int(is_c.sum()) - inter
        losses.append(1.0 - inter / union)
    if not losses:
        raise ValueError("no foreground pixels in truth")
    return math.fsum(losses) / len(losses)


def hybrid_loss(p, truth, mu=DEFAULT_MU, foreground=FOREGROUND):
    """``ce_loss + mu * soft_iou_loss``."""
    if mu < 0:
        raise ValueError(f"mu must be >= 0, got {mu}")
    ce = ce_loss(p, truth)
    if mu == 0:
        return ce
    return ce + mu * soft_iou_loss(p, truth, foreground)


def confusion(pred, truth, n_classes=3):
    """``m[i, j]`` = pixels of true class i predicted as j; 255 in either is skipped."""
    if isinstance(pred, ClassMask) and isinstance(truth, ClassMask):
        require_aligned(pred, truth, "prediction and truth")
    pr = _ids(pred).astype(np.int64)
    tr = _ids(truth).astype(np.int64)
    if pr.shape != tr.shape:
        raise ValueError(f"shape mismatch: {pr.shape} vs {tr.shape}")
    keep = (pr != MASK_NODATA) & (tr != MASK_NODATA)
    pr, tr = pr[keep], tr[keep]
    for name, a in (("prediction", pr), ("truth", tr)):
        if a.size and (a.min() < 0 or a.max() >= n_classes):
            raise ValueError(f"{name} ids outside 0..{n_classes - 1}")
    return np.bincount(tr * n_classes + pr, minlength=n_classes * n_classes).reshape(n_classes, n_classes)


def _check_matrix(m):
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"confusion matrix must be square, got {m.shape}")
    if m.sum() == 0:
        raise ValueError("empty confusion matrix")
    return m.astype(np.float64)


def class_accuracy(m):
    """Per-class pixel accuracy (recall); NaN for classes with no truth pixels."""
    m = _check_matrix(m)
    rows = m.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(rows > 0, np.diag(m) / rows, np.nan)


def class_iou(m):
    """Per-class IoU; NaN for classes absent from both truth and prediction."""
    m = _check_matrix(m)
    union = m.sum(axis=1) + m.sum(axis=0) - np.diag(m)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(union > 0, np.diag(m) / union, np.nan)


def mpa(m):
    acc = class_accuracy(m)
    return float(np.mean(acc[~np.isnan(acc)]))


def miou(m):
    iou = class_iou(m)
    return float(np.mean(iou[~np.isnan(iou)]))


def shapeconv_decompose(patch):
    """Split a (K, K, C) patch into per-channel mean and residual.

    The mean is taken relative to the first cell, so a constant patch gives
    a residual of exactly zero.
    """
    patch = np.asarray(patch, dtype=np.float64)
    ref = patch[0, 0]
    base = ref + (patch - ref).mean(axis=(0, 1))
    return base, patch - base


def shapeconv_forward(patch, kernel, w_base, w_shape):
    """Single-window ShapeConv output, one value per output channel.

    ``patch`` is (K, K, C_in) and ``kernel`` (K, K, C_in, C_out). The patch
    splits into its per-channel spatial mean (base) and the residual
    (shape); these are reweighted by ``w_base`` (per channel) and
    ``w_shape`` (per spatial position), recombined and convolved.
    """
    patch = np.asarray(patch, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if patch.ndim != 3 or patch.shape[0] != patch.shape[1]:
        raise ValueError(f"patch must be (K, K, C_in), got {patch.shape}")
    k, _, cin = patch.shape
    if k % 2 == 0:
        raise ValueError(f"kernel size must be odd, got {k}")
    if kernel.ndim != 4 or kernel.shape[:3] != patch.shape:
        raise ValueError(f"kernel must be (K, K, C_in, C_out) matching patch {patch.shape}, got {kernel.shape}")
    try:
        wb = np.broadcast_to(np.asarray(w_base, dtype=np.float64), (cin,))
        ws = np.broadcast_to(np.asarray(w_shape, dtype=np.float64), (k, k))
    except ValueError:
        raise ValueError(f"w_base must broadcast to ({cin},) and w_shape to ({k}, {k})") from None
    if not (np.isfinite(kernel).all() and np.isfinite(wb).all() and np.isfinite(ws).all()):
        raise ValueError("non-finite weights")
    base, shape = shapeconv_decompose(patch)
    reweighted = wb * base + ws[:, :, None] * shape
    return np.einsum("ijc,ijco->o", reweighted, kernel)


def conv_forward(patch, kernel):
    """Plain single-window convolution, for comparison with ShapeConv."""
    return np.einsum("ijc,ijco->o", np.asarray(patch, float), np.asarray(kernel, float))
