"""Semantic-weighting gate numerics: forward, analytic backward, baselines.

The gate fuses a semantic decoder map f_sem (H x W x C) with a detection
decoder map f_od (H x W x D):

    h_sem = sigmoid(W1_sem f_sem + b1_sem)      per spatial site, K dims
    h_od  = sigmoid(W1_od  f_od  + b1_od)
    m     = h_sem * h_od                        element-wise match
    w     = sigmoid(mean_hw(batchnorm(conv1x1(m))))   per-channel gate in (0,1)^C
    fused = concat(f_od, w * f_sem)             along channels

Batch norm runs in inference-affine mode (fixed running statistics) so the
whole module is a pure function. Everything is float64; analytic gradients
are verified against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import json
import numpy as np
from scipy.special import expit

from .bev_raster import read_container, write_container
from .errors import (
    MissingCacheError,
    NonFiniteActivationError,
    NonFiniteValueError,
    ShapeMismatchError,
)

FEATURE_KINDS = ("semantic", "detection")


def _as_f64(name, arr, shape=None) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    if shape is not None and out.shape != shape:
        raise ShapeMismatchError(f"{name} has shape {out.shape}, expected {shape}")
    if not np.isfinite(out).all():
        raise NonFiniteValueError(f"{name} contains NaN/Inf")
    return out


@dataclass(frozen=True)
class FeatureMap:
    """Dense H x W x C activation map tagged with its source branch."""

    data: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise ValueError(f"kind must be one of {FEATURE_KINDS}")
        data = _as_f64("feature map", self.data)
        if data.ndim != 3:
            raise ShapeMismatchError("feature map must be H x W x C")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)


@dataclass(frozen=True)
class SwagParams:
    """Projection, gate-conv, and batch-norm parameters.

    Shapes: w1_sem (K, C), b1_sem (K,), w1_od (K, D), b1_od (K,),
    conv_w (C, K); the batch-norm vectors are all (C,) with running_var > 0.
    """

    w1_sem: np.ndarray
    b1_sem: np.ndarray
    w1_od: np.ndarray
    b1_od: np.ndarray
    conv_w: np.ndarray
    bn_gamma: np.ndarray
    bn_beta: np.ndarray
    bn_mean: np.ndarray
    bn_var: np.ndarray
    bn_eps: float = 1e-5

    def __post_init__(self):
        k, c = np.shape(self.w1_sem)
        d = np.shape(self.w1_od)[1]
        spec = {
            "w1_sem": (k, c), "b1_sem": (k,), "w1_od": (k, d), "b1_od": (k,),
            "conv_w": (c, k), "bn_gamma": (c,), "bn_beta": (c,),
            "bn_mean": (c,), "bn_var": (c,),
        }
        for name, shape in spec.items():
            arr = _as_f64(name, getattr(self, name), shape)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if np.any(self.bn_var <= 0.0):
            raise ValueError("running variance must be positive")

    @property
    def k_dim(self) -> int:
        return self.w1_sem.shape[0]

    @property
    def c_sem(self) -> int:
        return self.w1_sem.shape[1]

    @property
    def d_od(self) -> int:
        return self.w1_od.shape[1]

    @classmethod
    def random(cls, rng: np.random.Generator, c_sem: int, d_od: int, k: int) -> "SwagParams":
        """Small random instance for tests and self-checks."""
        return cls(
            w1_sem=rng.normal(0.0, 0.5, (k, c_sem)),
            b1_sem=rng.normal(0.0, 0.5, k),
            w1_od=rng.normal(0.0, 0.5, (k, d_od)),
            b1_od=rng.normal(0.0, 0.5, k),
            conv_w=rng.normal(0.0, 0.5, (c_sem, k)),
            bn_gamma=rng.uniform(0.5, 1.5, c_sem),
            bn_beta=rng.normal(0.0, 0.5, c_sem),
            bn_mean=rng.normal(0.0, 0.5, c_sem),
            bn_var=rng.uniform(0.5, 2.0, c_sem),
        )


@dataclass
class SwagOutput:
    """Forward results plus cached intermediates for the backward pass."""

    match: np.ndarray    # (H, W, K)
    weights: np.ndarray  # (C,)
    fused: np.ndarray    # (H, W, D + C)
    cache: Optional[dict] = None


def swag_forward(f_sem: FeatureMap, f_od: FeatureMap, params: SwagParams,
                 force_gate: Optional[np.ndarray] = None) -> SwagOutput:
    """Evaluate the gate. ``force_gate`` overrides w for ablation runs.

    With force_gate of all ones the fused output equals the naive
    concatenation baseline exactly.
    """
    if f_sem.kind != "semantic" or f_od.kind != "detection":
        raise ValueError("expected (semantic, detection) feature maps")
    fs, fo = f_sem.data, f_od.data
    if fs.shape[:2] != fo.shape[:2]:
        raise ShapeMismatchError(
            f"spatial dims differ: {fs.shape[:2]} vs {fo.shape[:2]}"
        )
    if fs.shape[2] != params.c_sem or fo.shape[2] != params.d_od:
        raise ShapeMismatchError(
            f"channel dims ({fs.shape[2]}, {fo.shape[2]}) do not match params "
            f"({params.c_sem}, {params.d_od})"
        )

    h_sem = expit(np.einsum("hwc,kc->hwk", fs, params.w1_sem) + params.b1_sem)
    h_od = expit(np.einsum("hwd,kd->hwk", fo, params.w1_od) + params.b1_od)
    m = h_sem * h_od
    y = np.einsum("hwk,ck->hwc", m, params.conv_w)
    inv_std = 1.0 / np.sqrt(params.bn_var + params.bn_eps)
    g = params.bn_gamma * (y - params.bn_mean) * inv_std + params.bn_beta
    pooled = g.mean(axis=(0, 1))
    if force_gate is not None:
        w = _as_f64("force_gate", force_gate, (params.c_sem,))
    else:
        w = expit(pooled)
    f_prime = w * fs
    fused = np.concatenate([fo, f_prime], axis=2)
    if not np.isfinite(fused).all():
        raise NonFiniteActivationError("fused output contains NaN/Inf")
    cache = {
        "f_sem": fs, "f_od": fo, "h_sem": h_sem, "h_od": h_od, "m": m,
        "inv_std": inv_std, "w": w, "forced": force_gate is not None,
        "params": params,
    }
    return SwagOutput(match=m, weights=w, fused=fused, cache=cache)


@dataclass(frozen=True)
class SwagGrads:
    f_sem: np.ndarray
    f_od: np.ndarray
    w1_sem: np.ndarray
    b1_sem: np.ndarray
    w1_od: np.ndarray
    b1_od: np.ndarray
    conv_w: np.ndarray
    bn_gamma: np.ndarray
    bn_beta: np.ndarray


def swag_backward(out: SwagOutput, grad_fused: np.ndarray) -> SwagGrads:
    """Analytic gradients of sum(grad_fused * fused) w.r.t. inputs and params.

    Running batch-norm statistics are treated as constants (inference mode).
    When the forward gate was forced, the gate path contributes no gradient.
    """
    if out.cache is None:
        raise MissingCacheError("forward was run without cached intermediates")
    cache = out.cache
    p: SwagParams = cache["params"]
    fs, fo = cache["f_sem"], cache["f_od"]
    h_sem, h_od, m, w = cache["h_sem"], cache["h_od"], cache["m"], cache["w"]
    hh, ww = fs.shape[:2]
    d = fo.shape[2]
    grad_fused = _as_f64("grad_fused", grad_fused, out.fused.shape)

    d_fo = grad_fused[:, :, :d].copy()
    d_fprime = grad_fused[:, :, d:]

    # f' = w (broadcast) * f_sem
    d_fs = d_fprime * w
    if cache["forced"]:
        # Gate was overridden: nothing flows through the match/conv/bn path.
        d_m = np.zeros_like(m)
        d_conv_w = np.zeros((p.c_sem, p.k_dim))
        d_bn_gamma = np.zeros(p.c_sem)
        d_bn_beta = np.zeros(p.c_sem)
    else:
        d_w = np.einsum("hwc,hwc->c", d_fprime, fs)
        d_pooled = d_w * w * (1.0 - w)           # sigmoid
        d_g = np.broadcast_to(d_pooled / (hh * ww), (hh, ww, p.c_sem))  # mean over h,w
        d_y = d_g * (p.bn_gamma * cache["inv_std"])
        d_m = np.einsum("hwc,ck->hwk", d_y, p.conv_w)
        y = np.einsum("hwk,ck->hwc", m, p.conv_w)
        d_conv_w = np.einsum("hwc,hwk->ck", d_y, m)
        d_bn_gamma = np.einsum("hwc,hwc->c", d_g, (y - p.bn_mean) * cache["inv_std"])
        d_bn_beta = d_g.sum(axis=(0, 1))
    d_h_sem = d_m * h_od
    d_h_od = d_m * h_sem
    d_a_sem = d_h_sem * h_sem * (1.0 - h_sem)
    d_a_od = d_h_od * h_od * (1.0 - h_od)

    return SwagGrads(
        f_sem=d_fs + np.einsum("hwk,kc->hwc", d_a_sem, p.w1_sem),
        f_od=d_fo + np.einsum("hwk,kd->hwd", d_a_od, p.w1_od),
        w1_sem=np.einsum("hwk,hwc->kc", d_a_sem, fs),
        b1_sem=d_a_sem.sum(axis=(0, 1)),
        w1_od=np.einsum("hwk,hwd->kd", d_a_od, fo),
        b1_od=d_a_od.sum(axis=(0, 1)),
        conv_w=d_conv_w,
        bn_gamma=d_bn_gamma,
        bn_beta=d_bn_beta,
    )


def naive_concat_baseline(f_sem: FeatureMap, f_od: FeatureMap) -> np.ndarray:
    """Ablation baseline: unweighted channel concatenation concat(f_od, f_sem)."""
    if f_sem.data.shape[:2] != f_od.data.shape[:2]:
        raise ShapeMismatchError(
            f"spatial dims differ: {f_sem.data.shape[:2]} vs {f_od.data.shape[:2]}"
        )
    return np.concatenate([f_od.data, f_sem.data], axis=2)


# --- verification ------------------------------------------------------------

_PARAM_FIELDS = ("w1_sem", "b1_sem", "w1_od", "b1_od", "conv_w", "bn_gamma", "bn_beta")


def _objective(fs, fo, params, grad_fused) -> float:
    out = swag_forward(FeatureMap(fs, "semantic"), FeatureMap(fo, "detection"), params)
    return float(np.sum(grad_fused * out.fused))


def finite_difference_check(c_sem: int, d_od: int, k: int, h: int, w: int,
                            seed: int, step: float = 1e-5) -> dict:
    """Compare analytic gradients against central finite differences.

    Perturbs every element of both feature maps and of every learnable
    parameter. Returns a report with the worst relative error, where the
    relative error of (a, n) is |a - n| / max(1, |a|, |n|).
    """
    rng = np.random.default_rng(seed)
    fs = rng.normal(0.0, 1.0, (h, w, c_sem))
    fo = rng.normal(0.0, 1.0, (h, w, d_od))
    params = SwagParams.random(rng, c_sem, d_od, k)
    out = swag_forward(FeatureMap(fs, "semantic"), FeatureMap(fo, "detection"), params)
    grad_fused = rng.normal(0.0, 1.0, out.fused.shape)
    grads = swag_backward(out, grad_fused)

    def replace_params(name, arr):
        vals = {f: getattr(params, f) for f in _PARAM_FIELDS}
        vals.update(bn_mean=params.bn_mean, bn_var=params.bn_var, bn_eps=params.bn_eps)
        vals[name] = arr
        return SwagParams(**vals)

    worst = 0.0
    n_checked = 0

    def check_block(analytic, base, evaluate):
        nonlocal worst, n_checked
        flat = base.ravel()
        for i in range(flat.size):
            orig = flat[i]
            pert = base.copy().ravel()
            pert[i] = orig + step
            hi = evaluate(pert.reshape(base.shape))
            pert[i] = orig - step
            lo = evaluate(pert.reshape(base.shape))
            numeric = (hi - lo) / (2.0 * step)
            a = float(analytic.ravel()[i])
            rel = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            worst = max(worst, rel)
            n_checked += 1

    check_block(grads.f_sem, fs, lambda v: _objective(v, fo, params, grad_fused))
    check_block(grads.f_od, fo, lambda v: _objective(fs, v, params, grad_fused))
    for name in _PARAM_FIELDS:
        check_block(getattr(grads, name), getattr(params, name),
                    lambda v, _n=name: _objective(fs, fo, replace_params(_n, v), grad_fused))

    return {"seed": seed, "shape": {"h": h, "w": w, "c_sem": c_sem, "d_od": d_od, "k": k},
            "step": step, "n_elements": n_checked, "max_rel_error": worst}


# --- parameter serialization --------------------------------------------------


def save_swag_params(params: SwagParams, directory) -> None:
    """One container file per tensor plus a manifest of names and shapes."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {"bn_eps": params.bn_eps, "tensors": []}
    for name in (*_PARAM_FIELDS, "bn_mean", "bn_var"):
        arr = getattr(params, name)
        rank3 = arr.reshape(arr.shape + (1,) * (3 - arr.ndim))
        write_container(directory / f"{name}.bevg", rank3, dtype_tag=2)
        manifest["tensors"].append({"name": name, "shape": list(arr.shape),
                                    "file": f"{name}.bevg"})
    with open(directory / "manifest.json", "w", encoding="ascii") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_swag_params(directory) -> SwagParams:
    directory = Path(directory)
    with open(directory / "manifest.json", "r", encoding="ascii") as fh:
        manifest = json.load(fh)
    tensors = {}
    for entry in manifest["tensors"]:
        arr = read_container(directory / entry["file"])
        tensors[entry["name"]] = arr.reshape(entry["shape"])
    return SwagParams(bn_eps=manifest["bn_eps"], **tensors)
