"""Smooth reconstruction of the discrete solution.

Given sample values u solving the assembled system with source f and
boundary data b, the reconstruction at any point x inside the kernel
support of the cloud is the ratio

  I(x) = [ sum_j R_t(x,p_j) u_j V_j
           - (2t/beta) sum_l Rbar_t(x,s_l) (u_l - b_l) A_l
           + t sum_j Rbar_t(x,p_j) f_j V_j ] / sum_j R_t(x,p_j) V_j.

Rearranging row i of the linear system shows I(p_i) = u_i exactly — the
reconstruction interpolates the discrete solution — and I inherits the
kernel's smoothness, so ambient gradients follow from the quotient rule.
For clouds sampled from the unit sphere the gradient is projected onto the
analytic tangent plane (radial normal); clouds of unknown provenance get
the raw ambient gradient.

Evaluation is vectorized over query chunks and parallelized across a small
thread pool; the PIM_THREADS environment variable caps the worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .kernel import KernelParams, KernelProfile
from .pointcloud import PointCloud

__all__ = ["Interpolant", "OutOfSupport", "eval_csv", "worker_count"]

CHUNK = 256  # query points per evaluation block


class OutOfSupport(ValueError):
    """Query point not covered by any sample's kernel support."""

    def __init__(self, point):
        self.point = np.asarray(point, dtype=float)
        super().__init__(
            f"point {self.point.tolist()} is beyond the support radius of every sample"
        )


def worker_count() -> int:
    """Thread-pool size: min(4, cpus), capped by PIM_THREADS if set."""
    cap = os.environ.get("PIM_THREADS")
    base = min(4, os.cpu_count() or 1)
    if cap is not None:
        try:
            base = min(base, max(1, int(cap)))
        except ValueError:
            pass
    return base


@dataclass
class Interpolant:
    """Reconstruction state: cloud, kernel, penalty weight and data vectors."""

    cloud: PointCloud
    params: KernelParams
    profile: KernelProfile
    beta: float
    u: np.ndarray
    f: np.ndarray
    b: np.ndarray
    _uS_minus_b: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.beta <= 0.0:
            raise ValueError("beta must be positive")
        n = self.cloud.n
        m = self.cloud.boundary_indices.shape[0]
        self.u = np.asarray(self.u, dtype=float).ravel()
        self.f = np.asarray(self.f, dtype=float).ravel()
        self.b = np.asarray(self.b, dtype=float).ravel()
        if self.u.shape != (n,):
            raise ValueError("u length mismatch")
        if self.f.shape != (n,):
            raise ValueError("f length mismatch")
        if self.b.shape != (m,):
            raise ValueError("b length mismatch")
        self._uS_minus_b = self.u[self.cloud.boundary_indices] - self.b

    # -- core chunk evaluation ------------------------------------------------

    def _chunk(self, X: np.ndarray, want_grad: bool):
        """Return (w, num) and, if requested, their gradients over a chunk."""
        cl, t = self.cloud, self.params.t
        c_t, beta = self.params.C_t, self.beta
        P = cl.points
        S = P[cl.boundary_indices]
        V = cl.volume_weights
        A = cl.area_weights
        prof = self.profile

        diff = X[:, None, :] - P[None, :, :]            # (c, n, d)
        s = np.einsum("cnd,cnd->cn", diff, diff) / (4.0 * t)
        rt = c_t * prof.R(s)
        rbar = c_t * prof.Rbar(s)
        diff_s = X[:, None, :] - S[None, :, :]          # (c, m, d)
        ss = np.einsum("cmd,cmd->cm", diff_s, diff_s) / (4.0 * t)
        rbar_s = c_t * prof.Rbar(ss)

        w = rt @ V
        num = (rt @ (self.u * V)
               - (2.0 * t / beta) * (rbar_s @ (self._uS_minus_b * A))
               + t * (rbar @ (self.f * V)))
        if not want_grad:
            return w, num, None, None

        # d/dx R_t = C_t R'(s) (x-y)/(2t);  d/dx Rbar_t = -R_t (x-y)/(2t)
        drt = (c_t / (2.0 * t)) * prof.Rprime(s)[:, :, None] * diff
        drbar = (-1.0 / (2.0 * t)) * rt[:, :, None] * diff
        rt_s = c_t * prof.R(ss)
        drbar_s = (-1.0 / (2.0 * t)) * rt_s[:, :, None] * diff_s

        gw = np.einsum("cnd,n->cd", drt, V)
        gnum = (np.einsum("cnd,n->cd", drt, self.u * V)
                - (2.0 * t / beta) * np.einsum("cmd,m->cd", drbar_s,
                                               self._uS_minus_b * A)
                + t * np.einsum("cnd,n->cd", drbar, self.f * V))
        return w, num, gw, gnum

    def _run(self, X: np.ndarray, want_grad: bool):
        X = np.ascontiguousarray(np.atleast_2d(X), dtype=float)
        if X.shape[1] != self.cloud.ambient_dim:
            raise ValueError(
                f"query dimension {X.shape[1]} != ambient {self.cloud.ambient_dim}")
        q = X.shape[0]
        vals = np.empty(q)
        grads = np.empty((q, X.shape[1])) if want_grad else None

        def work(lo: int, hi: int):
            w, num, gw, gnum = self._chunk(X[lo:hi], want_grad)
            bad = np.flatnonzero(w <= 0.0)
            if bad.size:
                raise OutOfSupport(X[lo + bad[0]])
            vals[lo:hi] = num / w
            if want_grad:
                grads[lo:hi] = (gnum * w[:, None] - num[:, None] * gw) / (w * w)[:, None]

        spans = [(lo, min(lo + CHUNK, q)) for lo in range(0, q, CHUNK)]
        nw = worker_count()
        if nw <= 1 or len(spans) <= 1:
            for lo, hi in spans:
                work(lo, hi)
        else:
            with ThreadPoolExecutor(max_workers=nw) as pool:
                futures = [pool.submit(work, lo, hi) for lo, hi in spans]
                for fut in futures:
                    fut.result()
        return vals, grads

    # -- public API -----------------------------------------------------------

    def weight(self, X) -> np.ndarray:
        """Denominator w(x) = sum_j R_t(x, p_j) V_j for each query point."""
        X = np.ascontiguousarray(np.atleast_2d(X), dtype=float)
        out = np.empty(X.shape[0])
        for lo in range(0, X.shape[0], CHUNK):
            hi = min(lo + CHUNK, X.shape[0])
            w, _, _, _ = self._chunk(X[lo:hi], False)
            out[lo:hi] = w
        return out

    def eval_many(self, X) -> np.ndarray:
        vals, _ = self._run(X, want_grad=False)
        return vals

    def eval(self, x) -> float:
        return float(self.eval_many(np.asarray(x, dtype=float).reshape(1, -1))[0])

    def _project(self, X: np.ndarray, G: np.ndarray, project: str) -> np.ndarray:
        if project == "none":
            return G
        shape = self.cloud.metadata.get("shape")
        if project == "auto" and shape != "spherical_cap":
            return G
        # tangent-plane projection with the analytic radial normal
        nrm = X / np.linalg.norm(X, axis=1, keepdims=True)
        return G - np.einsum("qd,qd->q", G, nrm)[:, None] * nrm

    def grad_many(self, X, project: str = "auto") -> np.ndarray:
        if project not in ("auto", "none", "sphere"):
            raise ValueError(f"unknown projection mode {project!r}")
        X = np.ascontiguousarray(np.atleast_2d(X), dtype=float)
        _, grads = self._run(X, want_grad=True)
        return self._project(X, grads, project)

    def grad(self, x, project: str = "auto") -> np.ndarray:
        return self.grad_many(np.asarray(x, dtype=float).reshape(1, -1), project)[0]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def eval_csv(interp: Interpolant, in_path, out_path) -> int:
    """Evaluate value and gradient at query points from a CSV file.

    Input: optional header, then one point per row (d comma-separated
    coordinates).  Output columns: x1..xd, value, grad_x1..grad_xd.
    Returns the number of points evaluated.
    """
    d = interp.cloud.ambient_dim
    rows = []
    with open(in_path) as fh:
        for lineno, ln in enumerate(fh, start=1):
            stripped = ln.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = [c.strip() for c in stripped.split(",")]
            if len(parts) < d:
                raise ValueError(f"line {lineno}: expected {d} coordinates")
            try:
                rows.append([float(c) for c in parts[:d]])
            except ValueError:
                if not rows:
                    continue  # header row
                raise ValueError(f"line {lineno}: non-numeric coordinate") from None
    X = np.array(rows, dtype=float).reshape(-1, d)
    vals = interp.eval_many(X)
    grads = interp.grad_many(X)
    header = [f"x{i + 1}" for i in range(d)] + ["value"] + \
        [f"grad_x{i + 1}" for i in range(d)]
    with open(out_path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(X.shape[0]):
            cells = [_fmt(c) for c in X[i]] + [_fmt(vals[i])] + \
                [_fmt(g) for g in grads[i]]
            fh.write(",".join(cells) + "\n")
    return X.shape[0]
