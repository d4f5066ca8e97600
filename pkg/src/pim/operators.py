"""Pointwise discrete operators and quadrature oracles.

Two discrete operators act on a vector of sample values u:

* ``apply_Lth``: the integral-kernel Laplacian
  L u(p_i) = (1/t) sum_j R_t(p_i, p_j) (u_i - u_j) V_j,
  which annihilates constants and has a nonnegative V-weighted quadratic
  form (see :func:`energy_identity`);
* ``apply_Kth``: L plus the boundary penalty
  (2/beta) sum_l Rbar_t(p_i, s_l) u_l A_l,
  the operator actually inverted by the solver.

The oracles evaluate the underlying integrals on a much finer cloud
(``oracle_Lt``, ``oracle_Kt``) or form the kernel-smoothed average
(``oracle_v``).  They exist to test the discrete operators against an
independent discretization, not for production use.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .kernel import KernelParams, KernelProfile, eval_Rbar_t, eval_Rt
from .pointcloud import PointCloud

__all__ = [
    "apply_Lth",
    "apply_Lth_all",
    "apply_Kth",
    "oracle_Lt",
    "oracle_Kt",
    "oracle_v",
    "energy_identity",
]


def _as_field(u, n: int) -> np.ndarray:
    u = np.asarray(u, dtype=float).ravel()
    if u.shape != (n,):
        raise ValueError(f"field length {u.shape[0]} != cloud size {n}")
    return u


def apply_Lth(cloud: PointCloud, params: KernelParams, profile: KernelProfile,
              u, i: int) -> float:
    """Integral-kernel Laplacian of the sample vector u at point i.

    The sum formally runs over all points; entries beyond the support
    radius 2*sqrt(t) are exactly zero, so this equals the neighbor-set sum.
    """
    u = _as_field(u, cloud.n)
    rt = eval_Rt(cloud.points[i], cloud.points, params, profile)
    return float(np.sum(rt * (u[i] - u) * cloud.volume_weights) / params.t)


def apply_Lth_all(cloud: PointCloud, params: KernelParams,
                  profile: KernelProfile, u) -> np.ndarray:
    """Vector of apply_Lth values at every sample point (dense pairwise)."""
    u = _as_field(u, cloud.n)
    rt = eval_Rt(cloud.points[:, None, :], cloud.points[None, :, :],
                 params, profile)                     # (n, n)
    du = u[:, None] - u[None, :]
    return (rt * du * cloud.volume_weights[None, :]).sum(axis=1) / params.t


def _boundary_sum(cloud: PointCloud, params: KernelParams,
                  profile: KernelProfile, beta: float,
                  values_on_S: np.ndarray, i: int) -> float:
    sb = cloud.points[cloud.boundary_indices]
    rbar = eval_Rbar_t(cloud.points[i], sb, params, profile)
    return float((2.0 / beta) * np.sum(rbar * values_on_S * cloud.area_weights))


def apply_Kth(cloud: PointCloud, params: KernelParams, profile: KernelProfile,
              beta: float, u, i: int) -> float:
    """apply_Lth plus the (2/beta)-weighted boundary penalty at point i."""
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    u = _as_field(u, cloud.n)
    return apply_Lth(cloud, params, profile, u, i) + _boundary_sum(
        cloud, params, profile, beta, u[cloud.boundary_indices], i)


def oracle_Lt(u_fn: Callable[[np.ndarray], np.ndarray], x, fine_cloud: PointCloud,
              params: KernelParams, profile: KernelProfile) -> float:
    """Continuous integral Laplacian at x, quadratured on a fine cloud.

    L u(x) = (1/t) int R_t(x, y) (u(x) - u(y)) dmu_y.  ``u_fn`` maps an
    (m, d) array of points to m values.  The fine cloud should be much
    denser (8x by default elsewhere) than whatever is being tested.
    """
    x = np.asarray(x, dtype=float).ravel()
    rt = eval_Rt(x, fine_cloud.points, params, profile)
    ux = float(u_fn(x[None, :])[0])
    uy = np.asarray(u_fn(fine_cloud.points), dtype=float)
    return float(np.sum(rt * (ux - uy) * fine_cloud.volume_weights) / params.t)


def oracle_Kt(u_fn: Callable[[np.ndarray], np.ndarray], x, fine_cloud: PointCloud,
              params: KernelParams, profile: KernelProfile, beta: float) -> float:
    """oracle_Lt plus the continuous boundary penalty, fine-cloud quadrature."""
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    x = np.asarray(x, dtype=float).ravel()
    sb = fine_cloud.points[fine_cloud.boundary_indices]
    rbar = eval_Rbar_t(x, sb, params, profile)
    u_s = np.asarray(u_fn(sb), dtype=float)
    bnd = (2.0 / beta) * np.sum(rbar * u_s * fine_cloud.area_weights)
    return oracle_Lt(u_fn, x, fine_cloud, params, profile) + float(bnd)


def oracle_v(u_values, x, cloud: PointCloud, params: KernelParams,
             profile: KernelProfile) -> float:
    """Kernel-smoothed average of sampled values at x.

    v(x) = sum_j R_t(x, p_j) u_j V_j / sum_j R_t(x, p_j) V_j.  A convex
    combination of the u_j, so min(u) <= v(x) <= max(u).
    """
    u_values = _as_field(u_values, cloud.n)
    x = np.asarray(x, dtype=float).ravel()
    rt = eval_Rt(x, cloud.points, params, profile)
    w = float(np.sum(rt * cloud.volume_weights))
    if w <= 0.0:
        raise ValueError("x is outside the kernel support of every sample")
    return float(np.sum(rt * u_values * cloud.volume_weights) / w)


def energy_identity(cloud: PointCloud, params: KernelParams,
                    profile: KernelProfile, u) -> tuple[float, float]:
    """Both sides of the weighted quadratic-form identity.

    Returns (lhs, rhs) with
      lhs = sum_i V_i u_i (L u)(p_i),
      rhs = (1/2t) sum_{i,j} R_t(p_i, p_j) (u_i - u_j)^2 V_i V_j,
    computed by independent routes.  Mathematically lhs == rhs >= 0: expand
    the rhs square and use the symmetry R_t(p_i,p_j) = R_t(p_j,p_i).
    """
    u = _as_field(u, cloud.n)
    lu = apply_Lth_all(cloud, params, profile, u)
    lhs = float(np.sum(cloud.volume_weights * u * lu))
    rt = eval_Rt(cloud.points[:, None, :], cloud.points[None, :, :],
                 params, profile)
    du2 = (u[:, None] - u[None, :]) ** 2
    vv = cloud.volume_weights[:, None] * cloud.volume_weights[None, :]
    rhs = float(np.sum(rt * du2 * vv) / (2.0 * params.t))
    return lhs, rhs
