"""Quaternion helpers. Convention: (w, x, y, z), scalar first."""

import numpy as np

from .errors import InvalidQuaternion


def normalize(q):
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q)
    if not np.isfinite(n) or n < 1e-12:
        raise InvalidQuaternion(f"cannot normalize quaternion with norm {n}")
    return q / n


def to_rotmat(q):
    """Unit quaternion -> 3x3 rotation matrix (input normalized defensively)."""
    w, x, y, z = normalize(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def to_rotmat_batch(q):
    """(N,4) unit quaternions -> (N,3,3) rotation matrices."""
    q = np.asarray(q, dtype=np.float64)
    n = np.linalg.norm(q, axis=1, keepdims=True)
    q = q / n
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    R = np.empty((q.shape[0], 3, 3))
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - w * z)
    R[:, 0, 2] = 2 * (x * z + w * y)
    R[:, 1, 0] = 2 * (x * y + w * z)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - w * x)
    R[:, 2, 0] = 2 * (x * z - w * y)
    R[:, 2, 1] = 2 * (y * z + w * x)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def from_rotmat(R):
    """3x3 rotation matrix -> unit quaternion with w >= 0 (Shepperd's method)."""
    R = np.asarray(R, dtype=np.float64)
    t = np.trace(R)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (R[2, 1] - R[1, 2]) / s,
                      (R[0, 2] - R[2, 0]) / s,
                      (R[1, 0] - R[0, 1]) / s])
    elif R[0, 0] >= R[1, 1] and R[0, 0] >= R[2, 2]:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q = np.array([(R[2, 1] - R[1, 2]) / s,
                      0.25 * s,
                      (R[0, 1] + R[1, 0]) / s,
                      (R[0, 2] + R[2, 0]) / s])
    elif R[1, 1] >= R[2, 2]:
        s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q = np.array([(R[0, 2] - R[2, 0]) / s,
                      (R[0, 1] + R[1, 0]) / s,
                      0.25 * s,
                      (R[1, 2] + R[2, 1]) / s])
    else:
        s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q = np.array([(R[1, 0] - R[0, 1]) / s,
                      (R[0, 2] + R[2, 0]) / s,
                      (R[1, 2] + R[2, 1]) / s,
                      0.25 * s])
    if q[0] < 0:
        q = -q
    return normalize(q)


def from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        return np.array([1.0, 0.0, 0.0, 0.0])
    h = 0.5 * angle
    return np.concatenate([[np.cos(h)], np.sin(h) * axis / n])


def rotmat_grad_wrt_quat(q_unit):
    """d(rotation matrix)/d(unit quaternion component): array (4, 3, 3)."""
    return rotmat_grad_wrt_quat_batch(np.asarray(q_unit)[None])[0]


def rotmat_grad_wrt_quat_batch(q_unit):
    """(N,4) unit quaternions -> (N,4,3,3) rotation-matrix Jacobians."""
    q = np.asarray(q_unit, dtype=np.float64)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    zero = np.zeros_like(w)
    d = np.empty((q.shape[0], 4, 3, 3))
    d[:, 0, 0], d[:, 0, 1], d[:, 0, 2] = (
        np.stack([zero, -z, y], 1), np.stack([z, zero, -x], 1), np.stack([-y, x, zero], 1),
    )
    d[:, 1, 0], d[:, 1, 1], d[:, 1, 2] = (
        np.stack([zero, y, z], 1), np.stack([y, -2 * x, -w], 1), np.stack([z, w, -2 * x], 1),
    )
    d[:, 2, 0], d[:, 2, 1], d[:, 2, 2] = (
        np.stack([-2 * y, x, w], 1), np.stack([x, zero, z], 1), np.stack([-w, z, -2 * y], 1),
    )
    d[:, 3, 0], d[:, 3, 1], d[:, 3, 2] = (
        np.stack([-2 * z, -w, x], 1), np.stack([w, -2 * z, y], 1), np.stack([x, y, zero], 1),
    )
    return 2.0 * d
