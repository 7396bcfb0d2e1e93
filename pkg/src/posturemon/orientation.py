"""Quaternion and direction-cosine math for the thoracic angle.

Conventions
-----------
Quaternions are scalar-first, ``(b0, b1, b2, b3) = (w, x, y, z)``, and
describe the sensor (body) attitude relative to an Earth-fixed world frame:
the active rotation taking body vectors into the world frame is
``v_world = q * v_body * conj(q)``.

The DCM returned by :func:`quat_to_dcm` is the *world-to-body* matrix ``C``
(``v_body = C @ v_world``), i.e. the transpose of the active rotation::

    | w²+x²-y²-z²   2(xy+wz)      2(xz-wy)    |
    | 2(xy-wz)      w²-x²+y²-z²   2(yz+wx)    |
    | 2(xz+wy)      2(yz-wx)      w²-x²-y²+z² |

This is the matrix commonly printed for AHRS output. Some printings show the
(1,2) and (2,1) entries with the same sign; that is a typo (the result would
not be orthogonal) and the signs above are the correct ones.

The third column ``N = C @ (0, 0, 1)`` is the world vertical seen from the
sensor, which is what the accelerometer measures at rest. It is called the
sensor normal here. Its tilt between two instants is the thoracic angle, and
it is unchanged by any rotation about the world vertical (yaw).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonUnitInput, NotNormalized, ZeroNormQuaternion

NORM_EPS = 1e-12
UNIT_TOL = 1e-6
GIMBAL_LOCK_PITCH_DEG = 89.9


@dataclass(frozen=True, slots=True)
class Quaternion:
    """Scalar-first quaternion ``b0 + b1 i + b2 j + b3 k``."""

    b0: float
    b1: float
    b2: float
    b3: float

    @classmethod
    def identity(cls) -> Quaternion:
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_axis_angle(cls, axis, angle_deg: float) -> Quaternion:
        ax = np.asarray(axis, dtype=float)
        ax = ax / np.linalg.norm(ax)
        half = math.radians(angle_deg) / 2.0
        s = math.sin(half)
        return cls(math.cos(half), s * ax[0], s * ax[1], s * ax[2])

    def as_array(self) -> np.ndarray:
        return np.array([self.b0, self.b1, self.b2, self.b3])

    def norm(self) -> float:
        return math.sqrt(self.b0**2 + self.b1**2 + self.b2**2 + self.b3**2)

    def conjugate(self) -> Quaternion:
        return Quaternion(self.b0, -self.b1, -self.b2, -self.b3)

    def __neg__(self) -> Quaternion:
        return Quaternion(-self.b0, -self.b1, -self.b2, -self.b3)

    def __mul__(self, other: Quaternion) -> Quaternion:
        """Hamilton product ``self ⊗ other``."""
        a0, a1, a2, a3 = self.b0, self.b1, self.b2, self.b3
        c0, c1, c2, c3 = other.b0, other.b1, other.b2, other.b3
        return Quaternion(
            a0 * c0 - a1 * c1 - a2 * c2 - a3 * c3,
            a0 * c1 + a1 * c0 + a2 * c3 - a3 * c2,
            a0 * c2 - a1 * c3 + a2 * c0 + a3 * c1,
            a0 * c3 + a1 * c2 - a2 * c1 + a3 * c0,
        )


@dataclass(frozen=True, slots=True)
class EulerAngles:
    """Z-Y-X (yaw, pitch, roll) angles in degrees."""

    roll: float
    pitch: float
    yaw: float
    gimbal_lock: bool


def normalize(q: Quaternion) -> Quaternion:
    n = q.norm()
    if not n > NORM_EPS:
        raise ZeroNormQuaternion(f"cannot normalize quaternion with norm {n:g}")
    return Quaternion(q.b0 / n, q.b1 / n, q.b2 / n, q.b3 / n)


def _check_unit(q: Quaternion) -> None:
    n = q.norm()
    if abs(n - 1.0) > UNIT_TOL:
        raise NotNormalized(f"quaternion norm {n:.9g} is not 1")


def quat_to_dcm(q: Quaternion) -> np.ndarray:
    """World-to-body direction cosine matrix (3x3, row-major).

    Entries are divided by the squared norm (the homogeneous form), so a
    quaternion that is unit only to rounding still yields an exact rotation:
    a pure yaw gives a third column of exactly (0, 0, 1).
    """
    _check_unit(q)
    w, x, y, z = q.b0, q.b1, q.b2, q.b3
    ww, xx, yy, zz = w * w, x * x, y * y, z * z
    s = ww + xx + yy + zz
    return np.array(
        [
            [ww + xx - yy - zz, 2.0 * (x * y + w * z), 2.0 * (x * z - w * y)],
            [2.0 * (x * y - w * z), ww - xx + yy - zz, 2.0 * (y * z + w * x)],
            [2.0 * (x * z + w * y), 2.0 * (y * z - w * x), ww - xx - yy + zz],
        ]
    ) / s


def sensor_normal(q: Quaternion) -> np.ndarray:
    """Third DCM column: the world vertical expressed in the sensor frame."""
    _check_unit(q)
    w, x, y, z = q.b0, q.b1, q.b2, q.b3
    ww, xx, yy, zz = w * w, x * x, y * y, z * z
    return np.array(
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            ww - xx - yy + zz,
        ]
    ) / (ww + xx + yy + zz)


def sensor_normals(quats: np.ndarray) -> np.ndarray:
    """Vectorised :func:`sensor_normal` for an ``(n, 4)`` array, no checks."""
    q = np.asarray(quats, dtype=float)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    ww, xx, yy, zz = w * w, x * x, y * y, z * z
    return np.column_stack(
        (
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            ww - xx - yy + zz,
        )
    ) / (ww + xx + yy + zz)[:, None]


def _check_unit_vec(v: np.ndarray, name: str) -> None:
    m = float(np.linalg.norm(v))
    if abs(m - 1.0) > UNIT_TOL:
        raise NonUnitInput(f"{name} has magnitude {m:.9g}, expected 1")


def thoracic_angle(n_ref, n_cur) -> float:
    """Angle in degrees between the calibrated and current sensor normals."""
    r = np.asarray(n_ref, dtype=float)
    c = np.asarray(n_cur, dtype=float)
    _check_unit_vec(r, "n_ref")
    _check_unit_vec(c, "n_cur")
    dot = r[0] * c[0] + r[1] * c[1] + r[2] * c[2]
    return float(np.degrees(np.arccos(np.clip(dot, -1.0, 1.0))))


def thoracic_angles(n_ref, normals: np.ndarray) -> np.ndarray:
    """Vectorised :func:`thoracic_angle` of many normals against one reference.

    Uses the same elementwise arithmetic as the scalar form so both paths
    produce bit-identical angles.
    """
    r = np.asarray(n_ref, dtype=float)
    n = np.asarray(normals, dtype=float)
    _check_unit_vec(r, "n_ref")
    if len(n):
        mags = np.sqrt(np.einsum("ij,ij->i", n, n))
        bad = np.flatnonzero(np.abs(mags - 1.0) > UNIT_TOL)
        if bad.size:
            raise NonUnitInput(f"normal {bad[0]} has magnitude {mags[bad[0]]:.9g}")
    dot = n[:, 0] * r[0] + n[:, 1] * r[1] + n[:, 2] * r[2]
    return np.degrees(np.arccos(np.clip(dot, -1.0, 1.0)))


def quat_to_euler(q: Quaternion) -> EulerAngles:
    """Z-Y-X Euler angles such that ``C = (Rz(yaw) Ry(pitch) Rx(roll))^T``."""
    _check_unit(q)
    w, x, y, z = q.b0, q.b1, q.b2, q.b3
    roll = math.atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
    s = max(-1.0, min(1.0, 2.0 * (w * y - z * x)))
    pitch = math.asin(s)
    yaw = math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))
    pitch_deg = math.degrees(pitch)
    return EulerAngles(
        roll=math.degrees(roll),
        pitch=pitch_deg,
        yaw=math.degrees(yaw),
        gimbal_lock=abs(pitch_deg) > GIMBAL_LOCK_PITCH_DEG,
    )


def yaw_quaternion(yaw_deg: float) -> Quaternion:
    """Rotation about the world vertical; left-multiply to yaw an attitude."""
    return Quaternion.from_axis_angle((0.0, 0.0, 1.0), yaw_deg)
