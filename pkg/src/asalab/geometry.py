"""Rigid-body pose algebra for the egocentric pipeline.

Conventions: right-handed frames, x forward / y left / z up; matrices act on
column vectors; yaw angles wrapped to (-pi, pi].  The composite head pose of
the wheeled platform is Rot_z(chassis_yaw + head_yaw) . Rot_y(head_pitch)
with translation (x, y, z_fixed); pitch > 0 looks down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput, EmptyEpisode, InvalidPose, UnreachableTarget

_ORTHO_TOL = 1e-9


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass
class Rotation:
    """A 3x3 rotation matrix (row-major), orthonormal with determinant +1."""

    matrix: np.ndarray

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(np.eye(3))

    @classmethod
    def from_matrix(cls, m, check: bool = True) -> "Rotation":
        m = np.asarray(m, dtype=float)
        r = cls(m)
        if check and not r.is_valid():
            raise InvalidPose("matrix is not a rotation")
        return r

    def is_valid(self, tol: float = 1e-8) -> bool:
        m = self.matrix
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            return False
        return (
            np.allclose(m.T @ m, np.eye(3), atol=tol)
            and abs(np.linalg.det(m) - 1.0) <= tol
        )

    def compose(self, other: "Rotation") -> "Rotation":
        return Rotation(self.matrix @ other.matrix)

    def inverse(self) -> "Rotation":
        return Rotation(self.matrix.T)

    def apply(self, v) -> np.ndarray:
        return self.matrix @ np.asarray(v, dtype=float)

    def angle_to(self, other: "Rotation") -> float:
        """Geodesic angle between two rotations, radians."""
        c = (np.trace(self.matrix.T @ other.matrix) - 1.0) / 2.0
        return math.acos(min(1.0, max(-1.0, c)))


@dataclass
class Pose:
    """Rigid transform: rotation plus translation in meters."""

    rotation: Rotation
    translation: np.ndarray

    @classmethod
    def identity(cls) -> "Pose":
        return cls(Rotation.identity(), np.zeros(3))

    @classmethod
    def from_parts(cls, matrix, translation, check: bool = True) -> "Pose":
        t = np.asarray(translation, dtype=float)
        if check and (t.shape != (3,) or not np.all(np.isfinite(t))):
            raise InvalidPose("translation must be a finite 3-vector")
        return cls(Rotation.from_matrix(matrix, check=check), t)

    def is_valid(self, tol: float = 1e-8) -> bool:
        return (
            self.rotation.is_valid(tol)
            and self.translation.shape == (3,)
            and bool(np.all(np.isfinite(self.translation)))
        )

    def compose(self, other: "Pose") -> "Pose":
        return Pose(
            self.rotation.compose(other.rotation),
            self.rotation.apply(other.translation) + self.translation,
        )

    def inverse(self) -> "Pose":
        rinv = self.rotation.inverse()
        return Pose(rinv, -rinv.apply(self.translation))

    def transform_point(self, p) -> np.ndarray:
        return self.rotation.apply(p) + self.translation

    def almost_equal(self, other: "Pose", tol: float = 1e-9) -> bool:
        return (
            np.allclose(self.rotation.matrix, other.rotation.matrix, atol=tol)
            and np.allclose(self.translation, other.translation, atol=tol)
        )


def random_rotation(rng: np.random.Generator) -> Rotation:
    """Uniform-ish random rotation via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 2] = -q[:, 2]
    return Rotation(q)


def random_pose(rng: np.random.Generator, radius: float = 2.0) -> Pose:
    return Pose(random_rotation(rng), rng.uniform(-radius, radius, size=3))


# ---------------------------------------------------------------------------
# 6D rotation codec: the first two matrix columns, decoded by Gram-Schmidt.
# ---------------------------------------------------------------------------

def rot6d_encode(r: Rotation) -> np.ndarray:
    """First two columns of the matrix, column order, as a 6-vector."""
    m = r.matrix
    return np.concatenate([m[:, 0], m[:, 1]])


def rot6d_decode(v) -> Rotation:
    """Rebuild an orthonormal right-handed rotation from two embedded columns.

    Raises DegenerateInput when the columns are too short or near-parallel
    (angle between them <= 1e-6 rad) to orthonormalize.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (6,):
        raise DegenerateInput(f"expected 6 values, got shape {v.shape}")
    c0, c1 = v[:3], v[3:]
    n0 = np.linalg.norm(c0)
    if n0 < 1e-9 or not np.all(np.isfinite(v)):
        raise DegenerateInput("first column has (near-)zero length")
    b0 = c0 / n0
    y = c1 - np.dot(b0, c1) * b0
    n1 = np.linalg.norm(y)
    # sin(angle) between the columns; reject below ~1e-6 rad
    if np.linalg.norm(c1) < 1e-9 or n1 / np.linalg.norm(c1) < 1e-6:
        raise DegenerateInput("columns are (near-)parallel")
    b1 = y / n1
    b2 = np.cross(b0, b1)
    return Rotation(np.stack([b0, b1, b2], axis=1))


def rot6d_renormalize(v) -> np.ndarray:
    """Project a noisy 6-vector back onto the valid codec range."""
    return rot6d_encode(rot6d_decode(v))


# ---------------------------------------------------------------------------
# Platform state and mount calibration.
# ---------------------------------------------------------------------------

@dataclass
class ChassisState:
    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        self.yaw = wrap_angle(self.yaw)


@dataclass
class HeadState:
    pitch: float = 0.0
    yaw: float = 0.0


@dataclass
class MountCalibration:
    """Fixed source-to-local-frame transforms plus the constant head height."""

    head: Pose = field(default_factory=Pose.identity)
    left: Pose = field(default_factory=Pose.identity)
    right: Pose = field(default_factory=Pose.identity)
    z_fixed: float = 1.4

    def for_source(self, name: str) -> Pose:
        return {"H": self.head, "L": self.left, "R": self.right}[name]


def aggregate_head(chassis: ChassisState, head: HeadState,
                   calib: MountCalibration) -> Pose:
    """Composite head pose: chassis yaw + gimbal angles at constant height."""
    r = rot_z(chassis.yaw + head.yaw) @ rot_y(head.pitch)
    t = np.array([chassis.x, chassis.y, calib.z_fixed])
    return Pose(Rotation(r), t)


def decompose_head(target: Pose, current_chassis: ChassisState,
                   current_head: HeadState, calib: MountCalibration,
                   eps_xy: float = 0.05, yaw_trigger: float = 0.7,
                   pitch_limits=(-1.1, 1.1), yaw_limits=(-1.6, 1.6),
                   ) -> tuple[ChassisState, HeadState]:
    """Split a composite head-pose target into chassis and gimbal targets.

    The chassis takes over when the target needs planar translation beyond
    eps_xy, when the composite yaw deviates by more than yaw_trigger, or when
    the residual head yaw would leave the gimbal range; otherwise the chassis
    stays and the gimbal realizes the pose alone.
    """
    x_axis = target.rotation.matrix[:, 0]
    pitch = math.asin(min(1.0, max(-1.0, -float(x_axis[2]))))
    if pitch < pitch_limits[0] or pitch > pitch_limits[1]:
        raise UnreachableTarget(f"pitch {pitch:.3f} outside {pitch_limits}")
    psi_total = math.atan2(float(x_axis[1]), float(x_axis[0]))

    dx = float(target.translation[0]) - current_chassis.x
    dy = float(target.translation[1]) - current_chassis.y
    d_xy = math.hypot(dx, dy)
    current_yaw = current_chassis.yaw + current_head.yaw
    yaw_dev = abs(wrap_angle(psi_total - current_yaw))
    head_yaw_residual = wrap_angle(psi_total - current_chassis.yaw)
    needs_chassis = (
        d_xy > eps_xy
        or yaw_dev > yaw_trigger
        or not (yaw_limits[0] <= head_yaw_residual <= yaw_limits[1])
    )
    if needs_chassis:
        chassis_t = ChassisState(float(target.translation[0]),
                                 float(target.translation[1]), psi_total)
        head_t = HeadState(pitch=pitch, yaw=0.0)
    else:
        chassis_t = ChassisState(current_chassis.x, current_chassis.y,
                                 current_chassis.yaw)
        head_t = HeadState(pitch=pitch, yaw=head_yaw_residual)
    return chassis_t, head_t


# ---------------------------------------------------------------------------
# Episode-base normalization.
# ---------------------------------------------------------------------------

def episode_base_transform(frames, calib: MountCalibration):
    """Re-express raw world-frame poses relative to the first head pose.

    `frames` is a sequence of mappings {"H": Pose, "L": Pose, "R": Pose}.
    Every output pose is inv(T_B) . T_i(t) . T_{i->L} with T_B the raw head
    pose of frame 0, so the construction is invariant to any fixed rigid
    motion applied to the whole episode in the world frame.
    """
    frames = list(frames)
    if not frames:
        raise EmptyEpisode("no frames")
    head0 = frames[0].get("H")
    if head0 is None or not head0.is_valid():
        raise InvalidPose("first frame must carry a valid head pose")
    base_inv = head0.inverse()
    out = []
    for k, frame in enumerate(frames):
        row = {}
        for name, pose in frame.items():
            if not pose.is_valid():
                raise InvalidPose(f"frame {k}, source {name}")
            row[name] = base_inv.compose(pose).compose(calib.for_source(name))
        out.append(row)
    return out
