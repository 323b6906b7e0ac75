"""Serial-arm kinematics: DH chains, FK, Euler pose extraction, damped
least squares IK, and the camera-projector follower geometry.

Conventions: standard (distal) DH, T = Rz(theta) Tz(d) Tx(a) Rx(alpha).
Angles in radians, lengths in meters throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

RIGID_TOL = 1e-9


class KinematicsError(Exception):
    pass


class NotConverged(KinematicsError):
    """IK ran out of iterations with the residual above tolerance."""

    def __init__(self, msg, q=None, pos_err=None, rot_err=None):
        super().__init__(msg)
        self.q = q
        self.pos_err = pos_err
        self.rot_err = rot_err


def _as_rotation(m) -> np.ndarray:
    R = np.asarray(m, dtype=float)
    if R.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got {R.shape}")
    return R


@dataclass(frozen=True)
class RigidTransform:
    """3x3 rotation plus translation; always a proper rigid transform."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = _as_rotation(self.rotation)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        err = np.abs(R.T @ R - np.eye(3)).max()
        if err > RIGID_TOL:
            raise ValueError(f"rotation not orthonormal (|R'R - I| = {err:.3e})")
        det = np.linalg.det(R)
        if abs(det - 1.0) > RIGID_TOL:
            raise ValueError(f"rotation has det {det:.12f}, expected +1")

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    @staticmethod
    def from_matrix(T) -> "RigidTransform":
        T = np.asarray(T, dtype=float)
        return RigidTransform(T[:3, :3], T[:3, 3])

    def as_matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return self.compose(other)

    def inverse(self) -> "RigidTransform":
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def transform_point(self, p) -> np.ndarray:
        return self.rotation @ np.asarray(p, dtype=float).reshape(3) + self.translation

    def almost_equal(self, other: "RigidTransform", tol: float = 1e-9) -> bool:
        return (
            np.abs(self.rotation - other.rotation).max() <= tol
            and np.abs(self.translation - other.translation).max() <= tol
        )


@dataclass(frozen=True)
class DHRow:
    """One joint's fixed DH parameters (joint angle offset, a, d, alpha)."""

    theta_offset: float
    a: float
    d: float
    alpha: float

    def __post_init__(self):
        for name in ("theta_offset", "a", "d", "alpha"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"DHRow.{name} must be finite, got {v}")


@dataclass(frozen=True)
class DHChain:
    rows: tuple

    def __post_init__(self):
        rows = tuple(self.rows)
        if len(rows) < 1:
            raise ValueError("DHChain needs at least one row")
        if not all(isinstance(r, DHRow) for r in rows):
            raise TypeError("DHChain rows must be DHRow instances")
        object.__setattr__(self, "rows", rows)
        # precomputed parameter arrays for the vectorized FK path
        par = np.array([(r.theta_offset, r.a, r.d, r.alpha) for r in rows])
        object.__setattr__(self, "_offsets", par[:, 0])
        object.__setattr__(self, "_a", par[:, 1])
        object.__setattr__(self, "_d", par[:, 2])
        object.__setattr__(self, "_cos_alpha", np.cos(par[:, 3]))
        object.__setattr__(self, "_sin_alpha", np.sin(par[:, 3]))

    def __len__(self) -> int:
        return len(self.rows)

    @staticmethod
    def from_dict(doc: dict) -> "DHChain":
        rows = [
            DHRow(float(r["theta_offset"]), float(r["a"]), float(r["d"]), float(r["alpha"]))
            for r in doc["rows"]
        ]
        return DHChain(tuple(rows))

    @staticmethod
    def from_json_file(path) -> "DHChain":
        with open(path, "r", encoding="utf-8") as f:
            return DHChain.from_dict(json.load(f))

    def to_dict(self) -> dict:
        return {
            "rows": [
                {"theta_offset": r.theta_offset, "a": r.a, "d": r.d, "alpha": r.alpha}
                for r in self.rows
            ]
        }

    def end_frames_batch(self, Q: np.ndarray) -> np.ndarray:
        """End frame for each joint vector in Q (m, n) -> (m, 4, 4).

        One numpy pipeline for the whole batch; this is what keeps the
        finite-difference IK Jacobian affordable inside the sim loop.
        """
        Q = np.asarray(Q, dtype=float)
        m, n = Q.shape
        if n != len(self):
            raise ValueError(f"joint vector length {n} != chain length {len(self)}")
        th = Q + self._offsets
        ct, st = np.cos(th), np.sin(th)
        T = np.broadcast_to(np.eye(4), (m, 4, 4)).copy()
        Ti = np.zeros((m, 4, 4))
        Ti[:, 3, 3] = 1.0
        for j in range(n):
            ca, sa = self._cos_alpha[j], self._sin_alpha[j]
            Ti[:, 0, 0] = ct[:, j]
            Ti[:, 0, 1] = -st[:, j] * ca
            Ti[:, 0, 2] = st[:, j] * sa
            Ti[:, 0, 3] = self._a[j] * ct[:, j]
            Ti[:, 1, 0] = st[:, j]
            Ti[:, 1, 1] = ct[:, j] * ca
            Ti[:, 1, 2] = -ct[:, j] * sa
            Ti[:, 1, 3] = self._a[j] * st[:, j]
            Ti[:, 2, 1] = sa
            Ti[:, 2, 2] = ca
            Ti[:, 2, 3] = self._d[j]
            T = T @ Ti
        return T


def ur3_chain() -> DHChain:
    """The controlled arm's six-joint DH table."""
    return DHChain(
        (
            DHRow(0.0, 0.0, 0.15185, math.pi / 2),
            DHRow(0.0, -0.24355, 0.0, 0.0),
            DHRow(0.0, -0.2132, 0.0, 0.0),
            DHRow(0.0, 0.0, 0.13105, math.pi / 2),
            DHRow(0.0, 0.0, 0.08535, -math.pi / 2),
            DHRow(0.0, 0.0, 0.0921, 0.0),
        )
    )


def projection_target_chain() -> DHChain:
    """Two-joint chain locating the midpoint of the projected link."""
    return DHChain(
        (
            DHRow(0.0, 0.0, 0.15185, math.pi / 2),
            DHRow(0.0, -0.12176, 0.40, 0.0),
        )
    )


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def dh_transform(row: DHRow, theta: float) -> RigidTransform:
    """Transform of one DH row at joint angle theta:
    Rz(theta_offset + theta) Tz(d) Tx(a) Rx(alpha)."""
    th = row.theta_offset + theta
    ct, st = math.cos(th), math.sin(th)
    ca, sa = math.cos(row.alpha), math.sin(row.alpha)
    R = np.array(
        [
            [ct, -st * ca, st * sa],
            [st, ct * ca, -ct * sa],
            [0.0, sa, ca],
        ]
    )
    t = np.array([row.a * ct, row.a * st, row.d])
    return RigidTransform(R, t)


def forward_kinematics(chain: DHChain, q) -> list:
    """Cumulative frame of each joint; the last entry is the end frame."""
    q = np.asarray(q, dtype=float).reshape(-1)
    if len(q) != len(chain):
        raise ValueError(f"joint vector length {len(q)} != chain length {len(chain)}")
    frames = []
    T = RigidTransform.identity()
    for row, qi in zip(chain.rows, q):
        T = T @ dh_transform(row, qi)
        frames.append(T)
    return frames


def fk_end(chain: DHChain, q) -> RigidTransform:
    return forward_kinematics(chain, q)[-1]


@dataclass(frozen=True)
class PoseEuler:
    """Position plus ZYX Euler angles (alpha about z, beta about y, gamma
    about x). At beta = +-pi/2 the angles are not unique; gamma is pinned
    to 0 there and the remaining rotation folded into alpha."""

    position: np.ndarray
    euler_zyx: tuple

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "euler_zyx", tuple(float(v) for v in self.euler_zyx))


def rotation_from_euler_zyx(alpha: float, beta: float, gamma: float) -> np.ndarray:
    return rot_z(alpha) @ rot_y(beta) @ rot_x(gamma)


def extract_pose(T: RigidTransform) -> PoseEuler:
    """ZYX Euler decomposition of a rigid transform.

    beta = atan2(-r31, sqrt(r11^2 + r21^2)) lies in [-pi/2, pi/2]; the
    alpha/gamma atan2 pairs divide through by cos(beta), which is positive
    on the regular branch and so drops out of the atan2.
    """
    R = T.rotation
    cb = math.hypot(R[0, 0], R[1, 0])
    beta = math.atan2(-R[2, 0], cb)
    if cb < 1e-8:
        # gimbal: only alpha -+ gamma is determined; pin gamma = 0
        alpha = math.atan2(-R[0, 1], R[1, 1])
        gamma = 0.0
    else:
        alpha = math.atan2(R[1, 0], R[0, 0])
        gamma = math.atan2(R[2, 1], R[2, 2])
    return PoseEuler(T.translation.copy(), (alpha, beta, gamma))


@dataclass(frozen=True)
class IkOptions:
    pos_tol: float = 1e-4
    rot_tol: float = 1e-3
    damping: float = 0.05
    max_iters: int = 300
    fd_step: float = 1e-6
    joint_limits: tuple = (-2.0 * math.pi, 2.0 * math.pi)


def rotation_vector(R: np.ndarray) -> np.ndarray:
    """Axis-angle vector of a rotation matrix (angle in [0, pi])."""
    c = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = math.acos(c)
    if theta < 1e-12:
        return np.zeros(3)
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta > math.pi - 1e-6:
        # near-pi axis from the symmetric part; sin(theta) is unusable
        A = (R + np.eye(3)) / 2.0
        axis = np.sqrt(np.clip(np.diag(A), 0.0, None))
        k = int(np.argmax(axis))
        if axis[k] > 0:
            axis = A[:, k] / axis[k]
            n = np.linalg.norm(axis)
            if n > 0:
                axis = axis / n
                # pick the sign that matches the skew part when it is nonzero
                if np.dot(axis, w) < 0:
                    axis = -axis
                return axis * theta
        return np.zeros(3)
    return w / (2.0 * math.sin(theta)) * theta


def _pose_errors(T_batch: np.ndarray, R_target: np.ndarray, p_target: np.ndarray) -> np.ndarray:
    """6-vector pose error for each (4,4) frame in T_batch -> (m, 6)."""
    m = T_batch.shape[0]
    E = np.empty((m, 6))
    E[:, :3] = p_target[None, :] - T_batch[:, :3, 3]
    R_err = R_target[None, :, :] @ np.transpose(T_batch[:, :3, :3], (0, 2, 1))
    for i in range(m):
        E[i, 3:] = rotation_vector(R_err[i])
    return E


def inverse_kinematics(
    chain: DHChain, target: RigidTransform, seed, opts: IkOptions | None = None
):
    """Damped least squares IK on the 6-D pose error twist.

    The Jacobian is numerical (central differences on the error vector,
    batched through the chain's vectorized FK). Raises NotConverged when
    the residual stays above tolerance after max_iters.
    """
    if opts is None:
        opts = IkOptions()
    n = len(chain)
    q = np.asarray(seed, dtype=float).reshape(-1).copy()
    if len(q) != n:
        raise ValueError(f"seed length {len(q)} != chain length {n}")
    lo, hi = opts.joint_limits
    R_t, p_t = target.rotation, target.translation
    lam2 = opts.damping**2
    h = opts.fd_step

    Qs = np.empty((1 + 2 * n, n))
    eye6 = np.eye(6)
    for _ in range(opts.max_iters + 1):
        Qs[:] = q[None, :]
        for i in range(n):
            Qs[1 + 2 * i, i] += h
            Qs[2 + 2 * i, i] -= h
        E = _pose_errors(chain.end_frames_batch(Qs), R_t, p_t)
        e = E[0]
        pos_err = float(np.linalg.norm(e[:3]))
        rot_err = float(np.linalg.norm(e[3:]))
        if pos_err <= opts.pos_tol and rot_err <= opts.rot_tol:
            return q
        J = (E[1::2] - E[2::2]).T / (2.0 * h)
        dq = -J.T @ np.linalg.solve(J @ J.T + lam2 * eye6, e)
        q = np.clip(q + dq, lo, hi)
    raise NotConverged(
        f"IK residual above tolerance after {opts.max_iters} iterations "
        f"(pos {pos_err:.3e} m, rot {rot_err:.3e} rad)",
        q=q,
        pos_err=pos_err,
        rot_err=rot_err,
    )


_PROJ_CHAIN = projection_target_chain()


def projection_target_pose(q_ur3, chain: DHChain | None = None) -> RigidTransform:
    """Pose of the projection-surface midpoint; depends on the first two
    joints of the controlled arm only."""
    q = np.asarray(q_ur3, dtype=float).reshape(-1)
    if len(q) != 6:
        raise ValueError(f"expected 6 joint values, got {len(q)}")
    if chain is None:
        chain = _PROJ_CHAIN
    return fk_end(chain, q[: len(chain)])


_FLIP_X = np.diag([1.0, -1.0, -1.0])


def follower_pose(target: RigidTransform, standoff: float) -> RigidTransform:
    """Camera-projector carrier pose: sit `standoff` along the target
    surface normal (the target frame's +z) and aim the optical axis
    (local +z) back at the target point."""
    if not standoff > 0:
        raise ValueError(f"standoff must be positive, got {standoff}")
    normal = target.rotation[:, 2]
    position = target.translation + standoff * normal
    # pi turn about the target's x axis: +z flips to face the target,
    # handedness is preserved
    return RigidTransform(target.rotation @ _FLIP_X, position)
