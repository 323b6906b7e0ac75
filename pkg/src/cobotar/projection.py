"""Camera-projector geometry: pinhole projection, plane-to-plane
homographies estimated by the normalized DLT, and the projected GUI
layout with hit-testing.

GUI-plane coordinates are millimeters with the origin at the lower-left
corner of the plane extent; the plane is centered on the projection
target frame and lies in its local xy plane.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .kinematics import RigidTransform


class ProjectionError(Exception):
    pass


class BehindCamera(ProjectionError):
    """Point has non-positive depth in the camera frame."""


class DegenerateConfiguration(ProjectionError):
    """Correspondences do not determine an invertible homography."""


class PointAtInfinity(ProjectionError):
    """Projective denominator vanished."""


ACTIONS = ("+x", "-x", "+y", "-y")


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def normalize(self, uv) -> np.ndarray:
        """Pixel coordinates scaled into the unit square."""
        uv = np.asarray(uv, dtype=float)
        return np.array([uv[0] / self.width, uv[1] / self.height])

    def denormalize(self, xy) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        return np.array([xy[0] * self.width, xy[1] * self.height])

    @staticmethod
    def from_dict(doc: dict) -> "CameraIntrinsics":
        return CameraIntrinsics(
            fx=float(doc["fx"]),
            fy=float(doc["fy"]),
            cx=float(doc["cx"]),
            cy=float(doc["cy"]),
            width=int(doc["width"]),
            height=int(doc["height"]),
        )

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }


def camera_project(intr: CameraIntrinsics, cam_pose: RigidTransform, world_pt) -> np.ndarray:
    """Pinhole projection of a world point into pixel coordinates.

    cam_pose is the camera's pose in the world (optical axis = local +z).
    """
    p = cam_pose.inverse().transform_point(world_pt)
    if p[2] <= 0:
        raise BehindCamera(f"point depth {p[2]:.6f} m is not positive")
    return np.array(
        [intr.fx * p[0] / p[2] + intr.cx, intr.fy * p[1] / p[2] + intr.cy]
    )


@dataclass(frozen=True)
class Homography:
    """Invertible 3x3 projective map, scaled so h33 = 1 whenever h33 != 0."""

    matrix: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.matrix, dtype=float)
        if H.shape != (3, 3):
            raise ValueError(f"homography must be 3x3, got {H.shape}")
        if abs(np.linalg.det(H)) <= 1e-12:
            raise DegenerateConfiguration("homography is not invertible")
        if abs(H[2, 2]) > 1e-12:
            H = H / H[2, 2]
        object.__setattr__(self, "matrix", H)

    @staticmethod
    def identity() -> "Homography":
        return Homography(np.eye(3))

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))

    def compose(self, other: "Homography") -> "Homography":
        return Homography(self.matrix @ other.matrix)


def apply_homography(H: Homography, p) -> np.ndarray:
    x, y = float(p[0]), float(p[1])
    M = H.matrix
    w = M[2, 0] * x + M[2, 1] * y + M[2, 2]
    if abs(w) < 1e-12:
        raise PointAtInfinity(f"point ({x}, {y}) maps to infinity")
    return np.array(
        [
            (M[0, 0] * x + M[0, 1] * y + M[0, 2]) / w,
            (M[1, 0] * x + M[1, 1] * y + M[1, 2]) / w,
        ]
    )


def _hartley_normalization(pts: np.ndarray) -> np.ndarray:
    """Similarity moving the centroid to the origin and the mean radius
    to sqrt(2); conditions the DLT system."""
    centroid = pts.mean(axis=0)
    mean_dist = np.linalg.norm(pts - centroid, axis=1).mean()
    if mean_dist < 1e-12:
        raise DegenerateConfiguration("all points coincide")
    s = np.sqrt(2.0) / mean_dist
    return np.array(
        [
            [s, 0.0, -s * centroid[0]],
            [0.0, s, -s * centroid[1]],
            [0.0, 0.0, 1.0],
        ]
    )


def estimate_homography(pairs) -> Homography:
    """DLT estimate of the homography mapping src to dst over >= 4 pairs.

    Exact for 4 non-degenerate correspondences; with more it minimizes
    the algebraic error of the normalized system.
    """
    pairs = list(pairs)
    if len(pairs) < 4:
        raise DegenerateConfiguration(f"need at least 4 pairs, got {len(pairs)}")
    src = np.array([[p[0][0], p[0][1]] for p in pairs], dtype=float)
    dst = np.array([[p[1][0], p[1][1]] for p in pairs], dtype=float)
    Ts = _hartley_normalization(src)
    Td = _hartley_normalization(dst)
    sh = (Ts @ np.column_stack([src, np.ones(len(src))]).T).T
    dh = (Td @ np.column_stack([dst, np.ones(len(dst))]).T).T

    A = np.zeros((2 * len(pairs), 9))
    for i, ((sx, sy, _), (dx, dy, _)) in enumerate(zip(sh, dh)):
        A[2 * i] = [-sx, -sy, -1.0, 0.0, 0.0, 0.0, dx * sx, dx * sy, dx]
        A[2 * i + 1] = [0.0, 0.0, 0.0, -sx, -sy, -1.0, dy * sx, dy * sy, dy]
    _, sv, Vt = np.linalg.svd(A)
    # rank must be exactly 8 for a unique (projective) solution
    if sv[-2] < 1e-9 * max(sv[0], 1.0):
        raise DegenerateConfiguration("correspondences are rank deficient")
    Hn = Vt[-1].reshape(3, 3)
    H = np.linalg.inv(Td) @ Hn @ Ts
    try:
        return Homography(H)
    except DegenerateConfiguration:
        raise DegenerateConfiguration("estimated homography is singular")


@dataclass(frozen=True)
class ButtonRegion:
    id: str
    rect: tuple  # (x, y, w, h) mm in GUI-plane coordinates
    action: str

    def __post_init__(self):
        x, y, w, h = (float(v) for v in self.rect)
        if w <= 0 or h <= 0:
            raise ValueError(f"button {self.id!r} has non-positive size")
        if self.action not in ACTIONS:
            raise ValueError(f"unknown action {self.action!r}")
        object.__setattr__(self, "rect", (x, y, w, h))

    def contains(self, pt) -> bool:
        x, y, w, h = self.rect
        return x <= pt[0] <= x + w and y <= pt[1] <= y + h

    def corners(self) -> np.ndarray:
        x, y, w, h = self.rect
        return np.array([[x, y], [x + w, y], [x + w, y + h], [x, y + h]])


def _rects_disjoint(a: tuple, b: tuple) -> bool:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    # closed rectangles: a shared edge point counts as overlap
    return ax + aw < bx or bx + bw < ax or ay + ah < by or by + bh < ay


@dataclass(frozen=True)
class GuiLayout:
    buttons: tuple
    extent: tuple = (160.0, 120.0)  # (width, height) mm

    def __post_init__(self):
        buttons = tuple(self.buttons)
        extent = (float(self.extent[0]), float(self.extent[1]))
        if extent[0] <= 0 or extent[1] <= 0:
            raise ValueError("plane extent must be positive")
        actions = [b.action for b in buttons]
        if sorted(actions) != sorted(ACTIONS):
            raise ValueError(f"layout must have exactly one button per action, got {actions}")
        ids = [b.id for b in buttons]
        if len(set(ids)) != len(ids):
            raise ValueError("button ids must be unique")
        for i in range(len(buttons)):
            for j in range(i + 1, len(buttons)):
                if not _rects_disjoint(buttons[i].rect, buttons[j].rect):
                    raise ValueError(
                        f"buttons {buttons[i].id!r} and {buttons[j].id!r} overlap"
                    )
        object.__setattr__(self, "buttons", buttons)
        object.__setattr__(self, "extent", extent)

    def action_of(self, button_id: str) -> str:
        for b in self.buttons:
            if b.id == button_id:
                return b.action
        raise KeyError(f"no button with id {button_id!r}")

    def button_for(self, action: str) -> ButtonRegion:
        for b in self.buttons:
            if b.action == action:
                return b
        raise KeyError(f"no button with action {action!r}")

    def plane_corners(self) -> np.ndarray:
        w, h = self.extent
        return np.array([[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]])

    @staticmethod
    def from_dict(doc: dict) -> "GuiLayout":
        buttons = tuple(
            ButtonRegion(str(b["id"]), tuple(b["rect"]), str(b["action"]))
            for b in doc["buttons"]
        )
        extent = tuple(doc.get("extent_mm", (160.0, 120.0)))
        return GuiLayout(buttons, extent)

    @staticmethod
    def from_json_file(path) -> "GuiLayout":
        with open(path, "r", encoding="utf-8") as f:
            return GuiLayout.from_dict(json.load(f))

    def to_dict(self) -> dict:
        return {
            "buttons": [
                {"id": b.id, "rect": list(b.rect), "action": b.action}
                for b in self.buttons
            ],
            "extent_mm": list(self.extent),
        }


def default_layout() -> GuiLayout:
    """Four 40x40 mm direction buttons arranged as a cross on a
    160x120 mm plane; one button per planar axis direction."""
    return GuiLayout(
        (
            ButtonRegion("+y", (60.0, 80.0, 40.0, 40.0), "+y"),
            ButtonRegion("-y", (60.0, 0.0, 40.0, 40.0), "-y"),
            ButtonRegion("+x", (120.0, 40.0, 40.0, 40.0), "+x"),
            ButtonRegion("-x", (0.0, 40.0, 40.0, 40.0), "-x"),
        )
    )


def hit_test(layout: GuiLayout, gui_pt):
    """Id of the unique button containing the point, or None.

    Boundaries are closed; the layout's disjointness invariant keeps the
    answer unique.
    """
    for b in layout.buttons:
        if b.contains(gui_pt):
            return b.id
    return None


def gui_point_world(target: RigidTransform, layout: GuiLayout, gui_pt) -> np.ndarray:
    """World position of a GUI-plane point (mm) for a given target frame.

    The plane is centered on the target origin in its local xy plane.
    """
    w, h = layout.extent
    local = np.array(
        [(gui_pt[0] - w / 2.0) / 1000.0, (gui_pt[1] - h / 2.0) / 1000.0, 0.0]
    )
    return target.transform_point(local)


def gui_world_pose(target: RigidTransform, layout: GuiLayout) -> dict:
    """World-space corner quads of every button, keyed by button id."""
    out = {}
    for b in layout.buttons:
        out[b.id] = np.array(
            [gui_point_world(target, layout, c) for c in b.corners()]
        )
    return out


def cam_to_gui_homography(
    intr: CameraIntrinsics,
    cam_pose: RigidTransform,
    target: RigidTransform,
    layout: GuiLayout,
) -> Homography:
    """Calibration homography from normalized image coordinates to
    GUI-plane millimeters, fit to the four plane corners.

    The simulation knows the exact corner geometry, so the fit is exact
    up to floating point.
    """
    pairs = []
    for corner in layout.plane_corners():
        world = gui_point_world(target, layout, corner)
        px = camera_project(intr, cam_pose, world)
        pairs.append((intr.normalize(px), corner))
    return estimate_homography(pairs)
