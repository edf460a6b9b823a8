"""Scene loading: COLMAP text models, image/depth rasters, train/test splits.

Expected model layout (COLMAP text export)::

    model_dir/
        cameras.txt    # CAMERA_ID MODEL WIDTH HEIGHT PARAMS[]
        images.txt     # IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME  (+ 2D-point line)
        points3D.txt   # POINT3D_ID X Y Z R G B ERROR TRACK[]

Only PINHOLE and SIMPLE_PINHOLE camera models are supported. Images are
normalized to float [0,1] at load. Depth rasters are optional per view.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from . import quats
from .errors import (
    CorruptRaster,
    FormatError,
    InconsistentModel,
    InvalidRotation,
    InvalidStride,
    MissingModelFile,
    ParseError,
    UnsupportedCameraModel,
)

FLOAT_RASTER_MAGIC = b"FRAS"

ROTATION_TOL = 1e-9


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got ({self.fx}, {self.fy})")
        if not (0 <= self.cx < self.width) or not (0 <= self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside image "
                f"{self.width}x{self.height}"
            )


@dataclass(frozen=True, eq=False)
class CameraPose:
    """Pinhole camera: world->camera extrinsics (x_cam = R @ x_world + t)."""

    intrinsics: Intrinsics
    rotation: np.ndarray  # (3,3) orthonormal, det +1
    translation: np.ndarray  # (3,)
    id: int | str

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if R.shape != (3, 3):
            raise InvalidRotation(f"rotation must be 3x3, got {R.shape}")
        err = np.abs(R.T @ R - np.eye(3)).max()
        if err > ROTATION_TOL or abs(np.linalg.det(R) - 1.0) > ROTATION_TOL:
            raise InvalidRotation(
                f"view {self.id}: rotation not orthonormal (max deviation {err:.2e})"
            )
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @property
    def center(self):
        """Camera center in world coordinates (-R^T t)."""
        return -self.rotation.T @ self.translation


@dataclass(frozen=True, eq=False)
class SparsePointCloud:
    points: np.ndarray  # (S,3)
    colors: np.ndarray  # (S,3) in [0,1]

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        cols = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
        if pts.shape[0] != cols.shape[0]:
            raise ValueError("points/colors length mismatch")
        if pts.size and not np.isfinite(pts).all():
            raise ValueError("point cloud contains non-finite coordinates")
        pts.setflags(write=False)
        cols.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "colors", cols)

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True, eq=False)
class Scene:
    poses: tuple
    images: tuple  # float rasters in [0,1], HxWx3, one per pose
    point_cloud: SparsePointCloud
    depths: tuple | None = None  # optional float rasters, HxW, one per pose

    def __post_init__(self):
        if len(self.poses) != len(self.images):
            raise ValueError("poses/images count mismatch")
        if self.depths is not None:
            if len(self.depths) != len(self.poses):
                raise ValueError("depths count mismatch")
            for img, dep in zip(self.images, self.depths):
                if dep is not None and dep.shape != img.shape[:2]:
                    raise ValueError("depth raster does not match its image size")
        object.__setattr__(self, "poses", tuple(self.poses))
        object.__setattr__(self, "images", tuple(self.images))
        if self.depths is not None:
            object.__setattr__(self, "depths", tuple(self.depths))

    def __len__(self):
        return len(self.poses)

    def depth_for(self, idx):
        if self.depths is None:
            return None
        return self.depths[idx]


# --------------------------------------------------------------------------
# COLMAP text parsing


def _data_lines(path):
    """Yield (line_no, stripped_line) skipping comments and blanks."""
    with open(path, "r") as f:
        for i, raw in enumerate(f, start=1):
            line = raw.strip()
            if line and not line.startswith("#"):
                yield i, line


def _read_cameras_txt(path):
    cameras = {}
    for line_no, line in _data_lines(path):
        toks = line.split()
        try:
            cam_id = int(toks[0])
            model = toks[1]
            width, height = int(toks[2]), int(toks[3])
            params = [float(v) for v in toks[4:]]
        except (ValueError, IndexError) as exc:
            raise ParseError(path, line_no, f"bad camera line: {exc}") from exc
        if model == "PINHOLE":
            if len(params) != 4:
                raise ParseError(path, line_no, "PINHOLE expects 4 params")
            fx, fy, cx, cy = params
        elif model == "SIMPLE_PINHOLE":
            if len(params) != 3:
                raise ParseError(path, line_no, "SIMPLE_PINHOLE expects 3 params")
            f, cx, cy = params
            fx = fy = f
        else:
            raise UnsupportedCameraModel(
                f"{path}:{line_no}: camera model {model!r} not supported "
                "(PINHOLE / SIMPLE_PINHOLE only)"
            )
        cameras[cam_id] = Intrinsics(fx=fx, fy=fy, cx=cx, cy=cy, width=width, height=height)
    return cameras


def _read_images_txt(path):
    """Return list of dicts; images.txt alternates pose lines and 2D-point lines.

    The 2D-point line can be entirely empty, so blank lines only count as
    data once the pose/points alternation has started.
    """
    entries = []
    expecting_points = False
    with open(path, "r") as f:
        raw_lines = list(enumerate(f, start=1))
    for line_no, raw in raw_lines:
        line = raw.strip()
        if line.startswith("#"):
            continue
        if expecting_points:
            expecting_points = False  # 2D observations; not used here
            continue
        if not line:
            continue
        toks = line.split()
        if len(toks) < 10:
            raise ParseError(path, line_no, f"image line has {len(toks)} fields, expected >= 10")
        try:
            entry = {
                "image_id": int(toks[0]),
                "qvec": np.array([float(v) for v in toks[1:5]]),
                "tvec": np.array([float(v) for v in toks[5:8]]),
                "camera_id": int(toks[8]),
                "name": " ".join(toks[9:]),
            }
        except ValueError as exc:
            raise ParseError(path, line_no, f"bad image line: {exc}") from exc
        entries.append(entry)
        expecting_points = True
    return entries


def _read_points3d_txt(path):
    pts, cols = [], []
    for line_no, line in _data_lines(path):
        toks = line.split()
        if len(toks) < 7:
            raise ParseError(path, line_no, f"point line has {len(toks)} fields, expected >= 7")
        try:
            pts.append([float(toks[1]), float(toks[2]), float(toks[3])])
            cols.append([int(toks[4]), int(toks[5]), int(toks[6])])
        except ValueError as exc:
            raise ParseError(path, line_no, f"bad point line: {exc}") from exc
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
    cols = np.asarray(cols, dtype=np.float64).reshape(-1, 3) / 255.0
    return SparsePointCloud(points=pts, colors=cols)


def load_colmap_scene(model_dir, images_dir, depths_dir=None) -> Scene:
    """Parse a COLMAP text model plus its images into a Scene.

    Poses are ordered by image name. When depths_dir is given, a float raster
    named <image stem>.fras is attached per view where present.
    """
    model_dir = Path(model_dir)
    images_dir = Path(images_dir)
    paths = {name: model_dir / f"{name}.txt" for name in ("cameras", "images", "points3D")}
    for name, p in paths.items():
        if not p.is_file():
            raise MissingModelFile(f"missing {p}")

    cameras = _read_cameras_txt(paths["cameras"])
    entries = _read_images_txt(paths["images"])
    point_cloud = _read_points3d_txt(paths["points3D"])

    entries.sort(key=lambda e: e["name"])
    poses, images, depths = [], [], []
    any_depth = False
    for e in entries:
        if e["camera_id"] not in cameras:
            raise InconsistentModel(
                f"image {e['name']} references unknown camera {e['camera_id']}"
            )
        R = quats.to_rotmat(e["qvec"])
        poses.append(
            CameraPose(
                intrinsics=cameras[e["camera_id"]],
                rotation=R,
                translation=e["tvec"],
                id=e["image_id"],
            )
        )
        img_path = images_dir / e["name"]
        if not img_path.is_file():
            raise InconsistentModel(f"registered image file not found: {img_path}")
        images.append(load_raster(img_path))
        if depths_dir is not None:
            dpath = Path(depths_dir) / (Path(e["name"]).stem + ".fras")
            if dpath.is_file():
                depths.append(load_raster(dpath))
                any_depth = True
            else:
                depths.append(None)
    return Scene(
        poses=tuple(poses),
        images=tuple(images),
        point_cloud=point_cloud,
        depths=tuple(depths) if any_depth else None,
    )


# --------------------------------------------------------------------------
# Raster IO
#
# Two on-disk forms, chosen by extension:
#   *.png   8-bit RGB / grayscale; loaded as float in [0,1]
#   *.fras  portable float raster: magic "FRAS", u32le width/height/channels,
#           then float32le row-major values


def save_raster(path, raster):
    path = Path(path)
    raster = np.asarray(raster)
    if path.suffix.lower() == ".png":
        arr = raster
        if arr.dtype != np.uint8:
            arr = np.clip(np.rint(np.clip(arr, 0.0, 1.0) * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(arr).save(path, format="PNG")
    elif path.suffix.lower() == ".fras":
        arr = np.ascontiguousarray(raster, dtype=np.float32)
        if arr.ndim == 2:
            h, w, c = arr.shape[0], arr.shape[1], 1
        elif arr.ndim == 3:
            h, w, c = arr.shape
        else:
            raise FormatError(f"float raster must be 2D or 3D, got ndim={arr.ndim}")
        with open(path, "wb") as f:
            f.write(FLOAT_RASTER_MAGIC)
            f.write(struct.pack("<III", w, h, c))
            f.write(arr.tobytes())
    else:
        raise FormatError(f"unknown raster extension: {path.suffix}")
    return path


def load_raster(path):
    path = Path(path)
    if path.suffix.lower() == ".png":
        with Image.open(path) as im:
            arr = np.asarray(im)
        return arr.astype(np.float64) / 255.0
    if path.suffix.lower() == ".fras":
        with open(path, "rb") as f:
            magic = f.read(4)
            if magic != FLOAT_RASTER_MAGIC:
                raise FormatError(f"{path}: bad magic {magic!r}")
            header = f.read(12)
            if len(header) != 12:
                raise CorruptRaster(f"{path}: truncated header")
            w, h, c = struct.unpack("<III", header)
            payload = f.read()
        expected = w * h * c * 4
        if len(payload) != expected:
            raise CorruptRaster(f"{path}: payload {len(payload)} bytes, header implies {expected}")
        arr = np.frombuffer(payload, dtype="<f4").astype(np.float32)
        return arr.reshape((h, w) if c == 1 else (h, w, c))
    raise FormatError(f"unknown raster extension: {path.suffix}")


def save_mask(path, mask):
    """Binary mask -> 8-bit PNG, 255 = masked."""
    m = (np.asarray(mask) > 0).astype(np.uint8) * 255
    Image.fromarray(m, mode="L").save(Path(path), format="PNG")


def load_mask(path):
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return (arr >= 128).astype(np.uint8)


# --------------------------------------------------------------------------


def train_test_split(n_views, stride):
    """Hold out every stride-th view: test = {0, stride, 2*stride, ...}."""
    if stride < 2:
        raise InvalidStride(f"stride must be >= 2, got {stride}")
    if n_views < 1:
        raise ValueError("n_views must be >= 1")
    test = list(range(0, n_views, stride))
    test_set = set(test)
    train = [i for i in range(n_views) if i not in test_set]
    return train, test
