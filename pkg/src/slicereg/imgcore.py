"""Scalar image containers for 2D and 3D grids, Gaussian pyramids, and
MetaImage file I/O.

Volumes store intensities in a flat array with x varying fastest
(index = x + nx*(y + ny*z)); 2D images likewise with u fastest. Images are
treated as immutable after construction and are safe to share across
threads or worker processes.
"""

import os

import numpy as np

# Binomial approximation of a Gaussian; weights sum to exactly 1.
SMOOTH_KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def format_number(v):
    """Shortest decimal string that parses back to the same float.

    Integral values drop the trailing '.0' ('8.0' -> '8')."""
    s = repr(float(v))
    return s[:-2] if s.endswith(".0") else s


class Volume3:
    """A 3D scalar image with physical voxel spacing in mm."""

    def __init__(self, dims, spacing, data):
        nx, ny, nz = (int(d) for d in dims)
        sx, sy, sz = (float(s) for s in spacing)
        if nx <= 0 or ny <= 0 or nz <= 0:
            raise ValueError("volume dims must be positive")
        if sx <= 0 or sy <= 0 or sz <= 0:
            raise ValueError("volume spacing must be strictly positive")
        data = np.ascontiguousarray(data, dtype=np.float64).ravel()
        if data.size != nx * ny * nz:
            raise ValueError(
                f"data length {data.size} does not match dims {nx}x{ny}x{nz}")
        if not np.all(np.isfinite(data)):
            raise ValueError("volume intensities must be finite")
        self.dims = (nx, ny, nz)
        self.spacing = (sx, sy, sz)
        self.data = data

    @property
    def grid(self):
        """View of the data as a (nz, ny, nx) array."""
        nx, ny, nz = self.dims
        return self.data.reshape(nz, ny, nx)

    def flat_index(self, x, y, z):
        nx, ny, _ = self.dims
        return x + nx * (y + ny * z)

    def physical_center(self):
        """Center of the voxel lattice in mm (origin at voxel (0,0,0))."""
        nx, ny, nz = self.dims
        sx, sy, sz = self.spacing
        return np.array([0.5 * ((nx - 1) * sx),
                         0.5 * ((ny - 1) * sy),
                         0.5 * ((nz - 1) * sz)])


class ImageGrid2:
    """A 2D scalar image with spacing and a per-pixel validity mask.

    Validity marks pixels that were sampled inside a source volume; native
    2D inputs are all-valid. Invalid pixels store intensity 0.
    """

    def __init__(self, dims, spacing, data, validity=None):
        w, h = (int(d) for d in dims)
        su, sv = (float(s) for s in spacing)
        if w <= 0 or h <= 0:
            raise ValueError("image dims must be positive")
        if su <= 0 or sv <= 0:
            raise ValueError("image spacing must be strictly positive")
        data = np.ascontiguousarray(data, dtype=np.float64).ravel()
        if data.size != w * h:
            raise ValueError(f"data length {data.size} does not match dims {w}x{h}")
        if not np.all(np.isfinite(data)):
            raise ValueError("image intensities must be finite")
        if validity is None:
            validity = np.ones(w * h, dtype=np.bool_)
        else:
            validity = np.ascontiguousarray(validity, dtype=np.bool_).ravel()
            if validity.size != w * h:
                raise ValueError("validity length does not match dims")
        if np.any(data[~validity] != 0.0):
            raise ValueError("invalid pixels must store intensity 0")
        self.dims = (w, h)
        self.spacing = (su, sv)
        self.data = data
        self.validity = validity

    @property
    def grid(self):
        """View of the data as a (h, w) array."""
        w, h = self.dims
        return self.data.reshape(h, w)

    @property
    def validity_grid(self):
        w, h = self.dims
        return self.validity.reshape(h, w)


class Pyramid:
    """Ordered image levels, index 0 coarsest, last the original image."""

    def __init__(self, levels):
        if not levels:
            raise ValueError("pyramid needs at least one level")
        self.levels = list(levels)

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, k):
        return self.levels[k]


def _smooth_axis(arr, axis):
    pad = [(2, 2) if a == axis else (0, 0) for a in range(arr.ndim)]
    padded = np.pad(arr, pad, mode="edge")
    out = np.zeros_like(arr)
    sl = [slice(None)] * arr.ndim
    n = arr.shape[axis]
    for k, wgt in enumerate(SMOOTH_KERNEL):
        sl[axis] = slice(k, k + n)
        out += wgt * padded[tuple(sl)]
    return out


def _decimate_axis(arr, axis):
    sl = [slice(None)] * arr.ndim
    sl[axis] = slice(0, None, 2)
    return arr[tuple(sl)]


# Grid arrays are (z, y, x) for volumes and (v, u) for 2D images.
_VOL_AXIS = {"x": 2, "y": 1, "z": 0}
_IMG_AXIS = {"x": 1, "y": 0}


def smooth_and_halve(image, axes):
    """Smooth with the binomial kernel along the given axes, then keep every
    second sample (even indices). Halved axes double their spacing.
    """
    axes = set(axes)
    if isinstance(image, Volume3):
        axis_map = _VOL_AXIS
    elif isinstance(image, ImageGrid2):
        axis_map = _IMG_AXIS
    else:
        raise TypeError(f"unsupported image type {type(image).__name__}")
    unknown = axes - set(axis_map)
    if unknown:
        raise ValueError(f"unknown axes for this image kind: {sorted(unknown)}")

    grid = image.grid
    array_axes = sorted(axis_map[a] for a in axes)
    for a in array_axes:
        if grid.shape[a] < 2:
            raise ValueError(f"axis extent {grid.shape[a]} too small to halve")
    out = grid
    for a in array_axes:
        out = _decimate_axis(_smooth_axis(out, a), a)
    out = np.ascontiguousarray(out)

    if isinstance(image, Volume3):
        nz, ny, nx = out.shape
        sx, sy, sz = image.spacing
        spacing = (sx * 2 if "x" in axes else sx,
                   sy * 2 if "y" in axes else sy,
                   sz * 2 if "z" in axes else sz)
        return Volume3((nx, ny, nz), spacing, out.ravel())

    valid = image.validity_grid
    for a in array_axes:
        valid = _decimate_axis(valid, a)
    # Smoothing bleeds across the validity boundary; restore the invariant
    # that invalid pixels store 0.
    out = out.copy()
    out[~valid] = 0.0
    h, w = out.shape
    su, sv = image.spacing
    spacing = (su * 2 if "x" in axes else su,
               sv * 2 if "y" in axes else sv)
    return ImageGrid2((w, h), spacing, out.ravel(), valid.ravel())


def build_pyramid(image, num_levels):
    """Gaussian pyramid over the in-plane axes; volume z extent is kept.

    Level num_levels-1 is the input; each coarser level halves x and y.
    """
    if num_levels < 1:
        raise ValueError("num_levels must be >= 1")
    levels = [image]
    for _ in range(num_levels - 1):
        levels.append(smooth_and_halve(levels[-1], {"x", "y"}))
    levels.reverse()
    return Pyramid(levels)


_REQUIRED_KEYS = ("ObjectType", "NDims", "DimSize", "ElementSpacing",
                  "ElementType", "ElementByteOrderMSB", "ElementDataFile")


def load_metaimage(path):
    """Read a MetaImage header/raw pair; NDims selects the returned kind."""
    path = os.fspath(path)
    header = {}
    with open(path, "r", encoding="ascii") as f:
        for line in f:
            line = line.strip()
            if not line or "=" not in line:
                continue
            key, _, value = line.partition("=")
            header[key.strip()] = value.strip()

    missing = [k for k in _REQUIRED_KEYS if k not in header]
    if missing:
        raise ValueError(f"missing header keys: {missing}")
    ndims = int(header["NDims"])
    if ndims not in (2, 3):
        raise ValueError(f"unsupported NDims {ndims} (expected 2 or 3)")
    if header["ElementType"] != "MET_FLOAT":
        raise ValueError(f"unsupported ElementType {header['ElementType']}")
    if header["ElementByteOrderMSB"] != "False":
        raise ValueError("big-endian payloads are not supported")
    dims = tuple(int(v) for v in header["DimSize"].split())
    spacing = tuple(float(v) for v in header["ElementSpacing"].split())
    if len(dims) != ndims or len(spacing) != ndims:
        raise ValueError("DimSize/ElementSpacing do not match NDims")

    raw_path = os.path.join(os.path.dirname(path), header["ElementDataFile"])
    with open(raw_path, "rb") as f:
        raw = f.read()
    expected = int(np.prod(dims)) * 4
    if len(raw) != expected:
        raise ValueError(
            f"payload length mismatch: got {len(raw)} bytes, expected {expected}")
    data = np.frombuffer(raw, dtype="<f4").astype(np.float64)

    if ndims == 3:
        return Volume3(dims, spacing, data)
    return ImageGrid2(dims, spacing, data)


def save_metaimage(image, path):
    """Write a MetaImage header at ``path`` plus a sibling .raw payload."""
    path = os.fspath(path)
    stem, _ = os.path.splitext(path)
    raw_path = stem + ".raw"
    if isinstance(image, Volume3):
        ndims = 3
    elif isinstance(image, ImageGrid2):
        ndims = 2
    else:
        raise TypeError(f"unsupported image type {type(image).__name__}")
    lines = [
        "ObjectType = Image",
        f"NDims = {ndims}",
        "DimSize = " + " ".join(str(d) for d in image.dims),
        "ElementSpacing = " + " ".join(format_number(s) for s in image.spacing),
        "ElementType = MET_FLOAT",
        "ElementByteOrderMSB = False",
        f"ElementDataFile = {os.path.basename(raw_path)}",
    ]
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    with open(raw_path, "wb") as f:
        f.write(image.data.astype("<f4").tobytes())
