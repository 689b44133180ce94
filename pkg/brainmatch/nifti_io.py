"""
NIfTI-1 I/O module for the brainmatch pipeline.

Reads and writes single-file NIfTI-1 volumes (.nii and gzip-compressed
.nii.gz) with endianness detection and intensity scaling. Voxel data is
widened to float64 on load; non-finite voxels are replaced with 0.0 and
counted in the load report.
"""

import gzip
import logging
import os
import sys
import zlib
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from brainmatch.config import GZIP_LEVEL

# Configure logging
logger = logging.getLogger(__name__)

HEADER_SIZE = 348
EXTENSION_SIZE = 4
VOX_OFFSET = HEADER_SIZE + EXTENSION_SIZE
MAGIC_SINGLE = b"n+1\x00"
MAGIC_PAIRED = b"ni1\x00"
GZIP_SIGNATURE = b"\x1f\x8b"

header_dtd = [
    ("sizeof_hdr", "i4"),      # 0; must be 348
    ("data_type", "S10"),      # 4; unused
    ("db_name", "S18"),        # 14; unused
    ("extents", "i4"),         # 32; unused
    ("session_error", "i2"),   # 36; unused
    ("regular", "S1"),         # 38; unused
    ("dim_info", "u1"),        # 39; MRI slice ordering code
    ("dim", "i2", (8,)),       # 40; data array dimensions
    ("intent_p1", "f4"),       # 56
    ("intent_p2", "f4"),       # 60
    ("intent_p3", "f4"),       # 64
    ("intent_code", "i2"),     # 68
    ("datatype", "i2"),        # 70
    ("bitpix", "i2"),          # 72
    ("slice_start", "i2"),     # 74
    ("pixdim", "f4", (8,)),    # 76; grid spacings
    ("vox_offset", "f4"),      # 108; offset to data in image file
    ("scl_slope", "f4"),       # 112
    ("scl_inter", "f4"),       # 116
    ("slice_end", "i2"),       # 120
    ("slice_code", "u1"),      # 122
    ("xyzt_units", "u1"),      # 123
    ("cal_max", "f4"),         # 124
    ("cal_min", "f4"),         # 128
    ("slice_duration", "f4"),  # 132
    ("toffset", "f4"),         # 136
    ("glmax", "i4"),           # 140; unused
    ("glmin", "i4"),           # 144; unused
    ("descrip", "S80"),        # 148
    ("aux_file", "S24"),       # 228
    ("qform_code", "i2"),      # 252
    ("sform_code", "i2"),      # 254
    ("quatern_b", "f4"),       # 256
    ("quatern_c", "f4"),       # 260
    ("quatern_d", "f4"),       # 264
    ("qoffset_x", "f4"),       # 268
    ("qoffset_y", "f4"),       # 272
    ("qoffset_z", "f4"),       # 276
    ("srow_x", "f4", (4,)),    # 280
    ("srow_y", "f4", (4,)),    # 296
    ("srow_z", "f4", (4,)),    # 312
    ("intent_name", "S16"),    # 328
    ("magic", "S4"),           # 344
]

HEADER_DTYPE = np.dtype(header_dtd)

# datatype code -> (storage dtype, bitpix)
SUPPORTED_DATATYPES = {
    2: (np.dtype(np.uint8), 8),
    4: (np.dtype(np.int16), 16),
    8: (np.dtype(np.int32), 32),
    16: (np.dtype(np.float32), 32),
    64: (np.dtype(np.float64), 64),
}
FLOAT64_CODE = 64

# xyzt_units: NIFTI_UNITS_MM | NIFTI_UNITS_SEC
UNITS_MM_SEC = 2 | 8
# NIFTI_XFORM_ALIGNED_ANAT
SFORM_ALIGNED = 2


class NiftiError(Exception):
    """Base class for NIfTI decoding and encoding failures."""

    pass


class NotNifti(NiftiError):
    """Raised when bytes are not a single-file NIfTI-1 image."""

    pass


class UnsupportedDatatype(NiftiError):
    """Raised when the datatype code is outside the supported set."""

    pass


class BadDims(NiftiError):
    """Raised when the rank or extents in dim[] are invalid."""

    pass


class TruncatedData(NiftiError):
    """Raised when fewer bytes are present than the header promises."""

    pass


class NiftiIoError(NiftiError):
    """Raised when a file cannot be read, decompressed or written."""

    pass


class HeaderMismatch(NiftiError):
    """Raised when a volume does not fit the reference header it is written with."""

    pass


class ByteOrder(str, Enum):
    NATIVE = "native"
    SWAPPED = "swapped"


@dataclass(frozen=True, eq=False)
class Volume:
    """
    Dense 3D grid of float64 intensities.

    data is flat in x-fastest order (Fortran order over (nx, ny, nz)) and
    read-only; use array() for a 3D view.
    """

    nx: int
    ny: int
    nz: int
    data: np.ndarray
    spacing: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    label: str = ""

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 1:
            raise BadDims(f"Volume extents must be positive, got {self.shape}")
        data = np.array(self.data, dtype=np.float64).reshape(-1)
        if data.size != self.nx * self.ny * self.nz:
            raise BadDims(
                f"Volume {self.label!r} holds {data.size} voxels, "
                f"expected {self.nx}x{self.ny}x{self.nz}"
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @classmethod
    def from_array(
        cls,
        array: np.ndarray,
        spacing: Tuple[float, float, float] = (1.0, 1.0, 1.0),
        label: str = "",
    ) -> "Volume":
        """Builds a Volume from an (nx, ny, nz) array indexed [x, y, z]."""
        if array.ndim != 3:
            raise BadDims(f"Expected a 3D array, got shape {array.shape}")
        nx, ny, nz = array.shape
        return cls(nx, ny, nz, np.ravel(array, order="F"), spacing, label)

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def voxel_count(self) -> int:
        return self.nx * self.ny * self.nz

    def array(self) -> np.ndarray:
        """Read-only (nx, ny, nz) view of the voxel data."""
        return self.data.reshape(self.shape, order="F")

    def with_data(self, data: np.ndarray, label: Optional[str] = None) -> "Volume":
        """Same geometry, new intensities."""
        return Volume(
            self.nx,
            self.ny,
            self.nz,
            data,
            self.spacing,
            self.label if label is None else label,
        )


@dataclass(frozen=True)
class NiftiHeader:
    """
    Decoded 348-byte NIfTI-1 header.

    record keeps every header field (qform and the rest, uninterpreted) in
    native byte order so a rewrite preserves them. byte_order records the
    on-disk order and is excluded from equality.
    """

    sizeof_hdr: int
    dim: Tuple[int, ...]
    datatype_code: int
    bitpix: int
    pixdim: Tuple[float, ...]
    vox_offset: float
    scl_slope: float
    scl_inter: float
    magic: bytes
    srow_x: Tuple[float, ...]
    srow_y: Tuple[float, ...]
    srow_z: Tuple[float, ...]
    byte_order: ByteOrder = field(default=ByteOrder.NATIVE, compare=False)
    record: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def rank(self) -> int:
        return self.dim[0]

    @property
    def spatial_dims(self) -> Tuple[int, int, int]:
        """(nx, ny, nz); axes beyond the rank count as 1."""
        return tuple(self.dim[i] if i <= self.rank else 1 for i in (1, 2, 3))

    @property
    def n_volumes(self) -> int:
        return self.dim[4] if self.rank == 4 else 1

    @property
    def spacing(self) -> Tuple[float, float, float]:
        return tuple(
            self.pixdim[i] if i <= self.rank and self.pixdim[i] > 0 else 1.0
            for i in (1, 2, 3)
        )


@dataclass(frozen=True, eq=False)
class LoadResult:
    """Volumes decoded from one file plus the load report."""

    header: NiftiHeader
    volumes: List[Volume]
    nonfinite_replaced: int


def detect_endianness(header_bytes: bytes) -> ByteOrder:
    """
    Determines the byte order of a header from its sizeof_hdr field.

    Args:
        header_bytes: At least the first 4 bytes of the header

    Returns:
        ByteOrder: NATIVE if sizeof_hdr reads as 348 on this host,
            SWAPPED if it reads as 348 after byte reversal

    Raises:
        NotNifti: If neither order yields 348
    """
    if len(header_bytes) < 4:
        raise NotNifti(f"Need at least 4 header bytes, got {len(header_bytes)}")
    raw = bytes(header_bytes[:4])
    if int.from_bytes(raw, sys.byteorder) == HEADER_SIZE:
        return ByteOrder.NATIVE
    if int.from_bytes(raw[::-1], sys.byteorder) == HEADER_SIZE:
        return ByteOrder.SWAPPED
    raise NotNifti("sizeof_hdr is not 348 in either byte order")


def _header_dtype(order: ByteOrder) -> np.dtype:
    return HEADER_DTYPE if order is ByteOrder.NATIVE else HEADER_DTYPE.newbyteorder("S")


def parse_header(data: bytes) -> NiftiHeader:
    """
    Decodes and validates a NIfTI-1 header.

    Args:
        data: Buffer holding at least the 348 header bytes

    Returns:
        NiftiHeader: Decoded header with endianness applied

    Raises:
        NotNifti: Bad sizeof_hdr, bad magic, or a paired-file magic
        UnsupportedDatatype: Datatype outside the supported set, or bitpix disagreeing with it
        BadDims: Rank outside 1..4 or a non-positive extent
        TruncatedData: Fewer than 348 bytes available
    """
    order = detect_endianness(data)
    if len(data) < HEADER_SIZE:
        raise TruncatedData(f"Header needs {HEADER_SIZE} bytes, got {len(data)}")

    # S4 drops trailing NULs, so compare the raw bytes
    magic = bytes(data[344:348])
    if magic == MAGIC_PAIRED:
        raise NotNifti("Paired .hdr/.img NIfTI files are not supported")
    if magic != MAGIC_SINGLE:
        raise NotNifti(f"Bad magic {magic!r}, expected {MAGIC_SINGLE!r}")

    record = np.frombuffer(data, dtype=_header_dtype(order), count=1).astype(HEADER_DTYPE)
    fields = record[0]

    dim = tuple(int(d) for d in fields["dim"])
    rank = dim[0]
    if not 1 <= rank <= 4:
        raise BadDims(f"dim[0] must be between 1 and 4, got {rank}")
    bad = [i for i in range(1, rank + 1) if dim[i] < 1]
    if bad:
        raise BadDims(f"dim[{bad[0]}] must be >= 1, got {dim[bad[0]]}")

    code = int(fields["datatype"])
    bitpix = int(fields["bitpix"])
    if code not in SUPPORTED_DATATYPES:
        raise UnsupportedDatatype(f"Datatype code {code} is not supported")
    if SUPPORTED_DATATYPES[code][1] != bitpix:
        raise UnsupportedDatatype(
            f"bitpix {bitpix} is inconsistent with datatype code {code}"
        )

    vox_offset = float(fields["vox_offset"])
    if not np.isfinite(vox_offset) or vox_offset < VOX_OFFSET or vox_offset != int(vox_offset):
        raise NotNifti(f"Invalid vox_offset {vox_offset} for a single-file image")

    return NiftiHeader(
        sizeof_hdr=int(fields["sizeof_hdr"]),
        dim=dim,
        datatype_code=code,
        bitpix=bitpix,
        pixdim=tuple(float(p) for p in fields["pixdim"]),
        vox_offset=vox_offset,
        scl_slope=float(fields["scl_slope"]),
        scl_inter=float(fields["scl_inter"]),
        magic=magic,
        srow_x=tuple(float(v) for v in fields["srow_x"]),
        srow_y=tuple(float(v) for v in fields["srow_y"]),
        srow_z=tuple(float(v) for v in fields["srow_z"]),
        byte_order=order,
        record=record,
    )


def apply_scaling(raw: float, slope: float, inter: float) -> float:
    """
    Applies NIfTI-1 intensity scaling to one value.

    A slope of 0 disables scaling.
    """
    if slope == 0:
        return raw
    return slope * raw + inter


def _scale_array(values: np.ndarray, slope: float, inter: float) -> np.ndarray:
    """
    Vectorized apply_scaling. Non-finite results are left for the caller to
    replace and count.
    """
    # slope 1, inter 0 keeps -0.0 intact for bit-exact round trips
    if slope == 0 or (slope == 1 and inter == 0):
        return values
    with np.errstate(invalid="ignore", over="ignore"):
        return values * slope + inter


def parse_volumes(data: bytes, name: str = "<memory>") -> LoadResult:
    """
    Decodes an uncompressed single-file NIfTI-1 image held in memory.

    Args:
        data: Complete file contents (header, extension flag, voxels)
        name: Name used for volume labels, "<name>[t]"

    Returns:
        LoadResult: One Volume per time point plus the non-finite count

    Raises:
        NiftiError: Any header failure, or TruncatedData if voxel bytes are missing
    """
    header = parse_header(data)
    storage, _ = SUPPORTED_DATATYPES[header.datatype_code]
    if header.byte_order is ByteOrder.SWAPPED:
        storage = storage.newbyteorder("S")

    nx, ny, nz = header.spatial_dims
    n_voxels = nx * ny * nz
    n_volumes = header.n_volumes
    offset = int(header.vox_offset)
    needed = n_voxels * n_volumes * storage.itemsize
    available = len(data) - offset
    if available < needed:
        raise TruncatedData(
            f"{name}: header promises {needed} voxel bytes at offset {offset}, "
            f"only {max(available, 0)} present"
        )

    raw = np.frombuffer(data, dtype=storage, count=n_voxels * n_volumes, offset=offset)
    values = _scale_array(raw.astype(np.float64), header.scl_slope, header.scl_inter)

    nonfinite = ~np.isfinite(values)
    replaced = int(np.count_nonzero(nonfinite))
    if replaced:
        values = values.copy()
        values[nonfinite] = 0.0

    spacing = header.spacing
    volumes = [
        Volume(nx, ny, nz, values[t * n_voxels:(t + 1) * n_voxels], spacing, f"{name}[{t}]")
        for t in range(n_volumes)
    ]
    return LoadResult(header=header, volumes=volumes, nonfinite_replaced=replaced)


def _read_bytes(path: Path) -> bytes:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except FileNotFoundError as e:
        raise NiftiIoError(f"File not found: {path}") from e
    except PermissionError as e:
        raise NiftiIoError(f"Permission denied reading file: {path}") from e
    except OSError as e:
        raise NiftiIoError(f"Error reading file {path}: {e}") from e

    # Gzip is detected by signature, not by extension
    if data[:2] == GZIP_SIGNATURE:
        try:
            data = gzip.decompress(data)
        except EOFError as e:
            raise TruncatedData(f"{path.name}: gzip stream ends early") from e
        except (gzip.BadGzipFile, zlib.error) as e:
            raise NiftiIoError(f"{path.name}: corrupt gzip stream: {e}") from e
    return data


def load_nifti(path: Union[str, os.PathLike]) -> LoadResult:
    """
    Reads a .nii or .nii.gz file into float64 volumes with a load report.

    Raises:
        NiftiIoError: File missing, unreadable or badly compressed
        NiftiError: Any decoding failure (see parse_volumes)
    """
    path = Path(path)
    result = parse_volumes(_read_bytes(path), path.name)
    header = result.header
    logger.info(
        f"Loaded {len(result.volumes)} volume(s) of {header.spatial_dims} "
        f"from {path.name} (datatype {header.datatype_code}, {header.byte_order.value} order)"
    )
    if result.nonfinite_replaced:
        logger.warning(
            f"{path.name}: replaced {result.nonfinite_replaced} non-finite voxel(s) with 0.0"
        )
    return result


def read_volumes(path: Union[str, os.PathLike]) -> List[Volume]:
    """
    Reads a NIfTI-1 file: one Volume for a rank-3 file, dim[4] for rank 4.

    Args:
        path: Path to a .nii or .nii.gz file

    Returns:
        List[Volume]: Volumes labelled "<filename>[t]"
    """
    return load_nifti(path).volumes


def header_from_volume(v: Volume) -> NiftiHeader:
    """
    Builds a fresh reference header for a volume.

    Spacing goes to pixdim and to a diagonal sform affine.
    """
    record = np.zeros(1, dtype=HEADER_DTYPE)
    record["sizeof_hdr"] = HEADER_SIZE
    record["dim"] = [3, v.nx, v.ny, v.nz, 1, 1, 1, 1]
    record["datatype"] = FLOAT64_CODE
    record["bitpix"] = 64
    record["pixdim"] = [1.0, *v.spacing, 1.0, 0.0, 0.0, 0.0]
    record["vox_offset"] = VOX_OFFSET
    record["scl_slope"] = 1.0
    record["xyzt_units"] = UNITS_MM_SEC
    record["sform_code"] = SFORM_ALIGNED
    record["srow_x"] = [v.spacing[0], 0.0, 0.0, 0.0]
    record["srow_y"] = [0.0, v.spacing[1], 0.0, 0.0]
    record["srow_z"] = [0.0, 0.0, v.spacing[2], 0.0]
    record["descrip"] = v.label.encode("ascii", "replace")[:79]
    record["magic"] = MAGIC_SINGLE
    return parse_header(record.tobytes())


def write_volume(v: Volume, reference: Optional[NiftiHeader] = None) -> bytes:
    """
    Encodes a volume as single-file little-endian float64 NIfTI-1 bytes.

    Header fields not owned by the writer (qform, sform, descrip, units)
    are carried over from the reference unchanged.

    Args:
        v: Volume to encode
        reference: Header to carry fields from; regenerated from v when None

    Returns:
        bytes: 348-byte header, 4 zero extension bytes, voxel data at offset 352

    Raises:
        HeaderMismatch: If v's extents differ from the reference's
    """
    if reference is None:
        reference = header_from_volume(v)
    if reference.spatial_dims != v.shape:
        raise HeaderMismatch(
            f"Volume {v.label!r} has dims {v.shape}, reference header has {reference.spatial_dims}"
        )

    record = reference.record.copy()
    record["sizeof_hdr"] = HEADER_SIZE
    record["dim"] = [3, v.nx, v.ny, v.nz, 1, 1, 1, 1]
    record["datatype"] = FLOAT64_CODE
    record["bitpix"] = 64
    pixdim = record["pixdim"][0]
    pixdim[1:4] = v.spacing
    record["vox_offset"] = VOX_OFFSET
    record["scl_slope"] = 1.0
    record["scl_inter"] = 0.0
    record["magic"] = MAGIC_SINGLE

    header_bytes = record.astype(HEADER_DTYPE.newbyteorder("<")).tobytes()
    voxels = v.data.astype("<f8").tobytes()
    return header_bytes + b"\x00" * EXTENSION_SIZE + voxels


def save_volume(
    path: Union[str, os.PathLike], v: Volume, reference: Optional[NiftiHeader] = None
) -> Path:
    """
    Writes a volume to disk, gzip-compressed when the name ends in .gz.

    Compression uses mtime=0, so the same volume always yields the same bytes.

    Raises:
        NiftiIoError: If the file cannot be written
    """
    path = Path(path)
    payload = write_volume(v, reference)
    if path.name.endswith(".gz"):
        payload = gzip.compress(payload, compresslevel=GZIP_LEVEL, mtime=0)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload)
    except OSError as e:
        raise NiftiIoError(f"Error writing file {path}: {e}") from e
    logger.debug(f"Wrote {v.label or 'volume'} to {path} ({len(payload)} bytes)")
    return path
