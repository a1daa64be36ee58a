"""UV-space makeup transfer: color, pattern and fusion stages."""

from ._core import (
    Error,
    Models,
    fuse,
    histogram_match,
    interpolate,
    make_faces,
    miou,
    ms_ssim,
    read_image,
    regions,
    write_image,
)

__all__ = [
    "Error",
    "Models",
    "fuse",
    "histogram_match",
    "interpolate",
    "make_faces",
    "miou",
    "ms_ssim",
    "read_image",
    "regions",
    "write_image",
]
