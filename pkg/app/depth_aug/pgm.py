import csv
import logging
from pathlib import Path

import numpy as np
from PIL import Image

from app.depth_aug.models import DepthImage, Histogram
from app.errors import ParseError

logger = logging.getLogger(__name__)

MAXVAL = 65535


def _header_comments(path):
    """Returns the comment lines of a P5 header, without the leading '#'."""
    comments = []
    fields = 0
    with open(path, "rb") as f:
        magic = f.readline().strip()
        if magic != b"P5":
            raise ParseError(f"{path}: not a binary graymap (magic {magic!r})", line=1)
        # width, height and maxval may share lines; comments sit on their own
        while fields < 3:
            line = f.readline()
            if not line:
                raise ParseError(f"{path}: truncated header")
            text = line.decode("ascii", errors="replace").strip()
            if text.startswith("#"):
                comments.append(text[1:].strip())
                continue
            fields += len(text.split())
    return comments


def _comment_value(comments, key):
    for comment in comments:
        if comment.startswith(key):
            try:
                return float(comment[len(key) :].strip())
            except ValueError:
                raise ParseError(f"bad value in header comment {comment!r}")
    return None


def read_pgm_header(path):
    """Returns (scale, max_depth) in meters; either may be None but not both."""
    comments = _header_comments(path)
    max_depth = _comment_value(comments, "max-depth meters")
    scale = _comment_value(comments, "scale meters-per-unit")
    if max_depth is None and scale is None:
        raise ParseError(f"{path}: header declares neither scale nor max depth")
    return scale, max_depth


def read_pgm(path) -> DepthImage:
    scale, max_depth = read_pgm_header(path)
    if scale is None:
        scale = max_depth / MAXVAL

    with Image.open(path) as image:
        units = np.asarray(image, dtype=np.float64)
    values = units * scale
    if max_depth is None:
        max_depth = MAXVAL * scale
    return DepthImage(np.minimum(values, max_depth), max_depth)


def write_pgm(img: DepthImage, path, scale=None):
    scale = img.max_depth / MAXVAL if scale is None else float(scale)
    units = np.clip(np.rint(img.values / scale), 0, MAXVAL).astype(">u2")
    header = (
        f"P5\n# scale meters-per-unit {scale!r}\n# max-depth meters {img.max_depth!r}\n"
        f"{img.width} {img.height}\n{MAXVAL}\n"
    )
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(units.tobytes())
    logger.info(f"Wrote {img.width}x{img.height} depth image to {path}")


def write_histogram_csv(hist: Histogram, path, float_format=".10g"):
    with open(Path(path), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["bin_center", "proportion"])
        for center, proportion in zip(hist.centers, hist.proportions):
            writer.writerow([format(center, float_format), format(proportion, float_format)])
    logger.info(f"Wrote {len(hist)}-bin histogram to {path}")
