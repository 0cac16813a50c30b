"""
Output writers and readers.
CSV tables carry a '#'-prefixed provenance block; images are binary PGM.
"""

import csv
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def format_value(value: Any) -> str:
    """Stable text form: floats with 10 significant digits, None as empty."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.10g}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(format_value(v) for v in value) + "]"
    return str(value)


def provenance_lines(provenance: Mapping[str, Any], separator: str = " = ") -> List[str]:
    """'# key = value' lines in insertion order; nested mappings use dotted keys."""
    lines = []
    for key, value in provenance.items():
        if isinstance(value, Mapping):
            lines.extend(provenance_lines({f"{key}.{k}": v for k, v in value.items()}, separator))
        else:
            lines.append(f"# {key}{separator}{format_value(value)}")
    return lines


def write_csv(
    path: PathLike,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    provenance: Optional[Mapping[str, Any]] = None,
    separator: str = " = ",
) -> Path:
    """Write a table with '\\n' line endings and an optional provenance block."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        for line in provenance_lines(provenance or {}, separator):
            handle.write(line + "\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    logger.debug(f"wrote {path}")
    return path


def read_csv(path: PathLike) -> Tuple[Dict[str, str], List[str], List[List[str]]]:
    """Return (provenance, header, rows) from a file written by write_csv."""
    meta: Dict[str, str] = {}
    body: List[str] = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                meta[key.strip()] = value.strip()
            elif line.strip():
                body.append(line)
    table = list(csv.reader(body))
    if not table:
        return meta, [], []
    return meta, table[0], table[1:]


def write_pgm(path: PathLike, image: np.ndarray) -> Path:
    """Binary 8-bit PGM (P5)."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError(f"PGM needs a 2-D image, got shape {image.shape}")
    data = np.clip(image, 0, 255).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    height, width = data.shape
    with open(path, "wb") as handle:
        handle.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        handle.write(data.tobytes())
    logger.debug(f"wrote {path} ({width}x{height})")
    return path


def read_pgm(path: PathLike) -> np.ndarray:
    """Read a PGM written by write_pgm (no comment lines)."""
    raw = Path(path).read_bytes()
    parts = raw.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError(f"{path} is not a binary PGM")
    width, height = (int(v) for v in parts[1].split())
    maxval = int(parts[2])
    if maxval != 255:
        raise ValueError(f"unsupported PGM depth {maxval}")
    data = np.frombuffer(parts[3][: width * height], dtype=np.uint8)
    return data.reshape(height, width)
