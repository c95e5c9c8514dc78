"""WAV, CSV, PNG and JSON persistence.

WAV files are RIFF mono 32-bit float. CSV follows RFC 4180 (header row,
CRLF line ends, "." decimal separator). PNGs are 8-bit grayscale, min-max
normalized per image, so identical arrays give identical pixels.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image
from scipy.io import wavfile

from .errors import InvalidInputError


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# -- WAV ---------------------------------------------------------------------


def write_wav(path, samples, sample_rate_hz: float) -> None:
    rate = int(round(sample_rate_hz))
    if rate <= 0 or abs(rate - sample_rate_hz) > 1e-9:
        raise InvalidInputError(f"WAV needs an integer sample rate, got {sample_rate_hz}")
    x = np.asarray(samples, dtype=np.float32)
    if x.ndim != 1:
        raise InvalidInputError("only mono WAV output is supported")
    buf = io.BytesIO()
    wavfile.write(buf, rate, x)
    atomic_write_bytes(path, buf.getvalue())


def read_wav(path) -> tuple[np.ndarray, float]:
    """(samples as float64, rate). Integer PCM is scaled to [-1, 1)."""
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise InvalidInputError(f"{path}: no such file") from None
    except (ValueError, EOFError, OSError) as exc:
        raise InvalidInputError(f"{path}: not a readable WAV file ({exc})") from None
    if data.ndim != 1:
        raise InvalidInputError(f"{path}: expected mono audio, got {data.shape[1]} channels")
    if np.issubdtype(data.dtype, np.integer):
        if data.dtype == np.uint8:
            data = (data.astype(np.float64) - 128.0) / 128.0
        else:
            data = data.astype(np.float64) / float(-np.iinfo(data.dtype).min)
    return data.astype(np.float64), float(rate)


# -- CSV ---------------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".10g")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise InvalidInputError(f"row has {len(row)} cells, header has {len(header)}")
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    atomic_write_bytes(path, csv_text(header, rows).encode("utf-8"))


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidInputError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def write_matrix_csv(path, values, row_labels=None, col_labels=None) -> None:
    values = np.asarray(values)
    cols = list(col_labels) if col_labels is not None else [f"c{j}" for j in range(values.shape[1])]
    if row_labels is None:
        write_csv(path, cols, values.tolist())
    else:
        write_csv(path, [""] + cols, [[r] + list(v) for r, v in zip(row_labels, values.tolist())])


# -- PNG ---------------------------------------------------------------------


def to_gray8(values) -> np.ndarray:
    """Min-max normalize to 0..255; a constant image maps to all zeros."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = float(v.min()), float(v.max())
    if hi <= lo:
        return np.zeros(v.shape, dtype=np.uint8)
    return np.round((v - lo) / (hi - lo) * 255.0).astype(np.uint8)


def write_png(path, image) -> None:
    img = np.asarray(image)
    if img.dtype != np.uint8 or img.ndim != 2:
        raise InvalidInputError("write_png expects a 2-D uint8 array")
    buf = io.BytesIO()
    Image.fromarray(img, mode="L").save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def read_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L"))


def spectrogram_image(values) -> np.ndarray:
    """[frames x mels] -> image with time on x and low frequencies at the bottom."""
    return to_gray8(np.asarray(values).T[::-1])


def confusion_image(confusion, cell_px: int = 32) -> np.ndarray:
    """Heatmap of a confusion matrix, one square block per cell, darker = fewer."""
    c = np.asarray(confusion, dtype=np.float64)
    return np.kron(to_gray8(c), np.ones((cell_px, cell_px), dtype=np.uint8))


# -- JSON --------------------------------------------------------------------


def write_json(path, obj) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    atomic_write_bytes(path, text.encode("utf-8"))


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
