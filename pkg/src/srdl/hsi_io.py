"""Hyperspectral cube container, file formats, and preprocessing.

Three on-disk layouts are understood:

* ``native``: ``<name>.json`` header plus ``<name>.bin`` payload of
  little-endian float64 values in pixel-major order, with an optional
  ``<name>.gt.csv`` ground-truth sidecar.
* ``envi``: an ENVI ``.hdr`` text header next to an uncompressed raw binary
  file in BSQ, BIL or BIP interleave.
* ``csv``: first line ``height,width,bands``, then one line of ``bands``
  values per pixel in row-major pixel order.

Ground truth is stored either as CSV (any line layout, ``height*width``
integers read in row-major order) or as a 16-bit binary PGM.
"""

import csv
import json
import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class FormatError(ValueError):
    """Malformed or inconsistent input file."""


@dataclass(frozen=True)
class PixelIndex:
    row: int
    col: int
    width: int

    @property
    def flat(self):
        return self.row * self.width + self.col

    @classmethod
    def from_flat(cls, flat, width):
        row, col = divmod(int(flat), width)
        return cls(row, col, width)


class HsiCube:
    """An H x W image whose pixels are D-band spectra.

    Parameters
    ----------
    data : array_like, shape (H, W, D) or (H, W)
        Spectral values. A 2-D array is treated as a single band.
    gt : array_like of int, shape (H, W), optional
        Class labels, 0 meaning unlabeled.
    """

    def __init__(self, data, gt=None):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3:
            raise ValueError(f"cube data must be 3-D, got shape {data.shape}")
        H, W, D = data.shape
        if H < 2 or W < 2 or D < 1:
            raise ValueError(f"cube needs height>=2, width>=2, bands>=1; got {data.shape}")
        bad = np.flatnonzero(~np.isfinite(data.ravel()))
        if bad.size:
            raise FormatError(f"non-finite value at offset {bad[0]}")
        self.data = np.ascontiguousarray(data)
        self.data.flags.writeable = False
        if gt is not None:
            gt = np.asarray(gt)
            if gt.size != H * W:
                raise ValueError(f"gt has {gt.size} entries, expected {H * W}")
            gt = gt.reshape(H, W)
            if np.any(gt < 0) or not np.all(gt == np.round(gt)):
                raise ValueError("gt labels must be non-negative integers")
            gt = np.ascontiguousarray(gt, dtype=np.int64)
            gt.flags.writeable = False
        self.gt = gt

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def bands(self):
        return self.data.shape[2]

    @property
    def n_pixels(self):
        return self.height * self.width

    @property
    def shape(self):
        return self.data.shape

    def spectra(self):
        """(N, D) view with one row per pixel in row-major order."""
        return self.data.reshape(-1, self.bands)

    def spectrum(self, row, col):
        return self.data[row, col]

    def pixel(self, flat):
        return PixelIndex.from_flat(flat, self.width)

    def __eq__(self, other):
        if not isinstance(other, HsiCube):
            return NotImplemented
        if self.data.shape != other.data.shape or not np.array_equal(self.data, other.data):
            return False
        if (self.gt is None) != (other.gt is None):
            return False
        return self.gt is None or np.array_equal(self.gt, other.gt)

    __hash__ = None

    def __repr__(self):
        gt = "" if self.gt is None else ", gt"
        return f"HsiCube({self.height}x{self.width}x{self.bands}{gt})"


# --- native format ---------------------------------------------------------

def _native_stem(path):
    path = Path(path)
    name = path.name
    for suffix in (".gt.csv", ".json", ".bin"):
        if name.endswith(suffix):
            return path.with_name(name[: -len(suffix)])
    return path


def save_cube(cube, path):
    """Write ``cube`` in the native format; ``path`` may name the stem or the .json."""
    if not isinstance(cube, HsiCube):
        raise TypeError("save_cube expects an HsiCube")
    if cube.bands < 1:
        raise ValueError("cannot save a cube with no bands")
    stem = _native_stem(path)
    header = {
        "height": cube.height,
        "width": cube.width,
        "bands": cube.bands,
        "dtype": "f64le",
        "order": "pixel-major",
    }
    stem.parent.mkdir(parents=True, exist_ok=True)
    with open(f"{stem}.json", "w", encoding="utf-8") as fh:
        json.dump(header, fh)
        fh.write("\n")
    cube.data.astype("<f8").tofile(f"{stem}.bin")
    if cube.gt is not None:
        save_gt(cube.gt, f"{stem}.gt.csv")


def _load_native(path):
    stem = _native_stem(path)
    try:
        with open(f"{stem}.json", encoding="utf-8") as fh:
            header = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"malformed header {stem}.json: {exc}") from None
    try:
        H, W, D = int(header["height"]), int(header["width"]), int(header["bands"])
    except (KeyError, TypeError, ValueError):
        raise FormatError(f"header {stem}.json lacks integer height/width/bands") from None
    if header.get("dtype", "f64le") != "f64le" or header.get("order", "pixel-major") != "pixel-major":
        raise FormatError("native payload must be f64le pixel-major")
    payload = np.fromfile(f"{stem}.bin", dtype="<f8")
    if payload.size != H * W * D:
        raise FormatError(
            f"payload has {payload.size} values, header implies {H}*{W}*{D}={H * W * D}")
    gt = None
    if os.path.exists(f"{stem}.gt.csv"):
        gt = load_gt(f"{stem}.gt.csv", H, W)
    return HsiCube(payload.reshape(H, W, D), gt)


# --- ENVI ------------------------------------------------------------------

_ENVI_DTYPES = {
    1: np.uint8, 2: np.int16, 3: np.int32, 4: np.float32, 5: np.float64,
    12: np.uint16, 13: np.uint32, 14: np.int64, 15: np.uint64,
}


def parse_envi_header(text):
    """Parse ENVI header text into a lower-cased key -> string dict."""
    if not text.lstrip().upper().startswith("ENVI"):
        raise FormatError("ENVI header must start with 'ENVI'")
    fields = {}
    # brace-delimited values may span lines
    for m in re.finditer(r"^\s*([^=\n]+?)\s*=\s*(\{[^}]*\}|[^\n]*)", text, re.M):
        fields[m.group(1).strip().lower()] = m.group(2).strip()
    return fields


def _envi_data_path(hdr_path):
    hdr_path = Path(hdr_path)
    stem = hdr_path.with_suffix("")
    for cand in (stem, *(stem.with_suffix(s) for s in (".raw", ".img", ".dat", ".bsq", ".bil", ".bip"))):
        if cand.exists() and cand != hdr_path:
            return cand
    raise FileNotFoundError(f"no binary payload found next to {hdr_path}")


def _load_envi(path, data_path=None):
    path = Path(path)
    if path.suffix.lower() != ".hdr":
        hdr = path.with_suffix(".hdr")
        if not hdr.exists():
            hdr = Path(str(path) + ".hdr")
        data_path = data_path or path
        path = hdr
    fields = parse_envi_header(path.read_text(encoding="utf-8", errors="replace"))
    try:
        W = int(fields["samples"])
        H = int(fields["lines"])
        D = int(fields["bands"])
        code = int(fields["data type"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"ENVI header missing or bad field: {exc}") from None
    if code not in _ENVI_DTYPES:
        raise FormatError(f"unsupported ENVI data type {code}")
    interleave = fields.get("interleave", "bsq").lower()
    if interleave not in ("bsq", "bil", "bip"):
        raise FormatError(f"unsupported interleave {interleave!r}")
    if fields.get("file compression", "0") not in ("0", ""):
        raise FormatError("compressed ENVI files are not supported")
    order = ">" if fields.get("byte order", "0") == "1" else "<"
    dtype = np.dtype(_ENVI_DTYPES[code]).newbyteorder(order)
    offset = int(fields.get("header offset", "0"))
    data_path = Path(data_path) if data_path else _envi_data_path(path)
    raw = np.fromfile(data_path, dtype=dtype, offset=offset)
    if raw.size != H * W * D:
        raise FormatError(f"ENVI payload has {raw.size} values, header implies {H * W * D}")
    raw = raw.astype(np.float64)
    if interleave == "bsq":
        data = raw.reshape(D, H, W).transpose(1, 2, 0)
    elif interleave == "bil":
        data = raw.reshape(H, D, W).transpose(0, 2, 1)
    else:
        data = raw.reshape(H, W, D)
    return HsiCube(data)


def save_envi(cube, hdr_path, interleave="bsq"):
    """Write an uncompressed float64 ENVI file pair (mostly for tests and interop)."""
    hdr_path = Path(hdr_path)
    data = cube.data
    if interleave == "bsq":
        payload = data.transpose(2, 0, 1)
    elif interleave == "bil":
        payload = data.transpose(0, 2, 1)
    elif interleave == "bip":
        payload = data
    else:
        raise ValueError(f"unknown interleave {interleave!r}")
    header = (
        "ENVI\n"
        f"samples = {cube.width}\nlines = {cube.height}\nbands = {cube.bands}\n"
        "header offset = 0\nfile type = ENVI Standard\ndata type = 5\n"
        f"interleave = {interleave}\nbyte order = 0\n"
    )
    hdr_path.write_text(header, encoding="utf-8")
    np.ascontiguousarray(payload).astype("<f8").tofile(hdr_path.with_suffix(".raw"))


# --- CSV -------------------------------------------------------------------

def _load_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise FormatError(f"{path}: empty file")
    try:
        H, W, D = (int(v) for v in rows[0])
    except ValueError:
        raise FormatError(f"{path}: first line must be 'height,width,bands'") from None
    body = rows[1:]
    if len(body) != H * W:
        raise FormatError(f"{path}: {len(body)} pixel rows, header implies {H * W}")
    try:
        values = np.array([[float(v) for v in r] for r in body])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if values.shape != (H * W, D):
        raise FormatError(f"{path}: every pixel row needs {D} values")
    return HsiCube(values.reshape(H, W, D))


def save_csv_cube(cube, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([cube.height, cube.width, cube.bands])
        for spec in cube.spectra():
            w.writerow([repr(float(v)) for v in spec])


def load_cube(path, format=None, gt_path=None):
    """Read a cube from disk.

    ``format`` is one of ``"native"``, ``"envi"``, ``"csv"``; when omitted it
    is guessed from the extension. ``gt_path`` overrides any sidecar.
    """
    path = Path(path)
    if format is None:
        suffix = path.suffix.lower()
        format = {".hdr": "envi", ".csv": "csv"}.get(suffix, "native")
    if format == "native":
        stem = _native_stem(path)
        if not Path(f"{stem}.json").exists():
            raise FileNotFoundError(f"{stem}.json")
        cube = _load_native(path)
    elif format == "envi":
        if not path.exists():
            raise FileNotFoundError(str(path))
        cube = _load_envi(path)
    elif format == "csv":
        if not path.exists():
            raise FileNotFoundError(str(path))
        cube = _load_csv(path)
    else:
        raise ValueError(f"unknown format {format!r}")
    if gt_path is not None:
        cube = HsiCube(cube.data, load_gt(gt_path, cube.height, cube.width))
    return cube


# --- ground truth and label maps --------------------------------------------

def save_gt(labels, path):
    """Write a 2-D integer map as CSV, one image row per line."""
    labels = np.asarray(labels)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        for row in labels:
            w.writerow([int(v) for v in row])


def write_pgm16(labels, path):
    """Binary 16-bit PGM (big-endian samples, maxval 65535)."""
    labels = np.asarray(labels)
    if labels.min(initial=0) < 0 or labels.max(initial=0) > 65535:
        raise ValueError("labels must fit in 16 bits")
    H, W = labels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{W} {H}\n65535\n".encode("ascii"))
        fh.write(labels.astype(">u2").tobytes())


def read_pgm(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        m = re.compile(rb"\s*(#[^\n]*\n\s*)*(\S+)").match(blob, pos)
        if m is None:
            raise FormatError(f"{path}: truncated PGM header")
        tokens.append(m.group(2))
        pos = m.end()
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: only binary P5 PGM is supported")
    W, H, maxval = (int(t) for t in tokens[1:])
    pos += 1
    dtype = ">u2" if maxval > 255 else "u1"
    arr = np.frombuffer(blob, dtype=dtype, count=H * W, offset=pos)
    return arr.reshape(H, W).astype(np.int64)


def read_label_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        return np.array([[int(float(v)) for v in r] for r in rows], dtype=np.int64)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def load_gt(path, height, width):
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        gt = read_pgm(path)
    else:
        with open(path, newline="", encoding="utf-8") as fh:
            vals = [v for r in csv.reader(fh) for v in r if v.strip()]
        try:
            gt = np.array([int(float(v)) for v in vals], dtype=np.int64)
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from None
    if gt.size != height * width:
        raise FormatError(f"{path}: {gt.size} labels, expected {height * width}")
    return gt.reshape(height, width)


def load_labels(path):
    """Read a label map written by the CLI (PGM or grid CSV)."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return read_pgm(path)
    return read_label_csv(path)


# --- preprocessing -----------------------------------------------------------

def jitter_duplicates(cube, variance, seed):
    """Add i.i.d. N(0, variance) noise to every value so duplicate pixels separate."""
    if not (0.0 < variance <= 1e-3):
        raise ValueError(f"jitter variance must lie in (0, 1e-3], got {variance}")
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, np.sqrt(variance), size=cube.data.shape)
    return HsiCube(cube.data + noise, cube.gt)


def crop(cube, rows, cols):
    """Sub-cube over half-open ``rows=(start, stop)`` and ``cols=(start, stop)``."""
    r0, r1 = rows
    c0, c1 = cols
    if not (0 <= r0 < r1 <= cube.height and 0 <= c0 < c1 <= cube.width):
        raise IndexError(
            f"crop rows {rows} cols {cols} outside {cube.height}x{cube.width}")
    gt = None if cube.gt is None else cube.gt[r0:r1, c0:c1]
    return HsiCube(cube.data[r0:r1, c0:c1], gt)


def synth_stripes(height, width, bands, classes, noise_sigma, seed=0,
                  amplitude=1.0, offset=0.5):
    """Horizontal-stripe test scene with ``classes`` spectrally distinct regions.

    Class ``c`` (1-based) has mean spectrum ``offset + amplitude * e_c``, where
    ``e_c`` is the c-th standard basis vector of R^bands; Gaussian noise of
    standard deviation ``noise_sigma`` is added independently to every value.
    Stripe heights differ by at most one row.
    """
    if classes < 1 or classes > height:
        raise ValueError(f"need 1 <= classes <= height, got classes={classes}, height={height}")
    if bands < classes:
        raise ValueError(f"need bands >= classes, got bands={bands}, classes={classes}")
    if height < 2 or width < 2:
        raise ValueError("degenerate image dimensions")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    rng = np.random.default_rng(seed)
    stripe = (np.arange(height) * classes) // height
    gt = np.repeat(stripe[:, None] + 1, width, axis=1)
    means = np.full((classes, bands), float(offset))
    means[np.arange(classes), np.arange(classes)] += amplitude
    data = means[gt - 1]
    if noise_sigma > 0:
        data = data + rng.normal(0.0, noise_sigma, size=data.shape)
    return HsiCube(data, gt)
