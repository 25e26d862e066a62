"""File emission: CSV tables and grids, binary PGM images, SVG line plots."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .operators import SamplingPlan, make_hermitian, plan_from_rows


def _num(v) -> str:
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def write_csv(path, header, rows):
    """Comma-separated, header row, LF line endings."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path, required) -> dict:
    """Columns of a headed CSV file as lists of strings; checks required names."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    missing = [c for c in required if c not in header]
    if missing:
        raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")
    cols = {h: [] for h in header}
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ValueError(f"{path}:{n}: expected {len(header)} fields, got {len(row)}")
        for h, v in zip(header, row):
            cols[h].append(v.strip())
    return cols


def _floats(path, name, values):
    try:
        return np.array([float(v) for v in values])
    except ValueError:
        raise ValueError(f"{path}: non-numeric entry in column {name!r}") from None


# --------------------------------------------------------------------------- signals

def write_signal(path, t, u):
    write_csv(path, ("t", "u"), zip(map(float, t), map(float, u)))


def read_signal(path):
    cols = read_csv(path, ("t", "u"))
    return _floats(path, "t", cols["t"]), _floats(path, "u", cols["u"])


def write_measurements(path, plan: SamplingPlan, r):
    r = np.asarray(r, dtype=complex)
    write_csv(path, ("row_index", "re", "im"),
              ((row, float(v.real), float(v.imag)) for row, v in zip(plan.rows, r)))


def read_measurements(path, M: int, T: float | None = None):
    """Plan and data vector from a (row_index, re, im) file.

    Rows from the low half suffice; missing conjugate rows are filled in.
    Rows given on both sides must already be conjugate pairs.
    """
    cols = read_csv(path, ("row_index", "re", "im"))
    try:
        rows = [int(v) for v in cols["row_index"]]
    except ValueError:
        raise ValueError(f"{path}: row_index must be integer") from None
    re = _floats(path, "re", cols["re"])
    im = _floats(path, "im", cols["im"])
    if not rows:
        raise ValueError(f"{path}: no measurements")
    if len(set(rows)) != len(rows):
        raise ValueError(f"{path}: duplicate row_index")
    given = dict(zip(rows, re + 1j * im))
    plan = plan_from_rows(M, rows, T=T)
    low = {row: given[row] if row in given else np.conj(given[M - row + 2])
           for row in plan.low_rows()}
    r = make_hermitian(plan, low)
    pos = {row: i for i, row in enumerate(plan.rows)}
    for row, val in given.items():
        if abs(r[pos[row]] - val) > 1e-9 * max(1.0, abs(val)):
            raise ValueError(f"{path}: row {row} is not the conjugate of its partner row")
    return plan, r


# --------------------------------------------------------------------------- grids and images

def write_grid(path, values, x, z):
    """2D array (nz, nx) as CSV; header is 'z' followed by the x coordinates."""
    values = np.asarray(values, dtype=float)
    header = ["z"] + [_num(v) for v in x]
    write_csv(path, header, ([float(zz)] + list(map(float, row)) for zz, row in zip(z, values)))


def write_pgm(path, values, symmetric: bool = True):
    """8-bit binary PGM (P5, maxval 255) plus a ``.txt`` sidecar with the mapping.

    ``symmetric`` maps [-max|v|, max|v|] linearly onto [0, 255]; otherwise
    [0, max v] is used (for magnitudes).
    """
    a = np.asarray(values, dtype=float)
    if a.ndim != 2:
        raise ValueError("PGM needs a 2D array")
    if not np.all(np.isfinite(a)):
        raise ValueError("PGM input has non-finite values")
    top = float(np.abs(a).max()) if a.size else 0.0
    if symmetric:
        lo, hi = -top, top
    else:
        if np.any(a < 0):
            raise ValueError("negative values need the symmetric mapping")
        lo, hi = 0.0, top
    if hi > lo:
        img = np.rint((a - lo) / (hi - lo) * 255.0)
    else:
        img = np.full(a.shape, 127.0 if symmetric else 0.0)
    img = np.clip(img, 0, 255).astype(np.uint8)
    nrow, ncol = img.shape
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{ncol} {nrow}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
    with open(path.with_suffix(path.suffix + ".txt"), "w", newline="\n") as fh:
        fh.write(f"file {path.name}\n")
        fh.write(f"width {ncol}\nheight {nrow}\n")
        fh.write(f"mapping linear\nvalue_at_0 {_num(lo)}\nvalue_at_255 {_num(hi)}\n")
    return path


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    ncol, nrow, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueError(f"{path}: maxval {maxval} unsupported")
    body = parts[4]
    return np.frombuffer(body[:ncol * nrow], dtype=np.uint8).reshape(nrow, ncol)


# --------------------------------------------------------------------------- plots

_PALETTE = ("#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e")


def write_svg(path, t, series: dict, title: str = "", width: int = 720, height: int = 360):
    """Line overlay of several signals sharing the abscissa ``t``."""
    t = np.asarray(t, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    pad_l, pad_r, pad_t, pad_b = 60, 130, 30, 40
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b
    lo = min(float(v.min()) for v in ys.values())
    hi = max(float(v.max()) for v in ys.values())
    if hi <= lo:
        lo, hi = lo - 1.0, hi + 1.0
    t0, t1 = float(t[0]), float(t[-1]) if t[-1] > t[0] else float(t[0]) + 1.0

    def px(tt):
        return pad_l + (tt - t0) / (t1 - t0) * pw

    def py(vv):
        return pad_t + (hi - vv) / (hi - lo) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" '
           f'stroke="#888"/>']
    if title:
        out.append(f'<text x="{pad_l}" y="{pad_t - 10}" font-size="13" '
                   f'font-family="sans-serif">{_esc(title)}</text>')
    for val in (lo, hi):
        out.append(f'<text x="{pad_l - 5}" y="{py(val):.2f}" font-size="10" text-anchor="end" '
                   f'font-family="sans-serif">{val:.3g}</text>')
    for val in (t0, t1):
        out.append(f'<text x="{px(val):.2f}" y="{height - pad_b + 15}" font-size="10" '
                   f'text-anchor="middle" font-family="sans-serif">{val:.3g} s</text>')
    for i, (name, y) in enumerate(ys.items()):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(t, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        ly = pad_t + 15 + 16 * i
        out.append(f'<line x1="{width - pad_r + 10}" y1="{ly}" x2="{width - pad_r + 30}" '
                   f'y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{width - pad_r + 35}" y="{ly + 4}" font-size="11" '
                   f'font-family="sans-serif">{_esc(name)}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
    return path


def _esc(s: str) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_config(path, config: dict):
    """Effective configuration as sorted JSON."""
    def clean(v):
        if isinstance(v, (np.floating, np.integer)):
            return v.item()
        if isinstance(v, (tuple, list)):
            return [clean(x) for x in v]
        if isinstance(v, Path):
            return str(v)
        return v
    Path(path).write_text(json.dumps({k: clean(v) for k, v in config.items()},
                                     indent=2, sort_keys=True) + "\n")
