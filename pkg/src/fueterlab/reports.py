"""Run directories, manifests, CSV tables and SVG polyline plots."""
from __future__ import annotations

import csv
import hashlib
import json
import os
import platform
from pathlib import Path

import numpy as np

__all__ = [
    "RunDirectory",
    "format_number",
    "write_csv",
    "read_csv",
    "write_svg",
    "sha256_bytes",
]


def format_number(x) -> str:
    """17 significant digits, '.' decimal point, independent of locale."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return str(x)


def write_csv(path, columns, rows, comments=()) -> Path:
    """Write '#'-prefixed comment lines, a header row and the data rows."""
    path = Path(path)
    with path.open("w", newline="\n", encoding="utf-8") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_number(v) for v in row])
    return path


def read_csv(path):
    """Return (comments, columns, rows as lists of strings)."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    comments = [line[1:].strip() for line in text if line.startswith("#")]
    lines = list(csv.reader(line for line in text if line and not line.startswith("#")))
    return comments, lines[0], lines[1:]


def write_svg(path, series: dict, title: str = "", width: int = 640, height: int = 400) -> Path:
    """Plot named (x, y) series as polylines with a frame and a zero line."""
    path = Path(path)
    pad = 40
    xs = [np.asarray(x, dtype=float) for x, _ in series.values()]
    ys = [np.asarray(y, dtype=float) for _, y in series.values()]
    finite = [v[np.isfinite(v)] for v in ys]
    x0 = min((x.min() for x in xs if x.size), default=0.0)
    x1 = max((x.max() for x in xs if x.size), default=1.0)
    y0 = min((v.min() for v in finite if v.size), default=-1.0)
    y1 = max((v.max() for v in finite if v.size), default=1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def px(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def py(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
        'fill="none" stroke="black"/>',
    ]
    if y0 < 0 < y1:
        parts.append(
            f'<line x1="{pad}" y1="{py(0):.3f}" x2="{width - pad}" y2="{py(0):.3f}" '
            'stroke="gray" stroke-dasharray="4 3"/>'
        )
    if title:
        parts.append(f'<text x="{pad}" y="{pad - 12}" font-size="14">{title}</text>')
    parts.append(f'<text x="{pad}" y="{height - 12}" font-size="11">{x0:.4g}</text>')
    parts.append(f'<text x="{width - pad - 40}" y="{height - 12}" font-size="11">{x1:.4g}</text>')
    parts.append(f'<text x="4" y="{height - pad}" font-size="11">{y0:.4g}</text>')
    parts.append(f'<text x="4" y="{pad + 10}" font-size="11">{y1:.4g}</text>')
    for (x, y) in zip(xs, ys):
        pts = " ".join(f"{px(a):.3f},{py(b):.3f}" for a, b in zip(x, y) if np.isfinite(b))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="black" stroke-width="1"/>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return path


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class RunDirectory:
    """One output directory per run, with manifest.json listing artifacts."""

    def __init__(self, path, force: bool = False):
        self.path = Path(path)
        if self.path.exists() and any(self.path.iterdir()) and not force:
            raise FileExistsError(f"{self.path} exists and is not empty; pass --force to overwrite")
        self.path.mkdir(parents=True, exist_ok=True)
        self.artifacts: list[str] = []

    def file(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.path / name

    def write_manifest(self, command: str, argv, config: dict, inputs: dict, wall_clock: float, status: str):
        from . import __version__

        digest = hashlib.sha256()
        for key in sorted(inputs):
            digest.update(key.encode())
            digest.update(inputs[key])
        manifest = {
            "command": command,
            "argv": list(argv),
            "config": config,
            "artifacts": sorted(set(self.artifacts)),
            "wall_clock_seconds": wall_clock,
            "version": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
            "threads": os.environ.get("FUETERLAB_THREADS", ""),
            "input_sha256": digest.hexdigest(),
            "status": status,
        }
        (self.path / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
        return manifest
