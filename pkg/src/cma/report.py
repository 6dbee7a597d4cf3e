"""Deterministic artifact emission: JSON, CSV, field dumps and a sha256 manifest."""
from __future__ import annotations

import hashlib
import json
import math
import os
import threading

import numpy as np

from . import torus

MANIFEST = "MANIFEST.sha256"


def fmt_float(x) -> str:
    """17 significant digits; non-finite values become the empty string."""
    x = float(x)
    if not math.isfinite(x):
        return ""
    return "%.17g" % x


def _json(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        s = fmt_float(obj)
        return s if s else "null"
    if isinstance(obj, str):
        return _quote(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_quote(str(k))}: {_json(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{pad}{_json(v, indent, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _quote(s: str) -> str:
    return json.dumps(s)


def dumps_json(obj, indent: int = 2) -> str:
    """JSON text with every float written as %.17g (nan and inf become null)."""
    return _json(obj, indent, 0) + "\n"


def csv_text(header, rows) -> str:
    """Comma separated, floats %.17g, missing or non-finite numbers left empty."""
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if v is None:
                cells.append("")
            elif isinstance(v, (float, np.floating)):
                cells.append(fmt_float(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


class ArtifactWriter:
    """Writes every artifact of one run through a lock and tracks them for the manifest.

    ``discard`` removes everything written so far (used when a run fails).
    """

    def __init__(self, out_dir):
        self.out_dir = os.fspath(out_dir)
        self._created_dir = not os.path.isdir(self.out_dir)
        os.makedirs(self.out_dir, exist_ok=True)
        self._lock = threading.Lock()
        self.files: list = []

    def path(self, name: str) -> str:
        if os.sep in name or name in ("", ".", ".."):
            raise ValueError(f"artifact names must be plain file names, got {name!r}")
        return os.path.join(self.out_dir, name)

    def _track(self, name):
        if name not in self.files:
            self.files.append(name)

    def write_text(self, name: str, text: str) -> str:
        with self._lock:
            p = self.path(name)
            with open(p, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            self._track(name)
        return p

    def write_json(self, name: str, obj) -> str:
        return self.write_text(name, dumps_json(obj))

    def write_csv(self, name: str, header, rows) -> str:
        return self.write_text(name, csv_text(header, rows))

    def write_field(self, name: str, f) -> str:
        with self._lock:
            p = self.path(name)
            torus.write_field(p, f)
            self._track(name)
        return p

    def write_manifest(self) -> str:
        """``<sha256>  <name>`` per artifact in sorted order (``sha256sum -c`` compatible)."""
        lines = []
        for name in sorted(self.files):
            h = hashlib.sha256()
            with open(self.path(name), "rb") as fh:
                for chunk in iter(lambda: fh.read(1 << 20), b""):
                    h.update(chunk)
            lines.append(f"{h.hexdigest()}  {name}")
        with self._lock:
            with open(self.path(MANIFEST), "w", encoding="utf-8", newline="\n") as fh:
                fh.write("\n".join(lines) + "\n")
        return self.path(MANIFEST)

    def discard(self) -> None:
        with self._lock:
            for name in self.files + [MANIFEST]:
                try:
                    os.remove(self.path(name))
                except FileNotFoundError:
                    pass
            self.files = []
            if self._created_dir:
                try:
                    os.rmdir(self.out_dir)
                except OSError:
                    pass
