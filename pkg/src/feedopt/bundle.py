"""Plain-text matrix bundles for controllers and manifold fits.

Format, one item per line::

    # feedopt bundle v1
    meta <key> <value>
    matrix <name> <rows> <cols>
    <row 0 values, space separated>
    ...

Values are written with ``repr`` so a round trip is exact.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInput

MAGIC = "# feedopt bundle v1"


@dataclass
class Bundle:
    meta: dict = field(default_factory=dict)
    matrices: dict = field(default_factory=dict)

    def add(self, name: str, M) -> "Bundle":
        if any(c.isspace() for c in name):
            raise InvalidInput(f"matrix name {name!r} contains whitespace")
        self.matrices[name] = np.atleast_2d(np.asarray(M, dtype=float))
        return self

    def dumps(self) -> str:
        lines = [MAGIC]
        for k, v in self.meta.items():
            lines.append(f"meta {k} {v}")
        for name, M in self.matrices.items():
            lines.append(f"matrix {name} {M.shape[0]} {M.shape[1]}")
            for row in M:
                lines.append(" ".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Bundle":
        lines = text.splitlines()
        if not lines or lines[0].strip() != MAGIC:
            raise InvalidInput("not a feedopt bundle (missing header)")
        out = cls()
        i = 1
        while i < len(lines):
            line = lines[i].strip()
            i += 1
            if not line:
                continue
            kind, _, rest = line.partition(" ")
            if kind == "meta":
                key, _, value = rest.partition(" ")
                out.meta[key] = value
            elif kind == "matrix":
                try:
                    name, r, c = rest.split()
                    r, c = int(r), int(c)
                    rows = [list(map(float, lines[i + k].split())) for k in range(r)]
                except (ValueError, IndexError) as exc:
                    raise InvalidInput(f"malformed matrix block near line {i}") from exc
                M = np.array(rows, dtype=float).reshape(r, c)
                out.matrices[name] = M
                i += r
            else:
                raise InvalidInput(f"unexpected bundle line {i}: {line[:40]!r}")
        return out


def atomic_write(path, data: str | bytes) -> Path:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def save(bundle: Bundle, path) -> Path:
    return atomic_write(path, bundle.dumps())


def load(path) -> Bundle:
    try:
        return Bundle.loads(Path(path).read_text())
    except OSError as exc:
        raise InvalidInput(f"cannot read bundle {path}: {exc}") from exc
