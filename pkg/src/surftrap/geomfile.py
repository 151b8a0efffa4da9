"""Line-oriented geometry files for gap curves.

Grammar (``#`` starts a comment anywhere on a line, blank lines are ignored)::

    [potentials]
    rf = 1.0            # label = scaled potential
    dc = 0.0

    [curve inner electrode=rf other=dc]
    # t  x  y  g  [alpha]
    0.0  1.0  0.0  0.05
    ...

A curve section names its id, the electrode on the left of the direction of
travel (``electrode=``, required) and optionally the electrode on the right
(``other=``, ground when omitted). Rows hold t, x, y, g and optionally a
solved amplitude. A curve whose last row repeats the first position is
closed; its amplitude column then omits the repeated row's value (or repeats
it, which is accepted when equal). Amplitudes must be given on all rows of
a curve or none.
"""

import math
import re

import numpy as np

from .errors import ParseError
from .gapsolver import GapCurve

__all__ = ["parse_geometry", "read_geometry", "format_geometry"]

_LABEL = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")


def _float(tok, lineno, what):
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"cannot read {what} from {tok!r}", lineno) from None
    if not math.isfinite(v):
        raise ParseError(f"{what} must be finite, got {tok!r}", lineno)
    return v


def _parse_header(body, lineno):
    toks = body.split()
    if toks[0] == "potentials":
        if len(toks) != 1:
            raise ParseError("[potentials] takes no options", lineno)
        return ("potentials", None)
    if toks[0] != "curve":
        raise ParseError(f"unknown section [{body}]", lineno)
    if len(toks) < 2 or "=" in toks[1]:
        raise ParseError("curve section needs an id: [curve <id> electrode=<label>]", lineno)
    opts = {}
    for tok in toks[2:]:
        if "=" not in tok:
            raise ParseError(f"expected key=value in curve header, got {tok!r}", lineno)
        key, val = tok.split("=", 1)
        if key not in ("electrode", "other"):
            raise ParseError(f"unknown curve option {key!r}", lineno)
        if not _LABEL.match(val):
            raise ParseError(f"bad electrode label {val!r}", lineno)
        opts[key] = val
    if "electrode" not in opts:
        raise ParseError("curve section needs electrode=<label>", lineno)
    return ("curve", {"id": toks[1], **opts, "rows": [], "line": lineno})


def parse_geometry(text):
    """Parse geometry text into (potentials dict, list of GapCurve)."""
    potentials = {}
    curves = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ParseError(f"malformed section header {line!r}", lineno)
            kind, data = _parse_header(line[1:-1].strip(), lineno)
            if kind == "curve":
                if any(c["id"] == data["id"] for c in curves):
                    raise ParseError(f"duplicate curve id {data['id']!r}", lineno)
                curves.append(data)
            section = (kind, data)
            continue
        if section is None:
            raise ParseError("data before any section header", lineno)
        kind, data = section
        if kind == "potentials":
            if "=" not in line:
                raise ParseError(f"expected label = value, got {line!r}", lineno)
            key, val = (s.strip() for s in line.split("=", 1))
            if not _LABEL.match(key):
                raise ParseError(f"bad electrode label {key!r}", lineno)
            if key in potentials:
                raise ParseError(f"duplicate potential for {key!r}", lineno)
            potentials[key] = _float(val, lineno, f"potential of {key!r}")
        else:
            toks = line.split()
            if len(toks) not in (4, 5):
                raise ParseError(f"curve rows need 't x y g [alpha]', got {len(toks)} fields", lineno)
            data["rows"].append([_float(t, lineno, name) for t, name in zip(toks, ("t", "x", "y", "g", "alpha"))]
                                + [lineno])
    if not curves:
        raise ParseError("no [curve ...] sections found", max(1, len(text.splitlines())))
    out = []
    for c in curves:
        for key in ("electrode", "other"):
            lab = c.get(key)
            if lab is not None and lab not in potentials:
                raise ParseError(f"curve {c['id']!r}: no potential given for label {lab!r}", c["line"])
        rows = c["rows"]
        if len(rows) < 2:
            raise ParseError(f"curve {c['id']!r} needs at least two rows", c["line"])
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise ParseError(f"curve {c['id']!r}: give alpha on all rows or none", rows[0][-1])
        arr = np.array([r[:-1] for r in rows])
        t, x, y, g = arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]
        bad = np.nonzero(np.diff(t) <= 0)[0]
        if bad.size:
            raise ParseError(f"curve {c['id']!r}: t must increase strictly", rows[bad[0] + 1][-1])
        bad = np.nonzero(g <= 0)[0]
        if bad.size:
            raise ParseError(f"curve {c['id']!r}: gap width must be positive", rows[bad[0]][-1])
        alpha = arr[:, 4] if arr.shape[1] == 5 else None
        curve = GapCurve(t, x, y, g, c["electrode"], c.get("other"), name=c["id"])
        if alpha is not None:
            if curve.closed:
                if alpha[-1] != alpha[0]:
                    raise ParseError(f"closed curve {c['id']!r}: alpha differs at the closing row", rows[-1][-1])
                alpha = alpha[:-1]
            curve = curve.with_alpha(alpha)
        out.append(curve)
    return potentials, out


def read_geometry(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_geometry(fh.read())


def _num(v):
    return f"{v:.12g}"


def format_geometry(potentials, curves):
    """Inverse of parse_geometry; amplitudes are written when present."""
    lines = ["[potentials]"]
    for k, v in potentials.items():
        lines.append(f"{k} = {_num(v)}")
    for c in curves:
        head = f"[curve {c.name or 'c'} electrode={c.electrode}"
        if c.other is not None:
            head += f" other={c.other}"
        lines += ["", head + "]"]
        alpha = None
        if c.alpha is not None:
            alpha = np.append(c.alpha, c.alpha[0]) if c.closed else c.alpha
        for i in range(c.t.size):
            row = [c.t[i], c.x[i], c.y[i], c.g[i]] + ([alpha[i]] if alpha is not None else [])
            lines.append(" ".join(_num(v) for v in row))
    return "\n".join(lines) + "\n"
