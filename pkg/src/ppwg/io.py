"""CSV and text serialization with round-trippable number formatting."""

from __future__ import annotations

import csv
import io as _io
from pathlib import Path

import numpy as np

from .waveguide import OUTGOING_COMPONENTS, TRACE_COMPONENTS, OutgoingCoefficients, TangentialTrace

__all__ = [
    "fmt",
    "trace_to_csv",
    "trace_from_csv",
    "outgoing_to_csv",
    "symbol_rows",
    "field_rows",
    "write_csv",
    "write_text",
]

FIELD_HEADER = ("r", "theta", "z", "re_Er", "im_Er", "re_Etheta", "im_Etheta", "re_Ez", "im_Ez")


def fmt(x: float) -> str:
    """17 significant digits, scientific notation."""
    x = float(x)
    if x == 0.0:
        x = 0.0  # fold -0.0
    return f"{x:.16e}"


def write_csv(path, header, rows) -> None:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    Path(path).write_text(buf.getvalue())


def write_text(path, text: str) -> None:
    Path(path).write_text(text)


def _coef_rows(coeffs: np.ndarray, names):
    N = (coeffs.shape[0] - 1) // 2
    for m in range(coeffs.shape[1]):
        for n in range(-N, N + 1):
            for j, name in enumerate(names):
                v = complex(coeffs[n + N, m, j])
                yield (n, m, name, float(v.real), float(v.imag))


def trace_to_csv(trace: TangentialTrace, path) -> None:
    write_csv(path, ("n", "m", "component", "re", "im"), _coef_rows(trace.coeffs, TRACE_COMPONENTS))


def outgoing_to_csv(out: OutgoingCoefficients, path) -> None:
    write_csv(path, ("n", "m", "component", "re", "im"), _coef_rows(out.coeffs, OUTGOING_COMPONENTS))


def trace_from_csv(path, radius: float) -> TangentialTrace:
    """Read a ``n,m,component,re,im`` table; truncation is inferred from the largest indices."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and set(rows[0]) != {"n", "m", "component", "re", "im"}:
        raise ValueError(f"{path}: expected header n,m,component,re,im")
    N = max((abs(int(r["n"])) for r in rows), default=0)
    M = max((int(r["m"]) for r in rows), default=0)
    c = np.zeros((2 * N + 1, M + 1, 4), complex)
    for i, r in enumerate(rows, start=2):
        try:
            j = TRACE_COMPONENTS.index(r["component"])
        except ValueError:
            raise ValueError(f"{path}:{i}: unknown component {r['component']!r}") from None
        c[int(r["n"]) + N, int(r["m"]), j] = complex(float(r["re"]), float(r["im"]))
    return TangentialTrace(c, radius)


def symbol_rows(table: np.ndarray, modes):
    """Rows ``n,m,entry,re,im`` for the given ``(n, m)`` in order."""
    N = (table.shape[0] - 1) // 2
    for n, m in modes:
        W = table[n + N, m]
        for name, (i, j) in (("W11", (0, 0)), ("W12", (0, 1)), ("W21", (1, 0)), ("W22", (1, 1))):
            v = complex(W[i, j])
            yield (n, m, name, v.real, v.imag)


def field_rows(r, theta, z, values: np.ndarray):
    for i, rv in enumerate(r):
        for j, tv in enumerate(theta):
            for k, zv in enumerate(z):
                e = values[i, j, k]
                yield (float(rv), float(tv), float(zv),
                       e[0].real, e[0].imag, e[1].real, e[1].imag, e[2].real, e[2].imag)
