"""Population files: CSV with an ``x1..xn[,f1..fm]`` header, or JSON.

Floats are written with :func:`repr`, which round-trips IEEE-754 doubles.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from kkt_indicator.problems import Problem


class PopulationError(ValueError):
    """A population file failed to parse or validate."""


def _format(path: Path, fmt: str | None) -> str:
    fmt = fmt or path.suffix.lstrip(".").lower()
    if fmt not in ("csv", "json"):
        raise PopulationError(f"{path}: cannot infer format, pass csv or json")
    return fmt


def _validate(problem: Problem, X: np.ndarray, F: np.ndarray | None, path: Path) -> None:
    for name, arr in (("x", X), ("f", F)):
        if arr is None:
            continue
        bad = np.argwhere(~np.isfinite(arr))
        if bad.size:
            r, c = bad[0]
            raise PopulationError(f"{path}: row {r + 1}, column {name}{c + 1}: non-finite value")
    bad = np.argwhere((X < problem.lower) | (X > problem.upper))
    if bad.size:
        r, c = bad[0]
        raise PopulationError(
            f"{path}: row {r + 1}, column x{c + 1}: value {X[r, c]!r} outside "
            f"[{problem.lower}, {problem.upper}]"
        )


def load_population(
    path: str | Path, problem: Problem, fmt: str | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Read decision vectors and objectives, in file order.

    Objectives are recomputed when the file does not carry them.

    Raises:
        PopulationError: Parse failure, wrong column count, non-finite or
            out-of-bounds value (message names the row and column), or an
            empty population.
    """
    path = Path(path)
    fmt = _format(path, fmt)
    n, m = problem.n, problem.m
    try:
        if fmt == "csv":
            X, F = _read_csv(path, n, m)
        else:
            X, F = _read_json(path, n, m)
    except OSError as exc:
        raise PopulationError(f"{path}: {exc.strerror or exc}") from exc
    if X.shape[0] == 0:
        raise PopulationError(f"{path}: empty population")
    _validate(problem, X, F, path)
    if F is None:
        F = problem.evaluate(X)
    return X, F


def _read_csv(path: Path, n: int, m: int) -> tuple[np.ndarray, np.ndarray | None]:
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise PopulationError(f"{path}: empty population")
    header = [h.strip() for h in rows[0]]
    xs = [f"x{i + 1}" for i in range(n)]
    fs = [f"f{i + 1}" for i in range(m)]
    if header not in (xs, xs + fs):
        raise PopulationError(
            f"{path}: header must be x1..x{n} optionally followed by f1..f{m}, got {len(header)} columns"
        )
    data = np.empty((len(rows) - 1, len(header)))
    for r, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise PopulationError(f"{path}: row {r}: expected {len(header)} columns, got {len(row)}")
        for c, cell in enumerate(row):
            try:
                data[r - 1, c] = float(cell)
            except ValueError:
                raise PopulationError(f"{path}: row {r}, column {header[c]}: cannot parse {cell!r}") from None
    return data[:, :n], (data[:, n:] if len(header) > n else None)


def _read_json(path: Path, n: int, m: int) -> tuple[np.ndarray, np.ndarray | None]:
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise PopulationError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(doc, dict) or "x" not in doc:
        raise PopulationError(f"{path}: expected an object with an 'x' array")

    def matrix(key: str, width: int) -> np.ndarray:
        rows = doc[key]
        out = np.empty((len(rows), width))
        for r, row in enumerate(rows, start=1):
            if not isinstance(row, list) or len(row) != width:
                raise PopulationError(f"{path}: row {r} of '{key}' must have {width} values")
            for c, v in enumerate(row):
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise PopulationError(f"{path}: row {r}, column {key}{c + 1}: not a number")
                out[r - 1, c] = v
        return out

    X = matrix("x", n)
    F = matrix("f", m) if doc.get("f") is not None else None
    if F is not None and F.shape[0] != X.shape[0]:
        raise PopulationError(f"{path}: 'x' has {X.shape[0]} rows but 'f' has {F.shape[0]}")
    return X, F


def _cell(v: float) -> str:
    v = float(v)
    if not math.isfinite(v):
        raise ValueError("refusing to write a non-finite value")
    return repr(v)


def save_population(
    path: str | Path, X: np.ndarray, F: np.ndarray | None = None, fmt: str | None = None
) -> None:
    """Write a population so that :func:`load_population` returns identical arrays."""
    path = Path(path)
    fmt = _format(path, fmt)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if fmt == "csv":
        path.write_text(population_csv(X, F))
    else:
        doc = {"x": X.tolist(), "f": None if F is None else np.asarray(F, dtype=float).tolist()}
        path.write_text(json.dumps(doc) + "\n")


def population_csv(X: np.ndarray, F: np.ndarray | None = None, x_prefix: str = "x") -> str:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    header = [f"{x_prefix}{i + 1}" for i in range(X.shape[1])]
    body = X
    if F is not None:
        F = np.atleast_2d(np.asarray(F, dtype=float))
        header += [f"f{i + 1}" for i in range(F.shape[1])]
        body = np.hstack([X, F])
    lines = [",".join(header)] + [",".join(_cell(v) for v in row) for row in body]
    return "\n".join(lines) + "\n"
