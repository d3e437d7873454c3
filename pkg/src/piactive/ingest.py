"""Gradient-sample files.

A sample file is CSV preceded by a JSON header in ``#``-prefixed lines::

    # {"format_version": 1, "m": 2, "names": ["a", "b"], "log_lower": [...],
    #  "log_upper": [...], "coordinates": "normalized_log", "model": "...", ...}
    x1,x2,f,g1,g2
    0.25,-0.5,1.0,0.1,0.2

Floats are written with ``repr`` (shortest round-trip), so save/load is exact.
With ``"coordinates": "physical"`` the x columns hold physical values and the
g columns hold ``df/dt``; they are converted to normalized log coordinates on
load.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .models import ParameterSpace
from .subspace import GradientSampleSet

FORMAT_VERSION = 1
COORDINATES = ("normalized_log", "physical")


class SampleFileError(ValueError):
    pass


def _header(samples: GradientSampleSet, coordinates: str) -> dict:
    space = samples.space
    prov = dict(samples.provenance)
    return {
        "format_version": FORMAT_VERSION,
        "m": samples.m,
        "M": samples.M,
        "names": list(space.names),
        "quantities": list(space.quantities),
        "log_lower": [float(x) for x in space.log_lower],
        "log_upper": [float(x) for x in space.log_upper],
        "constants": dict(space.constants),
        "coordinates": coordinates,
        "model": prov.get("model", space.model),
        "provenance": prov,
    }


def save_samples(samples: GradientSampleSet, path, coordinates: str = "normalized_log") -> None:
    """Write ``samples`` to a new file. Existing files are never overwritten or appended to."""
    if coordinates not in COORDINATES:
        raise ValueError(f"coordinates must be one of {COORDINATES}")
    header = _header(samples, coordinates)
    if coordinates == "physical":
        x = samples.x_physical
        g = samples.space.gradient_to_physical(x, samples.grad)
    else:
        x, g = samples.x, samples.grad
    m = samples.m
    cols = [f"x{i + 1}" for i in range(m)] + ["f"] + [f"g{i + 1}" for i in range(m)]
    lines = ["# " + line for line in json.dumps(header, indent=1, sort_keys=True).splitlines()]
    lines.append(",".join(cols))
    for xi, fi, gi in zip(x, samples.f, g):
        lines.append(",".join(repr(float(v)) for v in (*xi, fi, *gi)))
    with open(path, "x") as fh:
        fh.write("\n".join(lines) + "\n")


def _check_space(header: dict, space: ParameterSpace):
    if list(header["names"]) != list(space.names):
        raise SampleFileError(f"parameter names {header['names']} do not match space {list(space.names)}")
    for key, ref in (("log_lower", space.log_lower), ("log_upper", space.log_upper)):
        if [float(x) for x in header[key]] != [float(x) for x in ref]:
            raise SampleFileError(f"{key} in file does not match the parameter space")


def load_samples(path, space: ParameterSpace | None = None) -> GradientSampleSet:
    path = Path(path)
    header_lines, body = [], []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                header_lines.append(line[1:].strip())
            elif line.strip():
                body.append(line.rstrip("\n"))
    try:
        header = json.loads("\n".join(header_lines))
    except json.JSONDecodeError as exc:
        raise SampleFileError(f"{path}: malformed JSON header: {exc}") from exc
    for key in ("format_version", "m", "names", "log_lower", "log_upper", "coordinates"):
        if key not in header:
            raise SampleFileError(f"{path}: header lacks {key!r}")
    if header["format_version"] != FORMAT_VERSION:
        raise SampleFileError(f"{path}: unsupported format_version {header['format_version']}")
    if header["coordinates"] not in COORDINATES:
        raise SampleFileError(f"{path}: unknown coordinate convention {header['coordinates']!r}")
    m = int(header["m"])
    if len(header["names"]) != m:
        raise SampleFileError(f"{path}: header m={m} but {len(header['names'])} names")

    file_space = ParameterSpace(
        tuple(header["names"]), np.array(header["log_lower"], dtype=float),
        np.array(header["log_upper"], dtype=float), header.get("constants", {}),
        tuple(header.get("quantities", header["names"])), header.get("model"),
    )
    if space is not None:
        _check_space(header, space)
        file_space = space

    if not body:
        raise SampleFileError(f"{path}: no column header")
    expected = [f"x{i + 1}" for i in range(m)] + ["f"] + [f"g{i + 1}" for i in range(m)]
    if body[0].split(",") != expected:
        raise SampleFileError(f"{path}: column header must be {','.join(expected)}")
    rows = []
    for r, line in enumerate(body[1:], start=1):
        fields = line.split(",")
        if len(fields) != 2 * m + 1:
            raise SampleFileError(f"{path}: row {r} has {len(fields)} fields, expected {2 * m + 1} (truncated?)")
        try:
            vals = [float(v) for v in fields]
        except ValueError as exc:
            raise SampleFileError(f"{path}: row {r}: {exc}") from exc
        if not all(math.isfinite(v) for v in vals):
            raise SampleFileError(f"{path}: non-finite entry in row {r}")
        rows.append(vals)
    if not rows:
        raise SampleFileError(f"{path}: no sample rows")
    data = np.array(rows)
    x, f, g = data[:, :m], data[:, m], data[:, m + 1:]

    provenance = dict(header.get("provenance", {}))
    provenance["file"] = str(path)
    if header["coordinates"] == "physical":
        if np.any(x <= 0):
            bad = int(np.flatnonzero(np.any(x <= 0, axis=1))[0]) + 1
            raise SampleFileError(f"{path}: nonpositive physical value in row {bad}")
        g = file_space.gradient_to_normalized(x, g)
        x = file_space.to_normalized(x)
        provenance["converted_from"] = "physical"
    if np.any(np.abs(x) > 1 + 1e-12):
        bad = int(np.flatnonzero(np.any(np.abs(x) > 1 + 1e-12, axis=1))[0]) + 1
        raise SampleFileError(f"{path}: row {bad} lies outside the parameter box")
    return GradientSampleSet(x, f, g, file_space, provenance)
