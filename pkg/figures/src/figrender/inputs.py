"""Readers for the harness output directory.

Every reader validates against the documented schema and raises
SchemaMismatch on any deviation; absent files raise MissingInput.
"""

import csv
import hashlib
import json
import os
from configparser import ConfigParser, Error as ConfigParserError

import numpy as np


class MissingInput(Exception):
    """A required input file or directory does not exist."""


class SchemaMismatch(Exception):
    """An input file exists but does not match the documented schema."""


RMSE_HEADER = ("delta", "estimator", "kernel", "x0", "rmse", "bias", "sd",
               "n_ok")
CURVE_HEADER = ("x0", "estimator", "kernel", "theta_hat", "ci_lo", "ci_hi",
                "theta_true")

_RMSE_FLOATS = ("delta", "x0", "rmse", "bias", "sd")
_CURVE_FLOATS = ("x0", "theta_hat", "ci_lo", "ci_hi", "theta_true")


def _require(path, kind):
    if not os.path.exists(path):
        raise MissingInput(f"{kind} not found: {path}")
    return path


def read_manifest(in_dir):
    """Return (manifest dict, sha256 hex of the manifest file bytes)."""
    _require(in_dir, "input directory")
    path = _require(os.path.join(in_dir, "manifest.json"), "manifest")
    with open(path, "rb") as handle:
        raw = handle.read()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as err:
        raise SchemaMismatch(f"{path} is not valid JSON: {err}") from err
    if not isinstance(doc, dict):
        raise SchemaMismatch(f"{path} must hold a JSON object")
    return doc, hashlib.sha256(raw).hexdigest()


def manifest_horizon(manifest):
    """Time horizon parsed from the config text embedded in the manifest."""
    text = manifest.get("config")
    if not isinstance(text, str):
        raise SchemaMismatch("manifest lacks the embedded config text")
    parser = ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string(text)
        return float(parser["grid"]["horizon"])
    except (ConfigParserError, KeyError, ValueError) as err:
        raise SchemaMismatch(
            f"manifest config text has no readable [grid] horizon: {err}"
        ) from err


def _read_rows(path, header, float_fields, int_fields):
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            first = next(reader)
        except StopIteration:
            raise SchemaMismatch(f"{path} is empty, expected header "
                                 f"{','.join(header)}") from None
        if tuple(first) != header:
            raise SchemaMismatch(f"{path} header is {','.join(first)!r}, "
                                 f"expected {','.join(header)!r}")
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if len(raw) != len(header):
                raise SchemaMismatch(f"{path}:{lineno} has {len(raw)} fields, "
                                     f"expected {len(header)}")
            row = dict(zip(header, raw))
            for key in float_fields:
                try:
                    row[key] = float(row[key])
                except ValueError:
                    raise SchemaMismatch(
                        f"{path}:{lineno} field {key!r} is not a number: "
                        f"{row[key]!r}") from None
            for key in int_fields:
                try:
                    row[key] = int(row[key])
                except ValueError:
                    raise SchemaMismatch(
                        f"{path}:{lineno} field {key!r} is not an integer: "
                        f"{row[key]!r}") from None
            if not row["estimator"] or not row["kernel"]:
                raise SchemaMismatch(f"{path}:{lineno} has an empty "
                                     "estimator or kernel label")
            rows.append(row)
    return rows


def read_rmse(in_dir):
    path = _require(os.path.join(in_dir, "rmse.csv"), "rmse table")
    return _read_rows(path, RMSE_HEADER, _RMSE_FLOATS, ("n_ok",))


def read_curve(in_dir):
    path = _require(os.path.join(in_dir, "curve.csv"), "curve table")
    return _read_rows(path, CURVE_HEADER, _CURVE_FLOATS, ())


def read_field(in_dir, manifest):
    """Snapshot matrix from field.bin, geometry taken from the manifest."""
    path = _require(os.path.join(in_dir, "field.bin"), "field snapshots")
    try:
        rows = int(manifest["snapshot_rows"])
        cols = int(manifest["snapshot_cols"])
    except (KeyError, TypeError, ValueError):
        raise SchemaMismatch("manifest lacks integer snapshot_rows and "
                             "snapshot_cols") from None
    if rows <= 0 or cols <= 0:
        raise SchemaMismatch(f"manifest snapshot geometry {rows}x{cols} "
                             "is not positive")
    expected = rows * cols * 8
    actual = os.path.getsize(path)
    if actual != expected:
        raise SchemaMismatch(f"{path} holds {actual} bytes, expected "
                             f"{expected} for {rows}x{cols} float64")
    data = np.fromfile(path, dtype="<f8")
    return data.reshape(rows, cols)
