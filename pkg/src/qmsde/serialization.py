"""JSON problem files.

Format::

    {"x0": 0.0,
     "mu": {"breakpoints": [0.0],
            "pieces": [{"slope": 0, "intercept": 0}, {"slope": 1, "intercept": 1}],
            "at_breakpoint": ["right"]},
     "sigma": {"breakpoints": [], "pieces": [{"slope": 0, "intercept": 1}]},
     "class": "A"}

Pieces are affine or ``{"catalog": name}`` references into
:data:`qmsde.catalog.PIECE_CATALOG`.
"""

import json
import os

import jsonschema

from .catalog import PIECE_CATALOG, get_problem, list_problems
from .piecewise import AffinePiece, PiecewiseFunction, SDEProblem

__all__ = [
    "NonExportableError",
    "PROBLEM_SCHEMA",
    "ProblemFileError",
    "dump_problem",
    "load_problem",
    "problem_from_dict",
    "problem_to_dict",
    "resolve_problem",
]

_PIECEWISE = {
    "type": "object",
    "required": ["breakpoints", "pieces"],
    "additionalProperties": False,
    "properties": {
        "breakpoints": {"type": "array", "items": {"type": "number"}},
        "pieces": {
            "type": "array",
            "minItems": 1,
            "items": {
                "oneOf": [
                    {
                        "type": "object",
                        "required": ["slope", "intercept"],
                        "additionalProperties": False,
                        "properties": {"slope": {"type": "number"}, "intercept": {"type": "number"}},
                    },
                    {
                        "type": "object",
                        "required": ["catalog"],
                        "additionalProperties": False,
                        "properties": {"catalog": {"type": "string"}},
                    },
                ]
            },
        },
        "at_breakpoint": {
            "type": "array",
            "items": {"oneOf": [{"enum": ["left", "right"]}, {"type": "number"}]},
        },
    },
}

PROBLEM_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["x0", "mu", "sigma", "class"],
    "additionalProperties": False,
    "properties": {
        "x0": {"type": "number"},
        "mu": _PIECEWISE,
        "sigma": _PIECEWISE,
        "class": {"enum": ["A", "B"]},
        "name": {"type": "string"},
    },
}


class ProblemFileError(ValueError):
    """A problem file or dict does not conform to the schema."""


class NonExportableError(ValueError):
    """The problem uses closed-form pieces that have no JSON representation."""


def _field(path):
    out = ""
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def _piecewise_from_dict(d, where):
    pieces = []
    for j, p in enumerate(d["pieces"]):
        if "catalog" in p:
            try:
                pieces.append(PIECE_CATALOG[p["catalog"]]())
            except KeyError:
                raise ProblemFileError(
                    f"field {where}.pieces[{j}]: unknown catalog piece {p['catalog']!r}"
                ) from None
        else:
            pieces.append(AffinePiece(float(p["slope"]), float(p["intercept"])))
    try:
        return PiecewiseFunction(d["breakpoints"], pieces, d.get("at_breakpoint"))
    except (ValueError, TypeError) as exc:
        raise ProblemFileError(f"field {where}: {exc}") from None


def problem_from_dict(d):
    validator = jsonschema.Draft202012Validator(PROBLEM_SCHEMA)
    errors = sorted(validator.iter_errors(d), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"field {_field(e.absolute_path)}: {e.message}" for e in errors]
        raise ProblemFileError("invalid problem:\n  " + "\n  ".join(lines))
    mu = _piecewise_from_dict(d["mu"], "mu")
    sigma = _piecewise_from_dict(d["sigma"], "sigma")
    try:
        return SDEProblem(float(d["x0"]), mu, sigma, d["class"], d.get("name"))
    except ValueError as exc:
        raise ProblemFileError(f"invalid problem: {exc}") from None


def _piecewise_to_dict(f):
    rules = []
    for r in f.at_breakpoint:
        rules.append(r if isinstance(r, str) else float(r))
    return {
        "breakpoints": [float(b) for b in f.breakpoints],
        "pieces": [p.to_dict() for p in f.pieces],
        "at_breakpoint": rules,
    }


def problem_to_dict(problem):
    label = problem.name or "<unnamed>"
    if not (problem.mu.exportable and problem.sigma.exportable):
        raise NonExportableError(f"problem {label} uses catalog closed-form pieces and cannot be exported")
    if problem.exact_solution is not None:
        # the file format has no slot for the closed-form reference
        raise NonExportableError(f"problem {label} carries a closed-form solution and cannot be exported")
    out = {
        "x0": problem.x0,
        "mu": _piecewise_to_dict(problem.mu),
        "sigma": _piecewise_to_dict(problem.sigma),
        "class": problem.assumption_class,
    }
    if problem.name:
        out["name"] = problem.name
    return out


def load_problem(path):
    with open(path) as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        return problem_from_dict(data)
    except ProblemFileError as exc:
        raise ProblemFileError(f"{path}: {exc}") from None


def dump_problem(problem, path):
    with open(path, "w") as fh:
        json.dump(problem_to_dict(problem), fh, indent=2)
        fh.write("\n")


def resolve_problem(spec):
    """Catalog id, path to a JSON problem file, or an :class:`SDEProblem`."""
    if isinstance(spec, SDEProblem):
        return spec
    if spec in list_problems():
        return get_problem(spec)
    if os.path.exists(spec):
        return load_problem(spec)
    raise KeyError(f"unknown problem {spec!r}: not a catalog id ({', '.join(list_problems())}) or a file")
