"""JSON problem and solution files.

Both formats use a strict schema: unknown keys are errors, and every error
names the offending location as a JSON pointer. Matrices are lists of rows;
a list of matrices gives the vertices of a matrix polytope.

Problem file::

    {
      "name": "...",                                   (optional)
      "plant": {"A": [...], "B": [...], "Bp": [...], "C": [[...]], "Deta": [[...]]},
      "constraints": {"X": [[...]], "U": [[...]], "Udelta": [[...]] or null},
      "disturbances": {"P": [[...]], "N": [[...]]},
      "synthesis": {"l_r": 9, "theta": 0.5, "directions": [[...]], ...}   (optional)
    }

``A``, ``B`` and ``Bp`` accept one matrix or a list of vertex matrices.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .closed_loop import GainSchedule
from .errors import RpiSynthError
from .plant import LpvProblem, validate
from .synthesis import SynthesisConfig

SOLUTION_FORMAT = "rpisynth-solution"
TOOL_VERSION = "0.1.0"

_SYNTH_KEYS = {
    "l_r": int,
    "theta": float,
    "directions": "matrix",
    "free_u_directions": bool,
    "psi_u_bound": float,
    "eps1": float,
    "bounds": "bounds",
    "starts": int,
    "max_sweeps": int,
    "stall_tol": float,
    "seed": int,
    "pin_constraint_rows": str,
}
_BOUND_KEYS = {"multipliers": "mult_bound", "gains": "gain_bound", "gamma": "gamma_bound"}


class SchemaError(RpiSynthError, ValueError):
    """Malformed JSON document; ``pointer`` locates the problem."""

    def __init__(self, pointer, message):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer or "/"


def _check_keys(obj, pointer, required, optional=()):
    if not isinstance(obj, dict):
        raise SchemaError(pointer, "expected an object")
    for key in required:
        if key not in obj:
            raise SchemaError(f"{pointer}/{key}", "missing required field")
    allowed = set(required) | set(optional)
    for key in obj:
        if key not in allowed:
            raise SchemaError(f"{pointer}/{key}", "unknown field")


def _matrix(value, pointer):
    if not isinstance(value, list) or not value:
        raise SchemaError(pointer, "expected a non-empty list of rows")
    rows = []
    width = None
    for r, row in enumerate(value):
        if not isinstance(row, list):
            raise SchemaError(f"{pointer}/{r}", "expected a row (list of numbers)")
        for c, x in enumerate(row):
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise SchemaError(f"{pointer}/{r}/{c}", "expected a number")
            if not np.isfinite(x):
                raise SchemaError(f"{pointer}/{r}/{c}", "expected a finite number")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise SchemaError(f"{pointer}/{r}", f"row has {len(row)} entries, expected {width}")
        rows.append([float(x) for x in row])
    if width == 0:
        raise SchemaError(pointer, "matrix has no columns")
    return np.array(rows)


def _matrix_or_vertices(value, pointer):
    if isinstance(value, list) and value and isinstance(value[0], list) and value[0] \
            and isinstance(value[0][0], list):
        return [_matrix(v, f"{pointer}/{k}") for k, v in enumerate(value)]
    return _matrix(value, pointer)


def _scalar(value, kind, pointer):
    if kind is bool:
        if not isinstance(value, bool):
            raise SchemaError(pointer, "expected true or false")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise SchemaError(pointer, "expected a string")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(pointer, "expected a number")
    if kind is int:
        if float(value) != int(value):
            raise SchemaError(pointer, "expected an integer")
        return int(value)
    return float(value)


_SECTION = {"A": "plant", "B": "plant", "Bp": "plant", "C": "plant", "Deta": "plant",
            "X": "constraints", "U": "constraints", "Udelta": "constraints",
            "P": "disturbances", "N": "disturbances"}


def _issue_pointer(message):
    """Best JSON pointer for a validation message that starts with a matrix name."""
    words = message.split()
    name = words[1] if words[:1] == ["set"] and len(words) > 1 else (words[0] if words else "")
    if name in _SECTION:
        return f"/{_SECTION[name]}/{name}"
    return "/plant"


def parse_problem(doc):
    """Return ``(problem, synthesis_options)`` from a decoded problem document."""
    _check_keys(doc, "", ("plant", "constraints", "disturbances"), ("name", "synthesis"))
    plant = doc["plant"]
    _check_keys(plant, "/plant", ("A", "B", "Bp", "C", "Deta"))
    cons = doc["constraints"]
    _check_keys(cons, "/constraints", ("X", "U"), ("Udelta",))
    dist = doc["disturbances"]
    _check_keys(dist, "/disturbances", ("P", "N"))
    name = doc.get("name", "")
    if not isinstance(name, str):
        raise SchemaError("/name", "expected a string")
    Ud = cons.get("Udelta")
    try:
        problem = LpvProblem(
            A=_matrix_or_vertices(plant["A"], "/plant/A"),
            B=_matrix_or_vertices(plant["B"], "/plant/B"),
            Bp=_matrix_or_vertices(plant["Bp"], "/plant/Bp"),
            C=_matrix(plant["C"], "/plant/C"),
            Deta=_matrix(plant["Deta"], "/plant/Deta"),
            X=_matrix(cons["X"], "/constraints/X"),
            U=_matrix(cons["U"], "/constraints/U"),
            Udelta=None if Ud is None else _matrix(Ud, "/constraints/Udelta"),
            P=_matrix(dist["P"], "/disturbances/P"),
            N=_matrix(dist["N"], "/disturbances/N"),
            name=name,
        )
    except SchemaError:
        raise
    except RpiSynthError as exc:
        raise SchemaError("/plant", str(exc)) from exc
    report = validate(problem)
    if not report.valid:
        _, msg = report.issues[0]
        raise SchemaError(_issue_pointer(msg), msg)
    options = {}
    if "synthesis" in doc:
        syn = doc["synthesis"]
        _check_keys(syn, "/synthesis", (), tuple(_SYNTH_KEYS))
        for key, kind in _SYNTH_KEYS.items():
            if key not in syn:
                continue
            ptr = f"/synthesis/{key}"
            if kind == "matrix":
                options[key] = _matrix(syn[key], ptr)
            elif kind == "bounds":
                _check_keys(syn[key], ptr, (), tuple(_BOUND_KEYS))
                for bk, attr in _BOUND_KEYS.items():
                    if bk in syn[key]:
                        options[attr] = _scalar(syn[key][bk], float, f"{ptr}/{bk}")
            else:
                options[key] = _scalar(syn[key], kind, ptr)
    return problem, options


def _read_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError("", f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def load_problem(path):
    return parse_problem(_read_json(path))


def synthesis_config(options, **overrides):
    """Build a :class:`SynthesisConfig` from file options plus overrides (``None`` skipped)."""
    kw = dict(options)
    kw.update({k: v for k, v in overrides.items() if v is not None})
    if "l_r" not in kw:
        raise SchemaError("/synthesis/l_r", "set complexity l_r is required for design")
    return SynthesisConfig(**kw)


def _mat_list(arr):
    return [[[float(x) for x in row] for row in m] for m in np.asarray(arr)]


def _mat(arr):
    return [[float(x) for x in row] for row in np.atleast_2d(arr)]


def problem_to_dict(problem, options=None):
    doc = {
        "name": problem.name,
        "plant": {
            "A": _mat_list(problem.A.vertices),
            "B": _mat_list(problem.B.vertices),
            "Bp": _mat_list(problem.Bp.vertices),
            "C": _mat(problem.C),
            "Deta": _mat(problem.Deta),
        },
        "constraints": {
            "X": _mat(problem.X),
            "U": _mat(problem.U),
            "Udelta": None if problem.Udelta is None else _mat(problem.Udelta),
        },
        "disturbances": {"P": _mat(problem.P), "N": _mat(problem.N)},
    }
    if options:
        syn = {}
        for key, val in options.items():
            if key == "directions":
                syn[key] = _mat(val)
            elif key in _BOUND_KEYS.values():
                name = {v: k for k, v in _BOUND_KEYS.items()}[key]
                syn.setdefault("bounds", {})[name] = float(val)
            else:
                syn[key] = val
        doc["synthesis"] = syn
    return doc


def solution_to_dict(gains, L, rho, lam, eps1, gammas=None, psis=None, objective=None,
                     certification=None, seed=None):
    return {
        "format": SOLUTION_FORMAT,
        "tool_version": TOOL_VERSION,
        "seed": seed,
        "gains": {"K": _mat_list(gains.K), "Kbar": _mat_list(gains.Kbar), "Khat": _mat_list(gains.Khat)},
        "L": _mat(L),
        "rho": [float(x) for x in np.ravel(rho)],
        "lambda": float(lam),
        "eps1": float(eps1),
        "gammas": None if gammas is None else [float(x) for x in np.ravel(gammas)],
        "psis": None if psis is None else _mat(psis),
        "objective": None if objective is None else float(objective),
        "certification": certification,
    }


def _is_row(value):
    return isinstance(value, list) and all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in value)


def _format(value, indent):
    pad = "  " * indent
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f'{pad}  {json.dumps(k)}: {_format(value[k], indent + 1)}' for k in sorted(value)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(value, list) and value and not _is_row(value):
        items = [f"{pad}  {_format(v, indent + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    return json.dumps(value)


def dumps(doc):
    """Canonical JSON text: sorted keys, one line per numeric row, round-trip floats."""
    return _format(doc, 0) + "\n"


def write_json(doc, path):
    Path(path).write_text(dumps(doc))


def parse_solution(doc):
    """Return a dict with ``gains``, ``L``, ``rho``, ``lam``, ``eps1``, ``gammas``, ``psis``."""
    _check_keys(doc, "", ("format", "gains", "L", "rho", "lambda", "eps1"),
                ("tool_version", "seed", "gammas", "psis", "objective", "certification"))
    if doc["format"] != SOLUTION_FORMAT:
        raise SchemaError("/format", f"expected {SOLUTION_FORMAT!r}")
    g = doc["gains"]
    _check_keys(g, "/gains", ("K", "Kbar", "Khat"))
    gains = {}
    for key in ("K", "Kbar", "Khat"):
        val = g[key]
        if not isinstance(val, list) or not val:
            raise SchemaError(f"/gains/{key}", "expected a list of vertex matrices")
        gains[key] = [_matrix(m, f"/gains/{key}/{k}") for k, m in enumerate(val)]
    try:
        schedule = GainSchedule(gains["K"], gains["Kbar"], gains["Khat"])
    except RpiSynthError as exc:
        raise SchemaError("/gains", str(exc)) from exc
    L = _matrix(doc["L"], "/L")
    rho = doc["rho"]
    if not isinstance(rho, list):
        raise SchemaError("/rho", "expected a list of numbers")
    rho = np.array([_scalar(x, float, f"/rho/{k}") for k, x in enumerate(rho)])
    if rho.shape != (L.shape[0],):
        raise SchemaError("/rho", f"expected {L.shape[0]} entries")
    gammas = doc.get("gammas")
    psis = doc.get("psis")
    if gammas is not None:
        if not isinstance(gammas, list):
            raise SchemaError("/gammas", "expected a list of numbers")
        gammas = np.array([_scalar(x, float, f"/gammas/{k}") for k, x in enumerate(gammas)])
        if psis is None:
            raise SchemaError("/psis", "directions are required with gammas")
        psis = _matrix(psis, "/psis")
        if psis.shape[0] != gammas.size:
            raise SchemaError("/psis", "expected one direction per gamma")
    return {
        "gains": schedule,
        "L": L,
        "rho": rho,
        "lam": _scalar(doc["lambda"], float, "/lambda"),
        "eps1": _scalar(doc["eps1"], float, "/eps1"),
        "gammas": gammas,
        "psis": None if gammas is None else psis,
        "objective": doc.get("objective"),
        "seed": doc.get("seed"),
    }


def load_solution(path):
    return parse_solution(_read_json(path))


def fixture_path(name):
    """Path of a bundled example file (``example1_lti.json`` and so on)."""
    return resources.files("rpisynth") / "data" / name


def load_fixture(name):
    """Decoded problem or solution fixture by file name."""
    path = fixture_path(name)
    doc = json.loads(path.read_text())
    if doc.get("format") == SOLUTION_FORMAT:
        return parse_solution(doc)
    return parse_problem(doc)
