"""JSON circuit and family files, and deterministic report serialization.

Complex numbers are ``[re, im]`` pairs (plain reals are accepted on input).
Every file carries ``"format": 1``. A circuit file looks like::

    {"format": 1, "qubits": 2, "initial": "01",
     "stages": [{"ops": [{"gate": "H", "targets": [0]},
                         {"gate": "CNOT", "targets": [0, 1]}], "label": "prep"},
                {"gate": "QFT", "targets": [0, 1]},
                {"gate": "U_PAPER", "targets": [0, 1]}],
     "final": "computational"}

A family file holds a circuit (inline or a path relative to the file) and
a list of insertions ``{"stage": k, "basis": ...}``.
"""

import json
import math
import os
from pathlib import Path

import numpy as np

from ._validation import DimensionError, check_density_matrix, check_state_vector, check_unitary
from .histories import HistoryFamily
from .quantum import (
    Circuit,
    LocalBasis,
    ProjectorSet,
    embed,
    ket,
    named_gate,
    pseudopure,
)

FORMAT = 1


class SchemaError(ValueError):
    """A circuit or family file does not match the expected schema."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


# ---------------------------------------------------------------------------
# low-level field parsing


def _complex(value, path):
    if isinstance(value, bool):
        raise SchemaError(path, "expected a number or [re, im] pair")
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        return complex(value[0], value[1])
    raise SchemaError(path, "expected a number or [re, im] pair")


def _vector(value, path):
    if not isinstance(value, list) or not value:
        raise SchemaError(path, "expected a non-empty list of amplitudes")
    return np.array([_complex(v, f"{path}[{i}]") for i, v in enumerate(value)])


def _matrix(value, path):
    if not isinstance(value, list) or not value:
        raise SchemaError(path, "expected a list of rows")
    rows = [_vector(r, f"{path}[{i}]") for i, r in enumerate(value)]
    if len({len(r) for r in rows}) != 1:
        raise SchemaError(path, "rows have different lengths")
    return np.array(rows)


def _int_list(value, path):
    if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        raise SchemaError(path, "expected a list of integers")
    return [int(v) for v in value]


def _require(obj, key, path):
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected an object")
    if key not in obj:
        raise SchemaError(path, f"missing field {key!r}")
    return obj[key]


def _bitstring(bits, qubits, path):
    if not isinstance(bits, str) or set(bits) - {"0", "1"}:
        raise SchemaError(path, f"bad bitstring {bits!r}")
    if qubits is not None and len(bits) != qubits:
        raise SchemaError(path, f"bitstring {bits!r} has length {len(bits)}, expected {qubits}")
    return ket(bits)


def _pure_spec(value, qubits, path):
    if isinstance(value, str):
        return _bitstring(value, qubits, path)
    return _vector(value, path)


def _initial(value, qubits, path):
    if isinstance(value, dict):
        if "pseudopure" in value:
            spec = value["pseudopure"]
            p = f"{path}.pseudopure"
            if not isinstance(spec, dict):
                raise SchemaError(p, "expected an object with a state and nu")
            state = spec.get("bitstring", spec.get("amplitudes"))
            if state is None:
                raise SchemaError(p, "missing field 'bitstring' or 'amplitudes'")
            nu = _require(spec, "nu", p)
            if not isinstance(nu, (int, float)):
                raise SchemaError(f"{p}.nu", "expected a number")
            return pseudopure(_pure_spec(state, qubits, p), float(nu))
        if "density" in value:
            return _matrix(value["density"], f"{path}.density")
        raise SchemaError(path, "expected 'pseudopure' or 'density'")
    return _pure_spec(value, qubits, path)


def _targets(step, qubits, path):
    t = step.get("targets")
    if t is None:
        if qubits is None:
            return None
        return list(range(qubits))
    if qubits is None:
        raise SchemaError(f"{path}.targets", "targets need a qubit register")
    return _int_list(t, f"{path}.targets")


def _operator(step, qubits, dim, path):
    if not isinstance(step, dict):
        raise SchemaError(path, "expected an object")
    if "ops" in step:
        ops = step["ops"]
        if not isinstance(ops, list) or not ops:
            raise SchemaError(f"{path}.ops", "expected a non-empty list")
        u = np.eye(dim, dtype=complex)
        for i, op in enumerate(ops):
            u = _operator(op, qubits, dim, f"{path}.ops[{i}]") @ u
        return u
    targets = _targets(step, qubits, path)
    if "gate" in step:
        name = step["gate"]
        if not isinstance(name, str):
            raise SchemaError(f"{path}.gate", "expected a gate name")
        try:
            g = named_gate(name, len(targets) if targets is not None else int(round(math.log2(dim))))
        except KeyError as exc:
            raise SchemaError(f"{path}.gate", str(exc.args[0])) from None
        except DimensionError as exc:
            raise SchemaError(f"{path}.targets", str(exc)) from None
    elif "matrix" in step:
        g = _matrix(step["matrix"], f"{path}.matrix")
    else:
        raise SchemaError(path, "expected 'gate', 'matrix' or 'ops'")
    if targets is None:
        if g.shape[0] != dim:
            raise SchemaError(path, f"matrix has dimension {g.shape[0]}, expected {dim}")
        return g
    try:
        return embed(g, targets, qubits)
    except (ValueError, DimensionError) as exc:
        raise SchemaError(path, str(exc)) from None


def parse_basis(value, qubits, dim, path="basis"):
    """A measurement set from ``"computational" | "bell" | {...}``."""
    if value == "computational":
        return ProjectorSet.computational(dim)
    if value == "bell":
        if qubits != 2:
            raise SchemaError(path, "'bell' needs two qubits; use {'bell': [i, j]}")
        return LocalBasis.bell(2).projector_set()
    if isinstance(value, list):
        vecs = _matrix(value, path)
        return ProjectorSet.from_basis(vecs.T)
    if isinstance(value, dict):
        if "bell" in value:
            pair = _int_list(value["bell"], f"{path}.bell")
            if qubits is None or len(pair) != 2:
                raise SchemaError(f"{path}.bell", "expected a qubit pair")
            return LocalBasis.bell(qubits, tuple(pair)).projector_set()
        if "angles" in value:
            ang = value["angles"]
            if not isinstance(ang, list) or len(ang) != qubits:
                raise SchemaError(f"{path}.angles", f"expected {qubits} [theta, phi] pairs")
            pairs = []
            for i, a in enumerate(ang):
                if not isinstance(a, list) or len(a) != 2:
                    raise SchemaError(f"{path}.angles[{i}]", "expected [theta, phi]")
                pairs.append((float(a[0]), float(a[1])))
            return LocalBasis.from_angles(pairs).projector_set()
        if "vectors" in value:
            return ProjectorSet.from_basis(_matrix(value["vectors"], f"{path}.vectors").T, value.get("labels", ()))
        if "projectors" in value:
            projs = value["projectors"]
            if not isinstance(projs, list) or not projs:
                raise SchemaError(f"{path}.projectors", "expected a list of matrices")
            mats = np.array([_matrix(p, f"{path}.projectors[{i}]") for i, p in enumerate(projs)])
            return ProjectorSet(mats, tuple(value.get("labels", ())))
    raise SchemaError(path, f"unrecognised basis spec {value!r}")


def circuit_from_dict(data, path=""):
    """Build a :class:`Circuit` from a decoded circuit file."""
    if not isinstance(data, dict):
        raise SchemaError(path or "circuit", "expected an object")
    fmt = data.get("format", FORMAT)
    if fmt != FORMAT:
        raise SchemaError(f"{path}format", f"unsupported format {fmt!r}")
    qubits = data.get("qubits")
    dim = data.get("dim")
    if qubits is not None and (not isinstance(qubits, int) or isinstance(qubits, bool) or qubits < 1):
        raise SchemaError(f"{path}qubits", "expected a positive integer")
    if qubits is None and dim is None:
        raise SchemaError(path or "circuit", "missing field 'qubits'")
    if qubits is not None:
        dim = 2**qubits
    initial = _initial(_require(data, "initial", path or "circuit"), qubits, f"{path}initial")
    if initial.shape[0] != dim:
        raise SchemaError(f"{path}initial", f"state has dimension {initial.shape[0]}, expected {dim}")
    try:
        (check_state_vector if initial.ndim == 1 else check_density_matrix)(initial)
    except ValueError as exc:
        raise SchemaError(f"{path}initial", str(exc)) from None
    stages = data.get("stages", [])
    if not isinstance(stages, list):
        raise SchemaError(f"{path}stages", "expected a list")
    mats, labels = [], []
    for k, step in enumerate(stages):
        mats.append(_operator(step, qubits, dim, f"{path}stages[{k}]"))
        try:
            check_unitary(mats[-1], name="stage operator")
        except ValueError as exc:
            raise SchemaError(f"{path}stages[{k}]", str(exc)) from None
        label = step.get("label") if isinstance(step, dict) else None
        if label is None:
            label = step.get("gate", f"U{k + 1}") if isinstance(step, dict) else f"U{k + 1}"
        labels.append(str(label))
    final = parse_basis(data.get("final", "computational"), qubits, dim, f"{path}final")
    try:
        return Circuit(qubits, initial, tuple(mats), final, tuple(labels), source=data)
    except ValueError as exc:
        raise SchemaError(path or "circuit", str(exc)) from None


def _loads(text, what):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"line {exc.lineno}, column {exc.colno}", f"invalid {what} JSON: {exc.msg}") from None


def parse_circuit(text):
    """Parse circuit-file text into a validated :class:`Circuit`."""
    return circuit_from_dict(_loads(text, "circuit"))


def family_from_dict(data, base_dir=None):
    if not isinstance(data, dict):
        raise SchemaError("family", "expected an object")
    if data.get("format", FORMAT) != FORMAT:
        raise SchemaError("format", f"unsupported format {data.get('format')!r}")
    spec = _require(data, "circuit", "family")
    if isinstance(spec, str):
        p = Path(spec)
        if not p.is_absolute() and base_dir is not None:
            p = Path(base_dir) / p
        try:
            circuit = parse_circuit(p.read_text(encoding="utf-8"))
        except OSError as exc:
            raise SchemaError("circuit", f"cannot read {p}: {exc.strerror}") from None
    else:
        circuit = circuit_from_dict(spec, "circuit.")
    insertions = {}
    ins = data.get("insertions", [])
    if not isinstance(ins, list):
        raise SchemaError("insertions", "expected a list")
    for i, item in enumerate(ins):
        path = f"insertions[{i}]"
        stage = _require(item, "stage", path)
        if not isinstance(stage, int) or isinstance(stage, bool):
            raise SchemaError(f"{path}.stage", "expected an integer")
        if not 0 <= stage < circuit.n_stages:
            raise SchemaError(f"{path}.stage", f"stage must lie in 0..{circuit.n_stages - 1}")
        if stage in insertions:
            raise SchemaError(f"{path}.stage", f"duplicate insertion at stage {stage}")
        insertions[stage] = parse_basis(_require(item, "basis", path), circuit.qubits, circuit.dim, f"{path}.basis")
    final = None
    if "final" in data:
        final = parse_basis(data["final"], circuit.qubits, circuit.dim, "final")
    return HistoryFamily.from_circuit(circuit, insertions, final)


def parse_family(text, base_dir=None):
    """Parse family-file text; a string ``circuit`` is a path relative to ``base_dir``."""
    return family_from_dict(_loads(text, "family"), base_dir)


def load_circuit(path):
    return parse_circuit(_read(path))


def load_family(path):
    """Load a family file, or treat a circuit file as its one-event family."""
    text = _read(path)
    data = _loads(text, "family")
    base = os.path.dirname(os.path.abspath(path)) if path != "-" else os.getcwd()
    if isinstance(data, dict) and "circuit" not in data and "initial" in data:
        return HistoryFamily.from_circuit(circuit_from_dict(data))
    return family_from_dict(data, base)


def _read(path):
    if path == "-":
        import sys

        return sys.stdin.read()
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(str(path), f"cannot read file: {exc.strerror}") from None


# ---------------------------------------------------------------------------
# serialization


def _pair(z):
    z = complex(z)
    return [z.real, z.imag]


def _dense_vector(v):
    return [_pair(z) for z in np.asarray(v).reshape(-1)]


def _dense_matrix(m):
    return [[_pair(z) for z in row] for row in np.asarray(m)]


def _set_dict(pset):
    if pset.is_fine:
        return {"vectors": [_dense_vector(v) for v in pset.vectors().T], "labels": list(pset.labels)}
    return {"projectors": [_dense_matrix(p) for p in pset.projectors], "labels": list(pset.labels)}


def circuit_to_dict(circuit, dense=False):
    """File representation of ``circuit``; the parsed source is reused unless ``dense``."""
    if circuit.source is not None and not dense:
        return dict(circuit.source, format=FORMAT)
    out = {"format": FORMAT}
    if circuit.qubits is not None:
        out["qubits"] = circuit.qubits
    else:
        out["dim"] = circuit.dim
    if circuit.is_pure:
        out["initial"] = _dense_vector(circuit.initial)
    else:
        out["initial"] = {"density": _dense_matrix(circuit.initial)}
    out["stages"] = [
        {"matrix": _dense_matrix(u), "label": lab} for u, lab in zip(circuit.stages, circuit.stage_labels)
    ]
    out["final"] = _set_dict(circuit.final)
    return out


def family_to_dict(family, dense=False):
    ins = [
        {"stage": k, "basis": _set_dict(s)} for s, k in zip(family.sets[:-1], family.stages[:-1])
    ]
    out = {"format": FORMAT, "circuit": circuit_to_dict(family.circuit, dense), "insertions": ins}
    if family.sets[-1] is not family.circuit.final:
        out["final"] = _set_dict(family.sets[-1])
    return out


def serialize_circuit(circuit, dense=False):
    return dumps(circuit_to_dict(circuit, dense))


def serialize_family(family, dense=False):
    return dumps(family_to_dict(family, dense))


def _plain(obj):
    """Reduce reports, arrays and numpy scalars to JSON-compatible values."""
    if hasattr(obj, "to_dict"):
        return _plain(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return _pair(obj)
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_emit(obj[k], indent, level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_emit(v, indent, level) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _emit(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return "null"
        return format(obj, ".17g") if obj != int(obj) or abs(obj) >= 1e17 else repr(obj)
    return json.dumps(obj)


def dumps(obj, indent=2):
    """Deterministic JSON: sorted keys, floats at 17 significant digits, non-finite as null."""
    return _emit(_plain(obj), indent, 0)


def serialize_report(report):
    return dumps(report)


def write_text(path, text):
    Path(path).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
