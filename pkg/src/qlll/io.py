"""JSON serialisation of instances.

Complex entries are written as ``[re, im]`` pairs; Python's float ``repr`` is
the shortest string that round-trips, so load followed by dump is byte-stable.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .instance import Flaw, QsatInstance


class InstanceFormatError(ValueError):
    pass


def instance_to_dict(inst: QsatInstance) -> dict:
    flaws = []
    for f in inst.flaws:
        rows = [[[float(z.real), float(z.imag)] for z in row] for row in f.local_projector]
        flaws.append({"id": f.id, "support": list(f.support), "projector": rows})
    return {"n": inst.n, "flaws": flaws}


def dumps_instance(inst: QsatInstance) -> str:
    return json.dumps(instance_to_dict(inst), indent=1) + "\n"


def _parse_matrix(raw, where: str) -> np.ndarray:
    if not isinstance(raw, list) or not raw:
        raise InstanceFormatError(f"{where}: projector must be a non-empty list of rows")
    dim = len(raw)
    out = np.zeros((dim, dim), dtype=np.complex128)
    for i, row in enumerate(raw):
        if not isinstance(row, list) or len(row) != dim:
            raise InstanceFormatError(f"{where}: row {i} does not have {dim} entries")
        for j, z in enumerate(row):
            if (not isinstance(z, list) or len(z) != 2
                    or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in z)):
                raise InstanceFormatError(f"{where}: entry [{i}][{j}] must be a [re, im] pair")
            if not all(math.isfinite(c) for c in z):
                raise InstanceFormatError(f"{where}: entry [{i}][{j}] is not finite")
            out[i, j] = complex(z[0], z[1])
    return out


def instance_from_dict(doc) -> QsatInstance:
    if not isinstance(doc, dict):
        raise InstanceFormatError("instance document must be a JSON object")
    n = doc.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n <= 0:
        raise InstanceFormatError("'n' must be a positive integer")
    raw_flaws = doc.get("flaws")
    if not isinstance(raw_flaws, list):
        raise InstanceFormatError("'flaws' must be a list")
    flaws = []
    for k, rf in enumerate(raw_flaws):
        where = f"flaws[{k}]"
        if not isinstance(rf, dict):
            raise InstanceFormatError(f"{where}: must be an object")
        fid = rf.get("id")
        if not isinstance(fid, str):
            raise InstanceFormatError(f"{where}: 'id' must be a string")
        support = rf.get("support")
        if not isinstance(support, list) or not all(
            isinstance(q, int) and not isinstance(q, bool) for q in support
        ):
            raise InstanceFormatError(f"{where}: 'support' must be a list of integers")
        proj = _parse_matrix(rf.get("projector"), where)
        try:
            flaws.append(Flaw(fid, tuple(support), proj))
        except ValueError as exc:
            raise InstanceFormatError(f"{where}: {exc}") from exc
    try:
        return QsatInstance(n, flaws)
    except ValueError as exc:
        raise InstanceFormatError(str(exc)) from exc


def loads_instance(text: str) -> QsatInstance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return instance_from_dict(doc)


def load_instance(path: str | Path) -> QsatInstance:
    return loads_instance(Path(path).read_text())


def save_instance(inst: QsatInstance, path: str | Path) -> None:
    Path(path).write_text(dumps_instance(inst))
