"""Conversion of result objects into JSON-ready records.

Output is canonical (sorted keys, ``repr`` floats, no timestamps) so that
identical runs produce byte-identical report files.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
import types

import numpy as np

from .fixpoint import Stage
from .kernel import Distribution, Kernel
from .lattice import PowersetElement
from .oml import SubspaceProjection

REPORT_VERSION = 1


def _float(x: float):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _array(a: np.ndarray):
    if np.iscomplexobj(a):
        if np.all(a.imag == 0):
            return _array(a.real)
        return {"re": _array(a.real), "im": _array(a.imag)}
    if a.dtype == bool:
        return a.tolist()
    if a.dtype.kind in "iu":
        return a.tolist()
    return np.vectorize(_float, otypes=[object])(a).tolist() if a.size else a.tolist()


def to_jsonable(obj):
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, (bool, np.bool_)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        return _float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _float(obj.real), "im": _float(obj.imag)}
    if isinstance(obj, np.ndarray):
        return _array(obj)
    if isinstance(obj, Stage):
        return str(obj)
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, PowersetElement):
        return list(obj.states)
    if isinstance(obj, Distribution):
        return _array(obj.probs)
    if isinstance(obj, Kernel):
        return _array(obj.rows)
    if isinstance(obj, SubspaceProjection):
        return {"rank": obj.rank, "projector": _array(obj.matrix)}
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        out = {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)
               if not isinstance(getattr(obj, f.name), types.FunctionType)}
        for name in ("orthogonal", "rank", "range_matches", "violations", "compliant",
                     "supports_divergence_claim", "limit_gap", "idempotency_defect"):
            attr = getattr(type(obj), name, None)
            if isinstance(attr, property):
                out[name] = to_jsonable(getattr(obj, name))
        return out
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted(to_jsonable(v) for v in obj)
    if callable(obj):
        return getattr(obj, "__name__", type(obj).__name__)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(record: dict) -> str:
    return json.dumps(to_jsonable(record), sort_keys=True, separators=(",", ":"), allow_nan=False)
