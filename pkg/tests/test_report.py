import json
import math

import numpy as np

from phiproc import depletion as dep
from phiproc.fixpoint import IterationReport, Stage
from phiproc.lattice import PowersetElement
from phiproc.report import dumps, to_jsonable


def test_scalars_and_nonfinite():
    assert to_jsonable(np.float64(1.5)) == 1.5
    assert to_jsonable(math.inf) == "inf" and to_jsonable(-math.inf) == "-inf"
    assert to_jsonable(float("nan")) == "nan"
    assert to_jsonable(1 + 2j) == {"re": 1.0, "im": 2.0}
    assert to_jsonable(np.array([1 + 0j, 2])) == [1.0, 2.0]


def test_structured_objects():
    rep = IterationReport(PowersetElement.of(3, [0, 2]), Stage.OMEGA, (1.0, 0.0), True, {"k": np.int64(3)})
    out = to_jsonable(rep)
    assert out == {"fixed_point": [0, 2], "stage": "omega", "residuals": [1.0, 0.0], "converged": True,
                   "info": {"k": 3}}


def test_gap_report_serializes_with_updates():
    rep = dep.run_pair(dep.two_site_config())
    rec = json.loads(dumps({"report": rep, "config": dep.two_site_config()}))
    assert rec["config"]["update"] == {"rho": 0.8}
    assert rec["report"]["utility_gap"] == rep.utility_gap


def test_canonical_output():
    a = dumps({"b": 1, "a": [np.float64(0.1)]})
    assert a == '{"a":[0.1],"b":1}'
