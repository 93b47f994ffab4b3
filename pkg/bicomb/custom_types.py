from enum import Enum
from typing import Any, Dict

import numpy as np
import numpy.typing as npt


class PSpecial(str, Enum):
    INF = "inf"

    def __str__(self) -> str:
        return self.value


PExponent = float | PSpecial


class ChartKind(Enum):
    PLANE = "plane"
    LINE = "line"
    INTERVAL = "interval"
    BOX = "box"
    PRODUCT = "product"


class SpaceFamily(Enum):
    LSP1 = "lsp1"
    LSP2 = "lsp2"
    LSP3 = "lsp3"
    LSP4 = "lsp4"
    LSP5 = "lsp5"
    CK_PATCH = "ck_patch"
    HALFPLANE_COMPLEX = "halfplane_complex"
    F = "F"
    F5 = "F5"
    FXI = "fxi"
    N_CHAIN = "n_chain"
    SQUARE = "square"
    INTERVAL = "interval"
    LINE = "line"
    SUBDIVIDED_LINE = "subdivided_line"
    PRODUCT = "product"


class BicombingMethod(Enum):
    CAT0_TRAJECTORY = "cat0-trajectory"
    DIRECT_LP = "direct-lp"
    MIDPOINT_REVERSIBILIZED = "midpoint-reversibilized"
    CORRUPTED = "corrupted"


class Axiom(Enum):
    CONICAL = "conical"
    CONSISTENT = "consistent"
    CONVEX = "convex"
    REVERSIBLE = "reversible"
    EQUIVARIANT = "equivariant"
    FIXED_SET_CONVEX = "fixed-set-convex"
    PROJECTION = "projection"


class AsymptoticVerdict(Enum):
    ASYMPTOTIC = "asymptotic"
    DIVERGENT = "divergent"
    INCONCLUSIVE = "inconclusive"


class CaseStatus(Enum):
    PASS = "pass"
    FAIL = "fail"
    INFO = "info"


class OutputFormat(Enum):
    JSON = "json"
    CSV = "csv"


DictWithStringKeys = Dict[str, Any]
Vector = npt.NDArray[np.float64]
