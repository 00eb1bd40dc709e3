from __future__ import annotations

from enum import Enum


class SpaceKind(str, Enum):
    INTERVAL_GRID = "interval_grid"
    CIRCLE = "circle"
    CANTOR = "cantor"
    SNOWFLAKE = "snowflake"


class SpaceFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class EdgeKind(str, Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"
    TAIL = "tail"


class CorpusKind(str, Enum):
    CONSTANT = "constant"
    COORDINATE = "coordinate"
    BUMP = "bump"
    NET_VALUED = "net_valued"
    HOLDER_ROUGH = "holder_rough"


class CheckName(str, Enum):
    STRUCTURE = "structure"
    CLOSED_FORMS = "closed_forms"
    HULL_MASS = "hull_mass"
    DOUBLING = "doubling"
    LOWER_DECAY = "lower_decay"
    LEVEL_MASS = "level_mass"
    BALL_MASS = "ball_mass"
    FILLING_DISTANCE = "filling_distance"
    HULL_APPROXIMATION = "hull_approximation"
    TRACE_DECAY = "trace_decay"
    TRACE_EXTENSION = "trace_extension"
    TRACE_DOMINATION = "trace_domination"
    EXTENSION_DOMINATION = "extension_domination"
    EXTENSION_DECAY = "extension_decay"
    BESOV_CONVERGENCE = "besov_convergence"
    BESOV_EQUIVALENCE = "besov_equivalence"
    POINCARE_TRACE = "poincare_trace"
    EXTENSION_POINCARE = "extension_poincare"
    HOLDER = "holder"
    SOBOLEV_QSTAR = "sobolev_qstar"
    THETA_Q = "theta_q"
    HAJLASZ = "hajlasz"
    HAJLASZ_BESOV = "hajlasz_besov"
    UPPER_GRADIENT = "upper_gradient"
    NEWTONIAN_TRACE = "newtonian_trace"
    TRUNCATION = "truncation"


class CheckStatus(str, Enum):
    PASSED = "passed"
    FAILED = "failed"
    SKIPPED = "skipped: hypothesis"
