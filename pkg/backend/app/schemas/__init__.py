from .instance import InstanceFile, MeasureSpec
from .report import (
    CheckResult,
    FactorReport,
    LimitPlanReport,
    PotentialReport,
    RegionReport,
    ReportFile,
    SolveReport,
    SweepRow,
    SweepSummary,
    VerifyReport,
)
