"""Grid data model, case documents, and topology operations."""

from .caseio import (
    BUNDLED_CASES,
    CaseParseError,
    bundled_case,
    load_case,
    serialize_case,
)
from .model import (
    Branch,
    Bus,
    Generator,
    GridCase,
    GridModelError,
    Load,
    MergeRecord,
    SwitchLink,
    TopologyEvent,
    islands_of,
    require_slack_per_active_island,
)
from .topology import (
    IslandReport,
    TopologyError,
    apply_event,
    connectivity_check,
    merge_across_switch,
    split_merged_switch,
    topology_processor,
)

__all__ = [
    "BUNDLED_CASES", "Branch", "Bus", "CaseParseError", "Generator", "GridCase",
    "GridModelError", "IslandReport", "Load", "MergeRecord", "SwitchLink",
    "TopologyError", "TopologyEvent", "apply_event", "bundled_case",
    "connectivity_check", "islands_of", "load_case", "merge_across_switch",
    "require_slack_per_active_island", "serialize_case", "split_merged_switch",
    "topology_processor",
]
