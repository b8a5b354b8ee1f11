"""Mechanical storage-modification layer over sites and floating bodies."""
from .preferences import PreferenceTable, color_weight
from .storage import StorageGraph, StorageNode, AbstractRealizer, add_node, link, unlink, set_active
from .maneuvers import (
    CommandQueue, IndeterminatePullWarning, Maneuver, PullManeuver, PushManeuver, pull_node, push_node,
)

__all__ = [
    "PreferenceTable",
    "color_weight",
    "StorageGraph",
    "StorageNode",
    "AbstractRealizer",
    "add_node",
    "link",
    "unlink",
    "set_active",
    "Maneuver",
    "PushManeuver",
    "PullManeuver",
    "push_node",
    "pull_node",
    "CommandQueue",
    "IndeterminatePullWarning",
]
