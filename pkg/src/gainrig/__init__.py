"""Forced-symmetric rigidity in the l_q and l_infinity planes via gain graphs."""

from .gain_graph import Edge, GainGraph
from .symmetry_groups import IDENTITY, Group, GroupElement
from .moves import MoveKind, MoveRecord, Setting
from .sparsity import SparsityVerdict, Status

__all__ = [
    "Edge",
    "GainGraph",
    "Group",
    "GroupElement",
    "IDENTITY",
    "MoveKind",
    "MoveRecord",
    "Setting",
    "SparsityVerdict",
    "Status",
]
