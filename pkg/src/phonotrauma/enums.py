from enum import Enum


class Condition(str, Enum):
    """Recording condition of an accelerometer signal."""

    LAB_RAINBOW = "lab_rainbow"
    LAB_SPONTANEOUS = "lab_spontaneous"
    FIELD = "field"


class Group(str, Enum):
    """Diagnostic group. ``PVH`` is the positive class everywhere."""

    PVH = "pvh"
    CONTROL = "control"

    @property
    def label(self) -> int:
        return 1 if self is Group.PVH else 0
