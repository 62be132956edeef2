"""DSCP code points used for preservation and drop ordering.

The AF table is the standard assured-forwarding grid: class 1..4 by row,
low/medium/high drop probability by column.  CS7 marks high-consumption
users (dropped last among non-exempt traffic) and BestEffort everyone else.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict


@dataclass(frozen=True)
class DscpClass:
    name: str
    decimal: int
    binary: str

    def __post_init__(self) -> None:
        if len(self.binary) != 6 or int(self.binary, 2) != self.decimal:
            raise ValueError(f"inconsistent DSCP entry {self}")


AF11 = DscpClass("AF11", 10, "001010")
AF12 = DscpClass("AF12", 12, "001100")
AF13 = DscpClass("AF13", 14, "001110")
AF21 = DscpClass("AF21", 18, "010010")
AF22 = DscpClass("AF22", 20, "010100")
AF23 = DscpClass("AF23", 22, "010110")
AF31 = DscpClass("AF31", 26, "011010")
AF32 = DscpClass("AF32", 28, "011100")
AF33 = DscpClass("AF33", 30, "011110")
AF41 = DscpClass("AF41", 34, "100010")
AF42 = DscpClass("AF42", 36, "100100")
AF43 = DscpClass("AF43", 38, "100110")
CS7 = DscpClass("CS7", 56, "111000")
BEST_EFFORT = DscpClass("BestEffort", 0, "000000")

AF_TABLE = (
    (AF11, AF12, AF13),
    (AF21, AF22, AF23),
    (AF31, AF32, AF33),
    (AF41, AF42, AF43),
)

ALL_CLASSES = tuple(c for row in AF_TABLE for c in row) + (CS7, BEST_EFFORT)
BY_NAME: Dict[str, DscpClass] = {c.name: c for c in ALL_CLASSES}
BY_DECIMAL: Dict[int, DscpClass] = {c.decimal: c for c in ALL_CLASSES}


def _survival_rank(cls: DscpClass) -> int:
    """Higher survives policing longer (exempt AF41 is handled separately)."""
    if cls == CS7:
        return 100
    if cls == BEST_EFFORT:
        return 0
    for row, classes in enumerate(AF_TABLE):
        if cls in classes:
            # AF4x above AF3x ...; within a row low drop probability first
            return 10 * (row + 1) + (3 - classes.index(cls))
    raise KeyError(cls)


SURVIVAL_RANK: Dict[DscpClass, int] = {c: _survival_rank(c) for c in ALL_CLASSES}


def from_decimal(value: int) -> DscpClass:
    try:
        return BY_DECIMAL[value]
    except KeyError:
        raise ValueError(f"unknown DSCP value {value}") from None
