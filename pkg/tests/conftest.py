"""Shared fixtures for the test suite."""

from __future__ import annotations

import csv

import pytest

from mmo_tune.space import OptionSpace, OptionSpec


def make_binary_space(n: int) -> OptionSpace:
    return OptionSpace(tuple(OptionSpec(f"o{i}", "binary", 0, 1) for i in range(n)))


def write_table(path, space: OptionSpace, rows: dict[tuple[int, ...], tuple[float, float]]) -> str:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([*space.names, "target", "auxiliary"])
        for values, (target, auxiliary) in rows.items():
            writer.writerow([*values, f"{target:.2f}", f"{auxiliary:.2f}"])
    return str(path)


@pytest.fixture
def binary3() -> OptionSpace:
    return make_binary_space(3)


@pytest.fixture
def binary8() -> OptionSpace:
    return make_binary_space(8)
