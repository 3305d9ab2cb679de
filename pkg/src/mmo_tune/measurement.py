"""Measurement oracles, the per-run cache, and distinct-measurement budgets."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import random
import subprocess
from dataclasses import dataclass
from typing import Literal, Protocol

from .space import Configuration, OptionSpace

Direction = Literal["minimize", "maximize"]

DIRECTIONS = ("minimize", "maximize")


class BudgetExhausted(Exception):
    """Cooperative stop signal: the distinct-measurement budget is spent.

    Not an error; optimizers catch it and report their best-so-far result.
    """


class TableFormatError(ValueError):
    """Raised when a measurement table does not match the CSV schema."""


class UnmeasuredConfigError(LookupError):
    """Raised when a tabular oracle is asked about a configuration it has no row for."""


class CommandOracleError(RuntimeError):
    """Raised when an external measurement command fails; carries the transcript."""


@dataclass(frozen=True)
class MeasurementRecord:
    """Raw target and auxiliary performance values with their directionality."""

    target_raw: float
    auxiliary_raw: float
    target_direction: Direction = "minimize"
    auxiliary_direction: Direction = "minimize"

    def __post_init__(self) -> None:
        if not (math.isfinite(self.target_raw) and math.isfinite(self.auxiliary_raw)):
            raise ValueError("measurement values must be finite")
        for d in (self.target_direction, self.auxiliary_direction):
            if d not in DIRECTIONS:
                raise ValueError(f"unknown direction {d!r}")


class Oracle(Protocol):
    def measure(self, config: Configuration) -> MeasurementRecord: ...


class BudgetLedger:
    """Tracks distinct measurements against a limit; repeats are served from cache."""

    def __init__(self, limit: int):
        if limit < 0:
            raise ValueError(f"budget limit must be >= 0, got {limit}")
        self.limit = limit
        self.cache: dict[Configuration, MeasurementRecord] = {}

    @property
    def consumed(self) -> int:
        return len(self.cache)


def cached_measure(
    ledger: BudgetLedger, oracle: Oracle, config: Configuration
) -> MeasurementRecord:
    """Measure through the per-run cache; only distinct configurations cost budget.

    Raises BudgetExhausted on a cache miss once the limit is reached.
    """
    record = ledger.cache.get(config)
    if record is not None:
        return record
    if ledger.consumed >= ledger.limit:
        raise BudgetExhausted(
            f"distinct-measurement budget of {ledger.limit} is exhausted"
        )
    record = oracle.measure(config)
    ledger.cache[config] = record
    return record


class TabularOracle:
    """Exact-match lookups against pre-measured data; never invents values."""

    def __init__(
        self,
        rows: dict[tuple[int, ...], tuple[float, float]],
        option_names: tuple[str, ...],
        target_direction: Direction = "minimize",
        auxiliary_direction: Direction = "minimize",
    ):
        self.rows = rows
        self.option_names = option_names
        self.target_direction: Direction = target_direction
        self.auxiliary_direction: Direction = auxiliary_direction

    @property
    def row_count(self) -> int:
        return len(self.rows)

    @property
    def columns(self) -> tuple[str, ...]:
        return self.option_names + ("target", "auxiliary")

    def measure(self, config: Configuration) -> MeasurementRecord:
        try:
            target, auxiliary = self.rows[config.values]
        except KeyError:
            raise UnmeasuredConfigError(
                f"unmeasured configuration {config.values}"
            ) from None
        return MeasurementRecord(
            target, auxiliary, self.target_direction, self.auxiliary_direction
        )


def load_table(
    path: str,
    space: OptionSpace | None = None,
    target_direction: Direction = "minimize",
    auxiliary_direction: Direction = "minimize",
) -> TabularOracle:
    """Load a measurement table.

    Schema: header row is the option names in space order followed by ``target``
    and ``auxiliary``; data rows are integers then two decimals. Duplicate
    configuration rows are fatal (ambiguous ground truth).
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TableFormatError(f"{path}: empty file") from None
        if len(header) < 3 or header[-2:] != ["target", "auxiliary"]:
            raise TableFormatError(
                f"{path}: header must end with 'target','auxiliary', got {header}"
            )
        option_names = tuple(header[:-2])
        if space is not None:
            for name in option_names:
                if name not in space.names:
                    raise TableFormatError(f"{path}: unknown option column {name!r}")
            if option_names != space.names:
                raise TableFormatError(
                    f"{path}: option columns {option_names} do not match "
                    f"space order {space.names}"
                )
        rows: dict[tuple[int, ...], tuple[float, float]] = {}
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(header):
                raise TableFormatError(
                    f"{path}:{lineno}: expected {len(header)} cells, got {len(cells)}"
                )
            try:
                values = tuple(int(c) for c in cells[: len(option_names)])
                target = float(cells[-2])
                auxiliary = float(cells[-1])
            except ValueError as exc:
                raise TableFormatError(f"{path}:{lineno}: non-numeric cell ({exc})") from exc
            if not (math.isfinite(target) and math.isfinite(auxiliary)):
                raise TableFormatError(f"{path}:{lineno}: non-finite measurement")
            if space is not None:
                space.config(values)
            if values in rows:
                raise TableFormatError(
                    f"{path}:{lineno}: duplicate configuration row {values}"
                )
            rows[values] = (target, auxiliary)
    return TabularOracle(rows, option_names, target_direction, auxiliary_direction)


def _lower_median(values: list[float]) -> float:
    # Lower median: never fabricates a value that was not measured.
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


class CommandOracle:
    """Measures by running an external command; option values go in as OPT_<name>.

    The command's final stdout line must be ``{"target": <num>, "auxiliary": <num>}``.
    Each measurement runs the command ``samples`` times and keeps per-objective medians.
    """

    def __init__(
        self,
        command: str,
        space: OptionSpace,
        samples: int = 5,
        timeout: float = 60.0,
        target_direction: Direction = "minimize",
        auxiliary_direction: Direction = "minimize",
    ):
        if samples < 1:
            raise ValueError(f"samples must be >= 1, got {samples}")
        self.command = command
        self.space = space
        self.samples = samples
        self.timeout = timeout
        self.target_direction: Direction = target_direction
        self.auxiliary_direction: Direction = auxiliary_direction

    def measure(self, config: Configuration) -> MeasurementRecord:
        self.space.validate(config)
        env = dict(os.environ)
        for opt, value in zip(self.space.options, config.values):
            env[f"OPT_{opt.name}"] = str(value)
        targets: list[float] = []
        auxiliaries: list[float] = []
        for _ in range(self.samples):
            t, a = self._run_once(env)
            targets.append(t)
            auxiliaries.append(a)
        return MeasurementRecord(
            _lower_median(targets),
            _lower_median(auxiliaries),
            self.target_direction,
            self.auxiliary_direction,
        )

    def _run_once(self, env: dict[str, str]) -> tuple[float, float]:
        try:
            proc = subprocess.run(
                self.command,
                shell=True,
                env=env,
                capture_output=True,
                text=True,
                timeout=self.timeout,
            )
        except subprocess.TimeoutExpired as exc:
            raise CommandOracleError(
                f"command timed out after {self.timeout}s: {self.command}"
            ) from exc
        if proc.returncode != 0:
            raise CommandOracleError(
                f"command exited {proc.returncode}: {self.command}\n"
                f"stdout: {proc.stdout!r}\nstderr: {proc.stderr!r}"
            )
        lines = [line for line in proc.stdout.splitlines() if line.strip()]
        if not lines:
            raise CommandOracleError(
                f"command produced no output: {self.command}\nstderr: {proc.stderr!r}"
            )
        try:
            result = json.loads(lines[-1])
            return float(result["target"]), float(result["auxiliary"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise CommandOracleError(
                f"unparseable result line {lines[-1]!r} from: {self.command}"
            ) from exc


@dataclass(frozen=True)
class SyntheticLandscapeParams:
    """Knobs for a planted-optimum landscape with tunable ruggedness."""

    space: OptionSpace
    seed: int
    local_optima_density: float = 0.05
    ruggedness: float = 0.3
    correlation: float = 0.0
    planted_optimum: Configuration | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.local_optima_density <= 1.0:
            raise ValueError("local_optima_density must be in (0, 1]")
        if self.ruggedness < 0.0:
            raise ValueError("ruggedness must be >= 0")
        if not -1.0 <= self.correlation <= 1.0:
            raise ValueError("correlation must be in [-1, 1]")
        if self.planted_optimum is None:
            planted = self.space.random_config(random.Random(self.seed))
            object.__setattr__(self, "planted_optimum", planted)
        self.space.validate(self.planted_optimum)


def _unit_hash(seed: int, tag: bytes, values: tuple[int, ...]) -> float:
    """Stable pseudo-random uniform in [0, 1) from (seed, tag, values)."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(seed).encode())
    h.update(tag)
    h.update(repr(values).encode())
    return int.from_bytes(h.digest(), "big") / 2.0**64


class SyntheticOracle:
    """Deterministic planted-optimum landscape.

    The target is a normalized distance-to-planted slope plus seeded per-config
    noise of amplitude ``ruggedness``, with pits of depth ``2 * ruggedness``
    carved at ``local_optima_density`` of the configurations. The planted
    optimum sits strictly below every other value. With ruggedness 0 the
    landscape has a single basin; once ruggedness exceeds the per-step slope,
    isolated pit centers become strict Hamming-1 local minima. The auxiliary value mixes
    the target with independent seeded noise via ``correlation``, so extreme
    auxiliary values can coexist with similar target values.
    """

    def __init__(self, params: SyntheticLandscapeParams):
        self.params = params
        self.space = params.space
        spans = sum(opt.upper - opt.lower for opt in self.space.options)
        self._distance_scale = float(spans) if spans else 1.0

    def target(self, config: Configuration) -> float:
        p = self.params
        if config == p.planted_optimum:
            return -2.0 * p.ruggedness - 0.5
        base = (
            sum(
                abs(v - pv)
                for v, pv in zip(config.values, p.planted_optimum.values)
            )
            / self._distance_scale
        )
        noise = p.ruggedness * _unit_hash(p.seed, b"noise", config.values)
        pit = 0.0
        if _unit_hash(p.seed, b"pit", config.values) < p.local_optima_density:
            pit = -2.0 * p.ruggedness
        return base + noise + pit

    def auxiliary(self, config: Configuration) -> float:
        p = self.params
        rho = p.correlation
        noise = _unit_hash(p.seed, b"aux", config.values)
        return rho * self.target(config) + (1.0 - abs(rho)) * noise

    def measure(self, config: Configuration) -> MeasurementRecord:
        self.space.validate(config)
        return MeasurementRecord(self.target(config), self.auxiliary(config))


def synth_landscape(params: SyntheticLandscapeParams) -> SyntheticOracle:
    """Build the deterministic synthetic oracle for the given parameters."""
    return SyntheticOracle(params)
