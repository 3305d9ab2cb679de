"""Configuration spaces: typed options, validation, sampling, neighborhoods."""

from __future__ import annotations

import itertools
import json
import logging
import random
from dataclasses import dataclass
from typing import Iterable, Iterator

log = logging.getLogger(__name__)

OPTION_KINDS = ("binary", "integer")


class SpaceError(ValueError):
    """Raised for malformed space definitions."""


class InvalidConfigurationError(ValueError):
    """Raised when configuration values violate the space bounds."""


@dataclass(frozen=True)
class OptionSpec:
    """One tunable option: binary or an inclusive integer range."""

    name: str
    kind: str
    lower: int
    upper: int

    def __post_init__(self) -> None:
        if self.kind not in OPTION_KINDS:
            raise SpaceError(f"option {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "binary" and (self.lower, self.upper) != (0, 1):
            raise SpaceError(f"option {self.name!r}: binary options must span 0..1")
        if self.lower > self.upper:
            raise SpaceError(
                f"option {self.name!r}: lower {self.lower} > upper {self.upper}"
            )

    @property
    def cardinality(self) -> int:
        return self.upper - self.lower + 1


@dataclass(frozen=True)
class Configuration:
    """One integer value per option, in declaration order. Hashable; used as cache key."""

    values: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class OptionSpace:
    """Ordered sequence of options; the search space is their Cartesian product."""

    options: tuple[OptionSpec, ...]

    def __post_init__(self) -> None:
        if not self.options:
            raise SpaceError("a space needs at least one option")
        seen: set[str] = set()
        for opt in self.options:
            if opt.name in seen:
                raise SpaceError(f"duplicate option name {opt.name!r}")
            seen.add(opt.name)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(opt.name for opt in self.options)

    def size(self) -> int:
        """Number of distinct configurations (product of option cardinalities)."""
        n = 1
        for opt in self.options:
            n *= opt.cardinality
        return n

    def config(self, values: Iterable[int]) -> Configuration:
        """Build a validated configuration from per-option values."""
        cfg = Configuration(tuple(int(v) for v in values))
        self.validate(cfg)
        return cfg

    def validate(self, config: Configuration) -> None:
        if len(config.values) != len(self.options):
            raise InvalidConfigurationError(
                f"expected {len(self.options)} values, got {len(config.values)}"
            )
        for opt, value in zip(self.options, config.values):
            if not opt.lower <= value <= opt.upper:
                raise InvalidConfigurationError(
                    f"option {opt.name!r}: value {value} outside [{opt.lower}, {opt.upper}]"
                )

    def random_config(self, rng: random.Random) -> Configuration:
        """Uniform independent draw per option; deterministic for a seeded rng."""
        return Configuration(
            tuple(rng.randint(opt.lower, opt.upper) for opt in self.options)
        )

    def neighbors(
        self,
        config: Configuration,
        radius: int,
        rng: random.Random,
        count: int,
    ) -> list[Configuration]:
        """Draw ``count`` configurations within ``radius`` changed option positions.

        Each neighbor changes between 1 and ``radius`` positions; a changed value
        is drawn uniformly from the option range excluding the current value.
        A radius above the option count is clamped (reported, not fatal).
        """
        self.validate(config)
        if radius < 1:
            raise ValueError(f"radius must be >= 1, got {radius}")
        if count < 1:
            raise ValueError(f"count must be >= 1, got {count}")
        if radius > len(self.options):
            log.warning(
                "neighborhood radius %d exceeds option count %d; clamped",
                radius,
                len(self.options),
            )
            radius = len(self.options)
        mutable = [i for i, opt in enumerate(self.options) if opt.cardinality > 1]
        out: list[Configuration] = []
        for _ in range(count):
            if not mutable:
                # Space of size 1: the input is its only configuration.
                out.append(config)
                continue
            k = rng.randint(1, min(radius, len(mutable)))
            positions = rng.sample(mutable, k)
            values = list(config.values)
            for i in positions:
                values[i] = self._resample_excluding(i, values[i], rng)
            out.append(Configuration(tuple(values)))
        return out

    def _resample_excluding(self, index: int, current: int, rng: random.Random) -> int:
        opt = self.options[index]
        value = rng.randint(opt.lower, opt.upper - 1)
        if value >= current:
            value += 1
        return value

    def enumerate_all(self) -> Iterator[Configuration]:
        """Yield every configuration in lexicographic order. Small spaces only."""
        ranges = [range(opt.lower, opt.upper + 1) for opt in self.options]
        for values in itertools.product(*ranges):
            yield Configuration(values)


def parse_space(spec_text: str) -> OptionSpace:
    """Parse a space definition from its JSON document form.

    Schema: ``{"options": [{"name", "kind", "lower", "upper"}, ...]}``.
    Binary options may omit lower/upper (implied 0..1).
    """
    try:
        doc = json.loads(spec_text)
    except json.JSONDecodeError as exc:
        raise SpaceError(f"space document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "options" not in doc:
        raise SpaceError('space document must be an object with an "options" list')
    entries = doc["options"]
    if not isinstance(entries, list) or not entries:
        raise SpaceError("space document declares an empty option list")
    options = []
    for entry in entries:
        if not isinstance(entry, dict) or "name" not in entry:
            raise SpaceError(f"malformed option entry: {entry!r}")
        name = entry["name"]
        kind = entry.get("kind", "integer")
        if kind == "binary":
            lower = entry.get("lower", 0)
            upper = entry.get("upper", 1)
        else:
            try:
                lower = entry["lower"]
                upper = entry["upper"]
            except KeyError as exc:
                raise SpaceError(f"option {name!r}: missing bound {exc}") from exc
        if not isinstance(lower, int) or not isinstance(upper, int):
            raise SpaceError(f"option {name!r}: bounds must be integers")
        options.append(OptionSpec(name=str(name), kind=kind, lower=lower, upper=upper))
    return OptionSpace(tuple(options))


def load_space(path: str) -> OptionSpace:
    """Read and parse a space definition file."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_space(fh.read())
