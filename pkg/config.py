"""File to handle run configuration: a registry of accepted keys, each with
the parser that converts its raw text, and the reader for the line based
configuration files.

A configuration file holds one `section.key = value` entry per line (`:`
works as a separator too); `#` starts a comment.
"""

__version__ = "1.1.0"

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np

from cavity_transport.errors import ConfigurationError
from cavity_transport.model import ModelParams
from cavity_transport.qme import QmeProblem
from cavity_transport.solver import SolverOptions
from cavity_transport.spectral import GridSpec

log = logging.getLogger(__name__)

SECTIONS = ("model", "grid", "solver", "sweep", "qme", "output")
SCALES = ("linear", "log")
FORMATS = ("csv", "json")


@dataclass(frozen=True)
class SweepSpec:
    """A one-parameter sweep over a ModelParams key; steps = 1 is a single run"""

    parameter: Optional[str] = None
    start: Optional[float] = None
    stop: Optional[float] = None
    steps: int = 1
    scale: str = "linear"
    workers: int = 1

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigurationError(f"sweep.steps must be >= 1, got {self.steps!r}")
        if self.workers < 1:
            raise ConfigurationError(f"sweep.workers must be >= 1, got {self.workers!r}")
        if self.parameter is None:
            return
        if self.parameter not in ModelParams.keys():
            raise ConfigurationError(
                f"sweep.parameter must name a model parameter, got {self.parameter!r}")
        for name in ("start", "stop"):
            if getattr(self, name) is None:
                raise ConfigurationError(f"sweep.{name} is required when sweep.parameter is set")
        if self.scale == "log" and not (self.start > 0 and self.stop > 0):
            raise ConfigurationError("sweep.start and sweep.stop must be > 0 for a log sweep")

    def values(self) -> List[float]:
        """(list<float>) Returns the swept values, [start] for a single step"""
        if self.parameter is None:
            return []
        if self.steps == 1:
            return [self.start]
        if self.scale == "log":
            return list(np.geomspace(self.start, self.stop, self.steps))
        return list(np.linspace(self.start, self.stop, self.steps))


@dataclass(frozen=True)
class QmeSettings:
    """Master-equation block of a run configuration"""

    enabled: bool = False
    photon_cutoff: int = 4
    max_sites: int = 3
    max_dim: int = 4096
    rotating_wave: bool = False

    def problem(self, params: ModelParams) -> QmeProblem:
        """(QmeProblem) Returns the master-equation problem for a model"""
        return QmeProblem(params, photon_cutoff=self.photon_cutoff, rotating_wave=self.rotating_wave,
                          max_sites=self.max_sites, max_dim=self.max_dim)


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "."
    formats: Tuple[str, ...] = FORMATS


@dataclass(frozen=True)
class RunConfig:
    """A fully resolved run configuration"""

    model: ModelParams = field(default_factory=ModelParams)
    grid: GridSpec = field(default_factory=GridSpec)
    solver: SolverOptions = field(default_factory=SolverOptions)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    qme: QmeSettings = field(default_factory=QmeSettings)
    output: OutputSpec = field(default_factory=OutputSpec)

    def as_dict(self) -> Dict[str, Dict[str, Any]]:
        """(dict) Returns every block as plain values, for embedding in outputs"""
        resolved = {}
        for section in SECTIONS:
            block = dataclasses.asdict(getattr(self, section))
            resolved[section] = {key: list(value) if isinstance(value, tuple) else value
                                 for key, value in block.items()}
        return resolved

    def with_model(self, **changes) -> "RunConfig":
        """(RunConfig) Returns a copy with some model parameters replaced"""
        return dataclasses.replace(self, model=dataclasses.replace(self.model, **changes))


def parse_float(key: str, raw: str) -> float:
    value = float(raw)
    if not math.isfinite(value):
        raise ValueError(f"{raw!r} is not finite")
    return value


def parse_int(key: str, raw: str) -> int:
    return int(raw)


def parse_bool(key: str, raw: str) -> bool:
    lowered = raw.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"{raw!r} is not a boolean")


def parse_str(key: str, raw: str) -> str:
    return raw


def parse_choice(*choices: str) -> Callable[[str, str], str]:
    """(Callable) Returns a parser accepting one of the given words"""
    def parser(key: str, raw: str) -> str:
        if raw not in choices:
            raise ValueError(f"{raw!r} is not one of {', '.join(choices)}")
        return raw
    return parser


def parse_formats(key: str, raw: str) -> Tuple[str, ...]:
    formats = tuple(part.strip() for part in raw.split(",") if part.strip())
    for entry in formats:
        if entry not in FORMATS:
            raise ValueError(f"{entry!r} is not one of {', '.join(FORMATS)}")
    return formats


class ConfigBuilder:
    """Config builder class that constructs a run configuration from key
    entries by dynamically assigning parsers to keys.
    """
    def __init__(self, fallback: Callable = None):
        """Construct a new config builder.

        Parameters:
            fallback (Callable<str, str, int> -> None): Called for an entry
                whose key has no parser. When None, unknown keys are errors.
        """
        # maps every accepted key to the parser of its raw text
        self._parsers = {}
        self._entries = []
        self._fallback = fallback

    def register_parser(self, key: str, parser: Callable):
        """Register a parser for a key.

        The signature of the parser should be as follows:
            parser(key: str, raw: str) -> value
        It raises ValueError when the raw text cannot be converted.

        Parameters:
            key (str): Dotted key, e.g. "model.kappa".
            parser (Callable): Converts the raw text to the value.
        """
        self._parsers[key] = parser

    def register_parsers(self, keys: Iterable[str], parser: Callable):
        """Register the same parser for several keys.

        Parameters:
            keys (<str, ...>): Iterable of dotted keys.
            parser (Callable): Converts the raw text to the value.
        """
        for key in keys:
            self._parsers[key] = parser

    def keys(self) -> Tuple[str, ...]:
        """(tuple<str>) Returns every registered key"""
        return tuple(self._parsers)

    def add_entry(self, key: str, raw: str, line: int = None):
        """Add a raw entry; later entries of the same key win.

        Parameters:
            key (str): Dotted key.
            raw (str): Unparsed value text.
            line (int): Line number in the source file, None for overrides.

        Returns:
            (ConfigBuilder): self, allows for chained method calls.
        """
        self._entries.append((key, raw, line))
        return self

    def build(self) -> RunConfig:
        """Construct the run configuration from all added entries.

        Raises:
            ConfigurationError: If a key is unknown (and no fallback is set),
                                a value cannot be parsed or a block is invalid.
        """
        values = {section: {} for section in SECTIONS}
        for key, raw, line in self._entries:
            where = f" (line {line})" if line is not None else ""

            if key not in self._parsers:
                if self._fallback is None:
                    raise ConfigurationError(f"unknown configuration key {key!r}{where}")
                self._fallback(key, raw, line)
                continue

            try:
                value = self._parsers[key](key, raw)
            except ValueError as error:
                raise ConfigurationError(f"{key}: cannot parse {raw!r}{where}: {error}") from None

            section, name = key.split(".", 1)
            values[section][name] = value

        return RunConfig(
            model=ModelParams(**values["model"]),
            grid=GridSpec(**values["grid"]),
            solver=SolverOptions(**values["solver"]),
            sweep=SweepSpec(**values["sweep"]),
            qme=QmeSettings(**values["qme"]),
            output=OutputSpec(**values["output"]),
        )

    def clear(self):
        """
        Removes all the entries that were added
        """
        self._entries.clear()


def default_builder(fallback: Callable = None) -> ConfigBuilder:
    """(ConfigBuilder) Returns a builder with every run configuration key registered"""
    builder = ConfigBuilder(fallback=fallback)
    builder.register_parsers((f"model.{key}" for key in ModelParams.keys() if key != "n_sites"), parse_float)
    builder.register_parser("model.n_sites", parse_int)
    builder.register_parsers(("grid.omega_min", "grid.omega_max", "grid.d_omega"), parse_float)
    builder.register_parsers(("solver.mixing", "solver.tol"), parse_float)
    builder.register_parser("solver.max_iter", parse_int)
    builder.register_parser("solver.check_invariants", parse_bool)
    builder.register_parser("sweep.parameter", parse_choice(*ModelParams.keys()))
    builder.register_parsers(("sweep.start", "sweep.stop"), parse_float)
    builder.register_parsers(("sweep.steps", "sweep.workers"), parse_int)
    builder.register_parser("sweep.scale", parse_choice(*SCALES))
    builder.register_parsers(("qme.enabled", "qme.rotating_wave"), parse_bool)
    builder.register_parsers(("qme.photon_cutoff", "qme.max_sites", "qme.max_dim"), parse_int)
    builder.register_parser("output.directory", parse_str)
    builder.register_parser("output.formats", parse_formats)
    return builder


def split_entry(text: str) -> Optional[Tuple[str, str]]:
    """Split one configuration line into key and raw value.

    Parameters:
        text (str): The line, possibly with a trailing comment.

    Returns:
        (tuple<str, str>): (key, raw value), or None for blank/comment lines.

    Raises:
        ValueError: If the line has content but no separator.
    """
    content = text.split("#", 1)[0].strip()
    if not content:
        return None

    # the first separator wins, so values may contain ':' or '='
    positions = [index for index in (content.find("="), content.find(":")) if index >= 0]
    if not positions:
        raise ValueError(f"expected 'key = value', got {content!r}")
    index = min(positions)
    return content[:index].strip(), content[index + 1:].strip()


def load_entries(builder: ConfigBuilder, filename: str) -> ConfigBuilder:
    """Load the entries of a configuration file into a builder.

    Raises:
        ConfigurationError: If the file cannot be read or a line is malformed.
    """
    try:
        with open(filename, "r") as file:
            lines = file.readlines()
    except OSError as error:
        raise ConfigurationError(f"cannot read configuration file {filename!r}: {error}") from None

    for number, text in enumerate(lines, start=1):
        try:
            entry = split_entry(text)
        except ValueError as error:
            raise ConfigurationError(f"{filename}, line {number}: {error}") from None
        if entry is not None:
            builder.add_entry(entry[0], entry[1], number)
    return builder


def load_config(filename: str = None, overrides: Iterable[str] = ()) -> RunConfig:
    """Loads a run configuration from a file and `key=value` overrides.

    Overrides are applied after the file, through the same key registry.

    Parameters:
        filename (str): Configuration file; None uses defaults only.
        overrides (<str, ...>): Entries of the form "section.key=value".

    Returns:
        (RunConfig): The resolved configuration.
    """
    builder = default_builder()
    if filename is not None:
        load_entries(builder, filename)

    for override in overrides:
        key, separator, raw = override.partition("=")
        if not separator:
            raise ConfigurationError(f"override must read 'key=value', got {override!r}")
        builder.add_entry(key.strip(), raw.strip())

    config = builder.build()
    log.debug("configuration resolved: %s", config)
    return config
