"""
Experiment configuration: defaults, key=value files and validation.
"""
import logging
import os
from dataclasses import dataclass, field, fields

from core.errors import ParseError, UsageError

logger = logging.getLogger(__name__)

THREADS_ENV = "RESTLAB_THREADS"
FORMATS = ("json", "csv")

INT_KEYS = {
    "n", "lam", "Q", "s", "s1", "s2", "q", "a", "b", "m", "N", "M", "X", "q_max", "samples",
    "seed", "draws", "threads", "major_cut", "cases", "levels", "budget",
}
FLOAT_KEYS = {"p", "alpha", "q_norm", "x"}
INT_LIST_KEYS = {"lambdas", "q_values", "m_vec"}
FLOAT_LIST_KEYS = {"alphas", "ps", "point"}
STRING_KEYS = {"command", "action", "kind", "variant", "piece", "method", "output", "format", "export",
               "select"}
# File spellings that differ from the attribute names
ALIASES = {"lambda": "lam", "m-vec": "m_vec", "q-values": "q_values", "major-cut": "major_cut",
           "q-max": "q_max", "q-norm": "q_norm"}


@dataclass
class ExperimentConfig:
    """
    Parameters of one command run.

    Every field defaults to None when the command supplies its own default;
    flags override values loaded from a file.
    """
    command: str = None
    action: str = None
    n: int = None
    lam: int = None
    Q: int = None
    s: int = None
    s1: int = None
    s2: int = None
    q: int = None
    a: int = None
    b: int = None
    m: int = None
    N: int = None
    M: int = None
    X: int = None
    q_max: int = None
    p: float = None
    q_norm: float = None
    alpha: float = None
    x: float = None
    alphas: list = None
    ps: list = None
    point: list = None
    lambdas: list = None
    q_values: list = None
    m_vec: list = None
    samples: int = None
    seed: int = None
    draws: int = None
    cases: int = None
    levels: int = None
    major_cut: int = None
    budget: int = None
    kind: str = None
    variant: str = None
    piece: str = None
    method: str = None
    select: str = None
    export: str = None
    output: str = None
    format: str = "json"
    threads: int = None
    sources: dict = field(default_factory=dict, repr=False)

    def merge(self, values, source):
        """
        Overwrites fields with the non-None entries of values.

        Args:
            values (dict): Field name to value
            source (str): Where the values came from, kept for messages
        """
        names = {f.name for f in fields(self)}
        for key, value in values.items():
            if value is None or key not in names:
                continue
            setattr(self, key, value)
            self.sources[key] = source
        return self

    def resolved_threads(self):
        """--threads, else RESTLAB_THREADS, else 1."""
        if self.threads is not None:
            return self.threads
        raw = os.environ.get(THREADS_ENV)
        if raw:
            try:
                return int(raw)
            except ValueError:
                raise UsageError(f"{THREADS_ENV}={raw!r} is not an integer")
        return 1

    def flag(self, name):
        """Command-line spelling of a field, for error messages."""
        reverse = {v: k for k, v in ALIASES.items()}
        return "--" + reverse.get(name, name).replace("_", "-")

    def require(self, *names):
        """
        Raises UsageError naming the first missing parameter.
        """
        for name in names:
            if getattr(self, name) is None:
                raise UsageError(f"{self.flag(name)} is required for '{self.command} {self.action or ''}'".rstrip())

    def validate(self):
        """
        Checks parameters shared by every command before any computation starts.

        Raises:
            UsageError: With the failing flag named
        """
        if self.format not in FORMATS:
            raise UsageError(f"--format must be one of {', '.join(FORMATS)}")
        positive = ("n", "lam", "Q", "q", "N", "M", "X", "q_max", "samples", "draws", "cases",
                    "major_cut", "budget", "s1", "s2")
        for name in positive:
            value = getattr(self, name)
            if value is not None and value < 1:
                raise UsageError(f"{self.flag(name)} must be positive")
        if self.seed is not None and not 0 <= self.seed < 1 << 64:
            raise UsageError("--seed must be a 64-bit nonnegative integer")
        if self.p is not None and self.p < 1:
            raise UsageError("--p must be >= 1")
        if self.q_norm is not None and self.q_norm < 1:
            raise UsageError("--q-norm must be >= 1")
        if self.alphas is not None and sorted(self.alphas) != list(self.alphas):
            raise UsageError("--alphas must be sorted ascending")
        if self.resolved_threads() < 1:
            raise UsageError("--threads must be positive")
        return self


def parse_int_list(text):
    """
    Parses "1,2,3" or "lo:hi:dyadic" (powers-of-two multiples lo, 2 lo, ... <= hi).

    Args:
        text (str): Comma list or dyadic range

    Returns:
        list: Integers
    """
    text = text.strip()
    if text.count(":") == 2:
        lo, hi, step = (part.strip() for part in text.split(":"))
        if step != "dyadic":
            raise ValueError(f"unknown range step {step!r}")
        lo, hi = int(lo), int(hi)
        if lo < 1 or hi < lo:
            raise ValueError(f"empty dyadic range {text!r}")
        values = []
        while lo <= hi:
            values.append(lo)
            lo *= 2
        return values
    return [int(part) for part in text.split(",") if part.strip()]


def parse_float_list(text):
    """Parses a comma list of floats."""
    return [float(part) for part in text.split(",") if part.strip()]


def convert(key, raw):
    """
    Converts a raw string to the type of a configuration key.

    Args:
        key (str): Attribute name
        raw (str): Raw text

    Returns:
        object: The typed value
    """
    if key in INT_KEYS:
        return int(raw)
    if key in FLOAT_KEYS:
        return float(raw)
    if key in INT_LIST_KEYS:
        return parse_int_list(raw)
    if key in FLOAT_LIST_KEYS:
        return parse_float_list(raw)
    if key in STRING_KEYS:
        return raw
    raise KeyError(key)


def load_config(path):
    """
    Reads a flat key=value configuration file.

    Blank lines and lines starting with # are ignored. A repeated key keeps
    its last value and logs a warning.

    Args:
        path (str): File path (UTF-8)

    Returns:
        ExperimentConfig: Defaults overridden by the file values

    Raises:
        ParseError: With the offending line number
    """
    values = {}
    seen = {}
    with open(path, encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            if "=" not in text:
                raise ParseError(f"expected key=value, got {text!r}", number)
            key, raw = (part.strip() for part in text.split("=", 1))
            key = ALIASES.get(key, key)
            try:
                value = convert(key, raw)
            except KeyError:
                raise ParseError(f"unknown key {key!r}", number)
            except ValueError as e:
                raise ParseError(f"bad value for {key}: {e}", number)
            if key in seen:
                logger.warning("%s: key %r on line %d overrides line %d", path, key, number, seen[key])
            seen[key] = number
            values[key] = value
    return ExperimentConfig().merge(values, path)
