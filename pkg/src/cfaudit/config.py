"""Run-configuration files: flat ``key = value`` text.

Lines are ``key = value`` pairs; blank lines and lines starting with
``#`` are ignored; keys may not repeat. Every command validates its own
key set, so a misspelled or out-of-place key is an error rather than a
silent no-op. After a run resolves its settings (defaults filled in,
command-line overrides applied), :meth:`ConfigMap.resolved_text` renders
them back in the same format; feeding that text to the same command
reproduces the run.
"""

import importlib.resources
import io
import os
from typing import Optional

from .errors import ConfigError

# canonical normalization names; "paper-literal" is accepted on input as
# an alias for the group-denominator convention
_NORMALIZATION_ALIASES = {"pair-mean": "pair-mean",
                          "group-denominator": "group-denominator",
                          "paper-literal": "group-denominator"}

_REQUIRED = object()

_TRUE_TOKENS = {"true", "yes", "on", "1"}
_FALSE_TOKENS = {"false", "no", "off", "0"}


def parse_config_text(text: str) -> dict:
    """Parse configuration text into an ordered key -> raw-string map."""
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("config line %d is not 'key = value': %r"
                              % (lineno, raw))
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError("config line %d has an empty key" % lineno)
        if key in pairs:
            raise ConfigError("config key %r repeats at line %d"
                              % (key, lineno))
        pairs[key] = value
    return pairs


def read_config(path) -> dict:
    if isinstance(path, io.TextIOBase):
        return parse_config_text(path.read())
    try:
        with open(os.fspath(path), "r", encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError("cannot read config file %s: %s" % (path, exc))


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(_format_value(v) for v in value)
    return str(value)


class ConfigMap:
    """One command's settings: raw pairs in, typed values out.

    Every getter records the resolved value, so after the command has
    pulled everything it needs, ``finish()`` can reject unread keys and
    ``resolved_text()`` can echo the complete effective configuration.
    """

    def __init__(self, pairs: dict, command: str):
        self._raw = dict(pairs)
        self._resolved = {"command": command}
        self.command = command
        file_command = self._raw.pop("command", None)
        if file_command is not None and file_command != command:
            raise ConfigError("config file says command = %r but the %r "
                              "command was invoked" % (file_command, command))

    # -- overrides ---------------------------------------------------------
    def override(self, key: str, value) -> None:
        """Replace a raw value before resolution (command-line flags)."""
        self._raw[key] = _format_value(value)

    # -- typed getters -------------------------------------------------------
    def _take(self, key, default):
        if key in self._raw:
            return self._raw.pop(key)
        if default is _REQUIRED:
            raise ConfigError("config key %r is required for the %r command"
                              % (key, self.command))
        return None

    def get_str(self, key: str, default=_REQUIRED, choices=None) -> str:
        raw = self._take(key, default)
        value = default if raw is None else raw
        if choices is not None and value not in choices:
            raise ConfigError("config key %r must be one of %s, got %r"
                              % (key, ", ".join(choices), value))
        self._resolved[key] = value
        return value

    def get_int(self, key: str, default=_REQUIRED, minimum=None) -> int:
        raw = self._take(key, default)
        if raw is None:
            value = default
        else:
            try:
                value = int(raw)
            except ValueError:
                raise ConfigError("config key %r must be an integer, got %r"
                                  % (key, raw))
        if minimum is not None and value < minimum:
            raise ConfigError("config key %r must be at least %d" % (key, minimum))
        self._resolved[key] = value
        return value

    def get_float(self, key: str, default=_REQUIRED, lo=None, hi=None) -> float:
        raw = self._take(key, default)
        if raw is None:
            value = float(default)
        else:
            try:
                value = float(raw)
            except ValueError:
                raise ConfigError("config key %r must be a number, got %r"
                                  % (key, raw))
        if lo is not None and not (lo < value < hi):
            raise ConfigError("config key %r must lie strictly between %s "
                              "and %s" % (key, lo, hi))
        self._resolved[key] = value
        return value

    def get_bool(self, key: str, default=_REQUIRED) -> bool:
        raw = self._take(key, default)
        if raw is None:
            value = bool(default)
        elif raw.lower() in _TRUE_TOKENS:
            value = True
        elif raw.lower() in _FALSE_TOKENS:
            value = False
        else:
            raise ConfigError("config key %r must be true/false, got %r"
                              % (key, raw))
        self._resolved[key] = value
        return value

    def get_list(self, key: str, default=_REQUIRED, choices=None) -> tuple:
        raw = self._take(key, default)
        if raw is None:
            values = tuple(default)
        else:
            values = tuple(t.strip() for t in raw.split(",") if t.strip())
        if choices is not None:
            for v in values:
                if v not in choices:
                    raise ConfigError("config key %r: %r is not one of %s"
                                      % (key, v, ", ".join(choices)))
        self._resolved[key] = values
        return values

    def get_ints(self, key: str, default=_REQUIRED, minimum=None) -> tuple:
        values = self.get_list(key, default)
        try:
            out = tuple(int(v) for v in values)
        except ValueError:
            raise ConfigError("config key %r must hold integers" % (key,))
        if minimum is not None and any(v < minimum for v in out):
            raise ConfigError("config key %r values must be at least %d"
                              % (key, minimum))
        self._resolved[key] = out
        return out

    def get_floats(self, key: str, default=_REQUIRED) -> tuple:
        values = self.get_list(key, default)
        try:
            out = tuple(float(v) for v in values)
        except ValueError:
            raise ConfigError("config key %r must hold numbers" % (key,))
        self._resolved[key] = out
        return out

    def get_normalization(self, key: str = "normalization",
                          default: str = "pair-mean") -> str:
        raw = self._take(key, default)
        name = default if raw is None else raw
        if name not in _NORMALIZATION_ALIASES:
            raise ConfigError("config key %r must be one of %s, got %r"
                              % (key, ", ".join(sorted(set(_NORMALIZATION_ALIASES))),
                                 name))
        value = _NORMALIZATION_ALIASES[name]
        self._resolved[key] = value
        return value

    def get_optional_str(self, key: str) -> Optional[str]:
        raw = self._take(key, None)
        if raw is not None:
            self._resolved[key] = raw
        return raw

    # -- completion ----------------------------------------------------------
    def finish(self) -> None:
        """Reject keys no getter consumed."""
        if self._raw:
            raise ConfigError("unknown config keys for the %r command: %s"
                              % (self.command,
                                 ", ".join(sorted(self._raw))))

    def resolved(self) -> dict:
        return dict(self._resolved)

    def resolved_text(self) -> str:
        """The effective settings as re-runnable configuration text."""
        keys = sorted(k for k in self._resolved if k != "command")
        lines = ["command = %s" % self.command]
        lines += ["%s = %s" % (k, _format_value(self._resolved[k]))
                  for k in keys]
        return "\n".join(lines) + "\n"

    def resolved_comment(self) -> str:
        """Single-line provenance stamp for delimited outputs."""
        keys = sorted(k for k in self._resolved if k != "command")
        parts = ["command=%s" % self.command]
        parts += ["%s=%s" % (k, _format_value(self._resolved[k]))
                  for k in keys]
        return "# config: " + "; ".join(parts)


def list_bundled_configs() -> tuple:
    """Names of the configuration files shipped inside the package."""
    root = importlib.resources.files("cfaudit") / "configs"
    return tuple(sorted(p.name[:-4] for p in root.iterdir()
                        if p.name.endswith(".cfg")))


def bundled_config_path(name: str) -> str:
    """Filesystem path of a shipped configuration file.

    These record the generating parameters for the benchmark scenarios,
    the four-group demonstration, and the replication experiments, ready
    to hand to ``cfaudit <command> --config``.
    """
    path = importlib.resources.files("cfaudit") / "configs" / (name + ".cfg")
    if not path.is_file():
        raise ConfigError("no bundled config named %r; available: %s"
                          % (name, ", ".join(list_bundled_configs())))
    return os.fspath(path)
