"""Strict reader for versioned JSON config documents.

Problems are collected rather than raised one at a time so a bad document
reports everything wrong with it in a single ConfigError.
"""

from __future__ import annotations

import math
from contextlib import contextmanager

from .errors import ConfigError

SCHEMA_VERSION = 1


class Reader:
    def __init__(self, source: str):
        self.source = source
        self.problems: list[str] = []

    def problem(self, msg: str):
        self.problems.append(msg)

    def fail(self):
        raise ConfigError(self.problems or ["invalid document"], self.source)

    def fail_if_problems(self):
        if self.problems:
            self.fail()

    @contextmanager
    def guard(self, where: str):
        try:
            yield
        except (ValueError, TypeError, KeyError) as exc:
            msg = exc.args[0] if exc.args else type(exc).__name__
            self.problem(f"{where}: {msg}")

    def obj(self, value, where, required=(), optional=()):
        if not isinstance(value, dict):
            self.problem(f"{where}: expected an object")
            return None
        ok = True
        for key in sorted(set(required) - set(value)):
            self.problem(f"{where}: missing field {key!r}")
            ok = False
        # unknown fields are reported but parsing continues so later problems surface too
        for key in sorted(set(value) - set(required) - set(optional)):
            self.problem(f"{where}: unknown field {key!r}")
        return value if ok else None

    def version(self, doc):
        v = doc.get("schema_version")
        if v != SCHEMA_VERSION:
            self.problem(f"unsupported schema_version {v!r} (expected {SCHEMA_VERSION})")

    def kind(self, doc, expected):
        if "kind" in doc and doc["kind"] != expected:
            self.problem(f"document kind is {doc['kind']!r}, expected {expected!r}")

    def string(self, doc, key, where):
        v = doc.get(key)
        if not isinstance(v, str) or not v:
            self.problem(f"{where}.{key}: expected a non-empty string")
            return ""
        return v

    def number(self, doc, key, where, default=None, positive=False, lo=None, hi=None):
        v = doc.get(key, default)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.problem(f"{where}.{key}: expected a finite number")
            return default if default is not None else 0.0
        if positive and not v > 0:
            self.problem(f"{where}.{key}: must be positive")
        if lo is not None and v < lo or hi is not None and v > hi:
            self.problem(f"{where}.{key}: must lie in [{lo}, {hi}]")
        return float(v)

    def integer(self, doc, key, where, default=None):
        v = doc.get(key, default)
        if isinstance(v, bool) or not isinstance(v, int):
            self.problem(f"{where}.{key}: expected an integer")
            return 0
        return v

    def vector(self, doc, key, where):
        v = doc.get(key)
        if (not isinstance(v, list) or len(v) != 3
                or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in v)):
            self.problem(f"{where}.{key}: expected three numbers")
            return (0.0, 0.0, 0.0)
        return tuple(float(c) for c in v)

    def array(self, doc, key, where):
        v = doc.get(key)
        if not isinstance(v, list):
            self.problem(f"{where}.{key}: expected a list")
            return []
        return v
