"""Helpers shared by the experiment scripts."""

from __future__ import annotations

import argparse
import dataclasses
import sys

import yaml


def load_config(cls, argv=None):
    """Build a dataclass config from defaults, an optional YAML file and ``key=value`` overrides."""
    p = argparse.ArgumentParser(description=cls.__doc__)
    p.add_argument("--config", help="YAML file with field values")
    p.add_argument("overrides", nargs="*", help="field=value (value parsed as YAML)")
    args = p.parse_args(argv)
    values = {}
    if args.config:
        with open(args.config) as fh:
            values.update(yaml.safe_load(fh) or {})
    for item in args.overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            p.error(f"override {item!r} is not key=value")
        values[key] = yaml.safe_load(raw)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - names
    if unknown:
        p.error(f"unknown config fields: {sorted(unknown)}")
    return cls(**values)


def log(msg):
    print(msg, file=sys.stderr, flush=True)
