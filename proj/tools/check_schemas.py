#!/usr/bin/env python3
"""Validate report JSON against the shipped schemas.

usage: check_schemas.py SCHEMA_DIR NAME=FILE [NAME=FILE ...]
"""
import json
import pathlib
import sys

import jsonschema
from referencing import Registry, Resource


def main(argv):
    if len(argv) < 3:
        print(__doc__, file=sys.stderr)
        return 1
    schema_dir = pathlib.Path(argv[1])
    schemas = {p.name: json.loads(p.read_text()) for p in schema_dir.glob("*.schema.json")}
    registry = Registry().with_resources((name, Resource.from_contents(s)) for name, s in schemas.items())
    failed = 0
    for pair in argv[2:]:
        name, path = pair.split("=", 1)
        schema = schemas[name + ".schema.json"]
        validator = jsonschema.Draft202012Validator(schema, registry=registry)
        errors = sorted(validator.iter_errors(json.loads(pathlib.Path(path).read_text())), key=lambda e: list(e.path))
        for e in errors[:10]:
            print(f"{path}: /{'/'.join(map(str, e.path))}: {e.message[:200]}")
        print(f"{'ok  ' if not errors else 'FAIL'} {name} {path}")
        failed += bool(errors)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
