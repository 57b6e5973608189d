"""Validate every shipped config against configs/schema.json."""
import json
import pathlib
import sys

import jsonschema

configs = pathlib.Path(sys.argv[1])
schema = json.loads((configs / "schema.json").read_text())
jsonschema.Draft202012Validator.check_schema(schema)
validator = jsonschema.Draft202012Validator(schema)

failed = 0
for path in sorted(configs.glob("*.json")):
    if path.name == "schema.json":
        continue
    errors = list(validator.iter_errors(json.loads(path.read_text())))
    for e in errors:
        print(f"{path.name}: {'/'.join(map(str, e.absolute_path))}: {e.message}")
    failed += bool(errors)
    print(f"{path.name}: {'ok' if not errors else 'INVALID'}")

bad = {"experiment": "periodic_solve", "solver": {"tolerance": 1}}
if validator.is_valid(bad):
    print("schema accepted an unknown solver key")
    failed += 1
sys.exit(1 if failed else 0)
