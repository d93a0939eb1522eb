"""Validate a show bundle, and optionally a session log and frames file, against schemas/."""

import argparse
import json
import pathlib
import sys

from jsonschema import Draft202012Validator
from referencing import Registry, Resource

SCHEMAS = pathlib.Path(__file__).resolve().parent.parent / "schemas"


def registry():
    resources = []
    for path in SCHEMAS.glob("*.schema.json"):
        doc = json.loads(path.read_text())
        resources.append((doc["$id"], Resource.from_contents(doc)))
    return Registry().with_resources(resources)


def validator(name, pointer=None):
    doc = json.loads((SCHEMAS / name).read_text())
    schema = {"$ref": doc["$id"] + (pointer or "")} if pointer else doc
    return Draft202012Validator(schema, registry=registry())


def check(v, instance, where):
    errors = sorted(v.iter_errors(instance), key=lambda e: list(e.path))
    for e in errors[:5]:
        print(f"{where}: {'/'.join(map(str, e.path)) or '<root>'}: {e.message}")
    return not errors


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("bundle", type=pathlib.Path)
    ap.add_argument("--script", type=pathlib.Path)
    ap.add_argument("--log", type=pathlib.Path)
    ap.add_argument("--frames", type=pathlib.Path)
    ap.add_argument("--control", type=pathlib.Path, help="NDJSON of server messages")
    a = ap.parse_args()
    ok = check(validator("show.schema.json"), json.loads((a.bundle / "show.json").read_text()), "show.json")
    show = json.loads((a.bundle / "show.json").read_text())
    for rig in show["rigs"].values():
        ok &= check(validator("mesh.schema.json"), json.loads((a.bundle / rig["mesh"]).read_text()), rig["mesh"])
    for p in sorted((a.bundle / "clips").glob("*.clip.json")):
        ok &= check(validator("clip.schema.json"), json.loads(p.read_text()), p.name)
    if a.script:
        ok &= check(validator("script.schema.json"), json.loads(a.script.read_text()), a.script.name)
    for path, v in [(a.log, validator("log.schema.json")),
                    (a.frames, validator("common.schema.json", "#/$defs/render_frame")),
                    (a.control, validator("control.schema.json", "#/$defs/server"))]:
        if path:
            for n, line in enumerate(path.read_text().splitlines(), 1):
                ok &= check(v, json.loads(line), f"{path.name}:{n}")
    print("ok" if ok else "schema violations found")
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
