"""Run manifests: every output directory records what produced it."""

import hashlib
import json
import os
from datetime import datetime, timezone

TOOL_VERSION = "reachkit 0.1.0"


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, command, config_path=None, seed=None,
                   inputs=(), outputs=(), extra=None):
    blob = {
        "tool_version": TOOL_VERSION,
        "command": command,
        "config": str(config_path) if config_path else None,
        "seed": seed,
        "generated_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "inputs": {str(p): sha256_file(p) for p in inputs if os.path.exists(p)},
        "outputs": {str(p): sha256_file(p) for p in outputs if os.path.exists(p)},
    }
    if extra:
        blob["extra"] = extra
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as f:
        json.dump(blob, f, indent=2, sort_keys=True)
        f.write("\n")
    return path
