"""Run manifests: enough to repeat a command and check its outputs byte for byte."""

from __future__ import annotations

import hashlib
import json
import platform
from pathlib import Path


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def versions() -> dict:
    import mpmath
    import numba
    import numpy
    import scipy

    from .. import __version__

    return {
        "artifact": __version__,
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "mpmath": mpmath.__version__,
    }


def write_manifest(out_dir: Path, command: str, argv: list, cwd: str, seed: int, outputs: list,
                   untracked: list = (), extra: dict | None = None) -> Path:
    """Record the invocation and hashes of ``outputs`` (paths inside ``out_dir``)."""
    data = {
        "command": command,
        "argv": list(argv),
        "cwd": cwd,
        "seed": seed,
        "outputs": {Path(p).name: sha256(p) for p in outputs},
        "untracked": [Path(p).name for p in untracked],
        "versions": versions(),
    }
    if extra:
        data.update(extra)
    path = Path(out_dir) / f"{command}.manifest.json"
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


def compare_outputs(manifest: dict, out_dir: Path) -> list[str]:
    """Names whose hash in ``out_dir`` differs from the manifest."""
    bad = []
    for name, digest in manifest["outputs"].items():
        p = Path(out_dir) / name
        if not p.exists() or sha256(p) != digest:
            bad.append(name)
    return bad
