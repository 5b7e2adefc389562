"""Reader for Gmsh MSH 2.2 ASCII files (nodes + 3-node triangles)."""

from __future__ import annotations

import logging

import numpy as np

__all__ = ["load_gmsh", "GmshError"]

log = logging.getLogger(__name__)

_TRIANGLE = 2  # gmsh element type for 3-node triangles


class GmshError(ValueError):
    """Malformed or unsupported MSH input."""


def load_gmsh(path) -> tuple[np.ndarray, np.ndarray]:
    """Return (vertices (n,2), triangles (m,3)) from an MSH 2.2 ASCII file.

    Element types other than 3-node triangles are skipped; their counts are
    logged.  Node ids may be non-contiguous.
    """
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]

    sections: dict[str, list[str]] = {}
    i = 0
    while i < len(lines):
        ln = lines[i]
        if ln.startswith("$") and not ln.startswith("$End"):
            name = ln[1:]
            end = f"$End{name}"
            try:
                j = lines.index(end, i + 1)
            except ValueError:
                raise GmshError(f"section {name} not terminated by {end}") from None
            sections[name] = lines[i + 1 : j]
            i = j + 1
        else:
            i += 1

    if "MeshFormat" not in sections or not sections["MeshFormat"]:
        raise GmshError("missing $MeshFormat section")
    version = sections["MeshFormat"][0].split()[0]
    if not version.startswith("2."):
        raise GmshError(f"unsupported MSH version {version}; need 2.x ASCII")

    if "Nodes" not in sections:
        raise GmshError("missing $Nodes section")
    body = sections["Nodes"]
    try:
        n_nodes = int(body[0])
        raw = [ln.split() for ln in body[1 : 1 + n_nodes]]
        ids = [int(r[0]) for r in raw]
        coords = np.array([[float(r[1]), float(r[2])] for r in raw])
    except (IndexError, ValueError) as exc:
        raise GmshError(f"malformed $Nodes section: {exc}") from None
    if len(raw) != n_nodes:
        raise GmshError("malformed $Nodes section: node count mismatch")
    remap = {node_id: k for k, node_id in enumerate(ids)}

    if "Elements" not in sections:
        raise GmshError("missing $Elements section")
    body = sections["Elements"]
    try:
        n_elems = int(body[0]) if body else 0
    except ValueError as exc:
        raise GmshError(f"malformed $Elements section: {exc}") from None
    triangles = []
    skipped: dict[int, int] = {}
    for ln in body[1 : 1 + n_elems]:
        parts = ln.split()
        try:
            etype = int(parts[1])
            n_tags = int(parts[2])
            nodes = [int(p) for p in parts[3 + n_tags :]]
        except (IndexError, ValueError) as exc:
            raise GmshError(f"malformed element line {ln!r}: {exc}") from None
        if etype == _TRIANGLE:
            if len(nodes) != 3:
                raise GmshError(f"triangle element with {len(nodes)} nodes: {ln!r}")
            triangles.append([remap[n] for n in nodes])
        else:
            skipped[etype] = skipped.get(etype, 0) + 1

    if skipped:
        detail = ", ".join(f"type {t}: {c}" for t, c in sorted(skipped.items()))
        log.info("ignored non-triangle elements (%s)", detail)
    if not triangles:
        raise GmshError("no triangles found")
    return coords, np.asarray(triangles, dtype=np.int64)
