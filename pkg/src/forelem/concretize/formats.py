"""Recognizing well-known sparse formats from a storage's shape."""
from __future__ import annotations

from ..transform.storage import MaterializedStorage

FORMATS = ("COO", "CSR", "CCS", "ELLPACK_ITPACK", "JDS", "BLOCKED_HYBRID", "UNNAMED")


def storage_shape(st: MaterializedStorage) -> dict:
    """Name-free summary of a storage plan; the input to recognition."""
    if st.depth == 0:
        grouping = "flat"
    elif st.depth == 1 and st.levels[0].fields in (("row",), ("col",)):
        grouping = st.levels[0].fields[0]
    else:
        grouping = "+".join("=".join(l.fields) for l in st.levels)
    roles = []
    for r in st.records:
        if r.kind == "data":
            roles.append("value")
        else:
            roles.append(r.source if r.side is None else f"{r.side}.{r.source}")
    return {
        "grouping": grouping,
        "fields": sorted(roles),
        "join": st.join is not None,
        "split": st.split,
        "len_mode": st.len_mode,
        "dim_reduced": st.dim_reduced,
        "perm": st.perm,
        "position_major": st.position_major is not None,
        "blocks": [l.block[1] if l.block else None for l in st.levels],
    }


def storage_format(shape: dict) -> str:
    if any(shape["blocks"]):
        return "BLOCKED_HYBRID"
    g = shape["grouping"]
    if shape["join"] or not shape["split"]:
        return "UNNAMED"
    if g == "flat":
        return "COO" if shape["fields"] == ["col", "row", "value"] else "UNNAMED"
    if g not in ("row", "col"):
        return "UNNAMED"
    other = "col" if g == "row" else "row"
    if shape["fields"] != sorted([other, "value"]):
        return "UNNAMED"
    pm, perm = shape["position_major"], shape["perm"]
    if shape["len_mode"] == "compact" and shape["dim_reduced"]:
        if not pm and not perm:
            return "CSR" if g == "row" else "CCS"
        if pm and perm and g == "row":
            return "JDS"
        return "UNNAMED"
    if shape["len_mode"] == "padded" and g == "row" and not perm and not shape["dim_reduced"]:
        # position-major traversal reads the same column-major arrays
        return "ELLPACK_ITPACK"
    return "UNNAMED"


def recognize_format(descriptor) -> str:
    """Format of a variant: the single named format among its storages."""
    shapes = list(descriptor.storages)
    if descriptor.block_geometry or any(any(s["blocks"]) for s in shapes):
        return "BLOCKED_HYBRID"
    named = {storage_format(s) for s in shapes} - {"UNNAMED"}
    if len(named) == 1:
        return named.pop()
    return "UNNAMED"
