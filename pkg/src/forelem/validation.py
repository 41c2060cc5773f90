"""Structural checks on physical storage, shared by tests and the CLI."""
from __future__ import annotations

from .concretize.build import PhysicalStorage


class InvariantError(AssertionError):
    pass


def check_offsets(ptr, total: int | None = None) -> None:
    if not ptr or ptr[0] != 0:
        raise InvariantError("offsets must start at 0")
    if any(b < a for a, b in zip(ptr, ptr[1:])):
        raise InvariantError("offsets must be nondecreasing")
    if total is not None and ptr[-1] != total:
        raise InvariantError(f"last offset {ptr[-1]} differs from leaf count {total}")


def check_permutation(perm, n: int) -> None:
    if sorted(perm) != list(range(n)):
        raise InvariantError("perm is not a bijection on the outer domain")


def check_physical(phys: PhysicalStorage) -> None:
    """Offset laws, permutation bijectivity and matching leaf extents."""
    comps = phys.components
    for name, inst in phys.instances.items():
        st = inst.storage
        leaves = sum(len(g) for g in inst.groups.values())
        if st.perm:
            check_permutation(comps[f"{name}_perm"], inst.extents[0])
        if st.dim_reduced and not st.blocked:
            check_offsets(comps[f"{name}_ptr"], leaves)
        if st.dim_reduced and st.blocked:
            for p in comps[f"{name}_ptr"]:
                check_offsets(p)
        if st.split:
            sizes = {len(comps[f"{name}_{r.name}"]) for r in st.records}
            if len(sizes) > 1:
                raise InvariantError(f"{name} components differ in length")
        if st.len_mode == "padded" and not st.blocked and st.depth and \
                st.position_major is None and comps[f"{name}_len"] != inst.width:
            raise InvariantError("padded width differs from the longest group")
