from services.potential_service import PotentialSpec, RadialTerm


def disk(amplitude=-1.0, components=("v11", "v22"), radius=1.0):
    term = RadialTerm("disk-indicator", amplitude, radius)
    return PotentialSpec(
        v11=(term,) if "v11" in components else (),
        v22=(term,) if "v22" in components else (),
    )


def gaussian(amplitude=-1.0, width=1.0):
    term = RadialTerm("gaussian", amplitude, width)
    return PotentialSpec(v11=(term,), v22=(term,))
