__all__ = [
    "corpus",
    "events",
    "exports",
    "filling",
    "fits",
    "funcspace",
    "inequalities",
    "measure",
    "numerics",
    "space",
    "traceext",
    "uniformize",
    "utils",
    "verify",
]
