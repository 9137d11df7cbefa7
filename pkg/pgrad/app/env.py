import os


def thread_cap() -> int | None:
    """Upper bound on solver workers from PGRAD_THREADS, read at call time."""
    v = os.getenv("PGRAD_THREADS")
    if not v:
        return None
    try:
        cap = int(v)
    except ValueError:
        raise RuntimeError(f"PGRAD_THREADS must be an integer, got {v!r}") from None
    if cap < 1:
        raise RuntimeError(f"PGRAD_THREADS must be at least 1, got {cap}")
    return cap


SERVICE_NAME = os.getenv("PGRAD_SERVICE_NAME", "pgrad")
LOG_LEVEL = os.getenv("PGRAD_LOG_LEVEL", "INFO").upper()
