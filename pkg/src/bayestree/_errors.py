class DepthCapExceeded(RecursionError):
    """The partition recursion went deeper than the configured cap."""
