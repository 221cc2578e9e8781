class AdapterError(Exception):
    """A request, config, or selftest problem the adapter can name."""
