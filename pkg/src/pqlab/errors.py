class CapExceeded(ValueError):
    """The instance is too large for desk-scale enumeration or sampling."""
