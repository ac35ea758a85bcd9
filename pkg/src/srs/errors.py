"""Engine error types."""


class ConfigurationError(Exception):
    """Raised for structural mistakes: unknown names, collisions, invalid declarations."""


class NotFulfilledError(Exception):
    """Raised when a fulfilled-only query is made on an unfulfilled activation."""


class ScenarioError(Exception):
    """Raised for unparseable scenario files."""
