class DomainError(ValueError):
    """Raised when an input falls outside an operation's mathematical domain."""


class ScenarioError(ValueError):
    """Invalid scenario or profile file. ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message
