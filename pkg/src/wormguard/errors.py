class WormguardError(Exception):
    pass


class SetupError(WormguardError):
    """Bad topology or key provisioning input."""


class ScenarioError(WormguardError):
    """A run was asked to do something the scenario cannot support."""


class ConfigError(WormguardError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
