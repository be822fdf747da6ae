class BridgeError(Exception):
    """Base for everything this package raises on purpose."""


class InputError(BridgeError):
    """An input file is missing, unreadable, or malformed."""


class PromptError(BridgeError):
    """A prompt file violates the exchange format."""
