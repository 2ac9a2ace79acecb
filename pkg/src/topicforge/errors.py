"""Shared exception roots for the topicforge package."""


class TopicForgeError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(TopicForgeError):
    """Invalid experiment configuration (bad value, unknown key, missing file)."""
