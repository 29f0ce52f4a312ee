"""
Base Component class for the stateful parts of the toolkit
"""
import sys

import config


class BaseComponent:
    """Base class giving a component a name, a role and tagged progress logging"""

    def __init__(self, name: str, role: str):
        """
        Initialize the base component

        Args:
            name: Name used as the log tag
            role: Short description of what the component does
        """
        self.name = name
        self.role = role

    def log(self, message: str) -> None:
        """
        Print a tagged progress message to stderr when verbose logging is on

        Args:
            message: Text after the "[name]" tag
        """
        if config.VERBOSE:
            print(f"[{self.name}] {message}", file=sys.stderr)

    def __str__(self):
        return f"{self.name} ({self.role})"
