"""Conversational question answering over technical operating manuals."""

__version__ = "0.1.0"
