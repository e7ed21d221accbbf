"""Task learning from labeled demonstrations with ergodic trajectory control."""

__version__ = "0.1.0"
