"""Aircraft-overflight acoustic capture and classification toolkit."""

__version__ = "0.1.0"
