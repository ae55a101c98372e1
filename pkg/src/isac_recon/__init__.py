"""Multi-node UL/DL cooperative ISAC 4D environmental reconstruction toolkit."""

__version__ = "0.1.0"
