"""Graph-limit transition paths of the Onsager-Machlup functional."""

__version__ = "0.1.0"
