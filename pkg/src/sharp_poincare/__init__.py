"""Sharp Poincaré-Sobolev constants and their extremals on Steiner symmetric domains."""

__version__ = "0.1.0"
