"""Range-aided inertial navigation with a single anchor."""

__version__ = "0.1.0"
