"""Wave-packet simulations of deep-water gravity waves in holomorphic coordinates."""

__version__ = "0.1.0"
