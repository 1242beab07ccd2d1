"""
Floquet Well - poles, critical points and inelastic scattering of a
periodically driven spherical square well.
"""

__version__ = "0.1.0"
