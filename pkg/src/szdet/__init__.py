"""Scott-Zhang determining projections for 2D/3D Navier-Stokes, checked numerically."""

__version__ = "0.1.0"
