"""Context-aware 2D-to-3D human pose lifting on a small numpy autodiff engine."""
__version__ = "0.1.0"
