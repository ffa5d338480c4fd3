"""Design-space exploration of DRAM data mappings for tiled CNN layers."""

__version__ = "0.1.0"
