"""Exception hierarchy shared by the model, the DSE and the CLI."""


class DseError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(DseError):
    """Malformed or inconsistent configuration (geometry, cost table, run options)."""


class NetworkError(ConfigError):
    """A network description violates a layer invariant."""


class CapacityError(DseError):
    """A linear address or tile does not fit in the DRAM chip."""


class BoundsError(DseError):
    """A DRAM coordinate lies outside the geometry."""


class InfeasibleLayerError(DseError):
    """No tiling of a layer fits the on-chip buffers."""

    def __init__(self, layer_name):
        super().__init__(f"layer {layer_name!r}: no tiling fits the on-chip buffers")
        self.layer_name = layer_name


class OracleMismatch(DseError):
    """The trace replay disagrees with the closed-form model."""
