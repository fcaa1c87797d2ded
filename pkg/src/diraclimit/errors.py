class ConfigurationError(ValueError):
    """Invalid preset, grid, or experiment parameters."""


class DegenerateSpinorError(ValueError):
    """The reference spinor has (numerically) no component in the requested band."""


class MixednessError(ValueError):
    """A mixed state is too close to pure for the Schatten-2 bound."""


class DimensionError(ValueError):
    """Arrays or grids with incompatible shapes."""


class MissingInputError(FileNotFoundError):
    """A required snapshot file was not found."""
