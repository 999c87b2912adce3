"""Location-privacy auditing of geotagged posts."""

__version__ = "0.1.0"
