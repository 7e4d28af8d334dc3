"""kleinlab: hyperbolic geometry, return-map cocycles and arithmeticity probes."""

__version__ = "0.1.0"
