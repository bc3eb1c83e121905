"""Zero-range process laboratory: disordered environments, exact invariant
measures, Harris-coupled simulation, open-network stationarity checks and a
finite-volume solver for the macroscopic conservation law."""

__version__ = "0.1.0"

INF = -1  # occupancy sentinel for an infinite pile (sources / reservoirs)
