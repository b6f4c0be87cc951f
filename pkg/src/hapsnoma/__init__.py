"""HAPS spot-beam NOMA simulator: grouping, beams, power allocation, outage."""

__version__ = "0.1.0"
