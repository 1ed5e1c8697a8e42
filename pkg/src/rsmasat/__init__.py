"""Rate-splitting multigroup multicast beamforming for multibeam GEO satellites."""
__version__ = "0.1.0"
