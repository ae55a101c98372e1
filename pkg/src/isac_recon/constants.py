"""Shared physical constants."""

# Propagation speed (m/s). The round value keeps bin-geometry arithmetic
# (range/velocity resolutions, bin indices) consistent across the toolkit.
C_LIGHT = 3.0e8
