"""Example package for the pairplan library."""
