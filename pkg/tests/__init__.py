"""Tests for the pairplan library."""
