"""Tests for the dpskit package."""
