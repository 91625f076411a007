"""Behavioral toolkit for FeFET-based reconfigurable frequency multipliers."""
