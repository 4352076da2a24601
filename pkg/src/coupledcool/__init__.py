"""Cooling a levitated nanosphere with two coupled optical cavities."""
