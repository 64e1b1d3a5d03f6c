"""Brauer-Manin obstructions on Markoff surfaces."""
