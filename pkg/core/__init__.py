"""Numeric core of the EMIM attention workbench."""
