"""Tests for the EMIM attention workbench."""
