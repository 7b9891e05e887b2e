"""Command-line surface of the workbench."""
