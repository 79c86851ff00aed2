"""Config, data, presets and the command-line interface."""
