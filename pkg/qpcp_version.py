# This file is automatically generated by the build process when version is
# updated in pyproject.toml.
__version__ = "0.1.0"
