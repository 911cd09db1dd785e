"""posebench-adapters: export matchers and depth models to engine file formats."""

__version__ = "0.1.0"

from .export import export_depth, export_matches
from .manifest import AdapterManifest, read_manifest

__all__ = ["AdapterManifest", "__version__", "export_depth", "export_matches", "read_manifest"]
