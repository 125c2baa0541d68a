"""Monocular video to 3D point cloud reconstruction and investigation toolkit."""

__version__ = "0.1.0"
