# Stop Profiler - Main Package
# APC stop events -> diurnal profiles, stop distances, clusters

__version__ = "1.0.0"
__author__ = "Stop Profiler Team"
