"""Benchmark problem definitions."""
from .diffdrive import DiffDriveWorld, diffdrive_dynamics, diffdrive_problem, signed_distances
from .lasso import LassoInstance, generate_lasso
from .needle import NeedleParams, NeedleState, needle_problem, needle_step
from .satellite import SatelliteParams, satellite_dynamics, satellite_oracle, satellite_problem
