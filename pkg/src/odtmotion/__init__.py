"""Rigid motion estimation for optical diffraction tomography from the magnitude and phase of scattered-field data."""
from .arcs import detect_degenerate, gamma, gamma_dual, sigma, sigma_dual
from .direct import energy, estimate_relative_euler, estimate_rotation_direct
from .errors import (AmbiguityError, DegenerateInputError, EmptySupportError, InsufficientAmplitudeError,
                     OptimizationFailure, OutOfDiskError, RankDeficiencyError)
from .experiment import ErrorReport, ExperimentConfig, estimate_motion, frob_rel_error, run_scenario, write_report
from .forward import MuFrame, NuFrame, PolarGrid, RigidTrajectory, simulate_frames, simulate_mu, simulate_nu
from .frames_io import read_frames, write_frames
from .infinitesimal import estimate_rotations_infinitesimal
from .phantom import Ellipsoid, Phantom, default_phantom, single_ball
from .so3 import AngularVelocity, EulerZYZ, euler_to_rotation, integrate_rotation, rotation_to_euler
from .stereo import estimate_rotation_stereo
from .translation import estimate_translation, estimate_translation_pair, estimate_translations, optical_center

__version__ = "0.1.0"
