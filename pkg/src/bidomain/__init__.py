"""Coupled heart-torso bidomain solver with a block-LU preconditioner.

The package assembles the symmetric positive semi-definite two-by-two
block system of the coupled transmembrane / extra-cellular potentials,
preconditions it by a block factorisation whose Schur block is replaced by
a sparse monodomain surrogate, and solves it with a deflated conjugate
gradient.  A dense oracle verifies the structural identities on small
instances and a benchmark harness measures how the cost scales with mesh
refinement.
"""

from .conductivity import ConductivityParams, TensorField, default_params
from .errors import (AssemblyError, BidomainError, ConfigError,
                     NonConvergenceError, NumericalBreakdownError,
                     NumericalDegeneracyError, OracleError,
                     PreconditionerError)
from .ionic import IonicParams, StimulusProtocol, StimulusSite
from .krylov import SolveStats, pcg_solve
from .mesh import (Mesh, Region, RestrictionMap, build_cube_mesh,
                   build_heart_torso_2d, build_square_mesh, restrict,
                   transpose_restrict)
from .precond import (BlockLUPreconditioner, IncompleteCholesky0,
                      ExactFactorization, Jacobi, build_monodomain_matrix,
                      make_inner, regularize_stiffness)
from .system import BidomainSystem, BlockVector, gamma
from .simulate import (ActivationMap, SimState, SimulationResult,
                       SimulationSetup, activation_times, run_simulation,
                       time_step)
from .bench import (BenchConfig, BenchRecord, ScalingStudy, calibrate_costs,
                    growth_rate, run_scaling_study)

__version__ = "0.1.0"
