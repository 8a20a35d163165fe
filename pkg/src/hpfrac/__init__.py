"""hp finite elements for the integral fractional Laplacian on the unit cube."""

from .assembly import StiffnessSystem, assemble, solve
from .experiments import ExperimentConfig, ExperimentRecord, fit_rate, run_convergence
from .interp import interp_global, interp_reference
from .kernel import KernelParams, PairClass, QuadOrders, classify_pair, exterior_weight, kernel_constant
from .mesh import Layer, boundary_subdomain, build_cutoff, build_tensor_mesh, geometric_mesh, geometric_nodes_1d
from .norms import EnergySequence, distance, extrapolate_energy, h1_mu_norm, slobodeckij_sq
from .reference import exact_energy_1d, exact_solution_1d
from .space import FeFunction, FeSpace, build_space

__version__ = "0.1.0"
