"""Spatially regularized diffusion learning for hyperspectral image clustering."""

from .diffusion import diffusion_distance, diffusion_distance_bruteforce, embed
from .evaluation import evaluate
from .graph import GraphConfig, SparseMarkov, build_graph, is_connected
from .hsi_io import HsiCube, crop, jitter_duplicates, load_cube, save_cube, synth_stripes
from .labeling import LabelMap, SRDLConfig, cluster
from .modes import ModeModel, estimate_k, kde, rho_and_parent, select_modes
from .spectral import DiffusionEmbedding, eigendecompose, select_m

__version__ = "0.1.0"
