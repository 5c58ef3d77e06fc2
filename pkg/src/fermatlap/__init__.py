"""Fermat distances, density-weighted graph Laplacians and spectral clustering."""
from .clustering import accuracy, kmeans, spectral_cluster_dn, spectral_cluster_fd
from .fermat import FermatParams, fermat_pairwise, fermat_sssp, normalize_fermat
from .geometry import fermat_ball, integrate_geodesic
from .graph_laplacian import LaplacianSpec, bandwidth_rule, build_weights, laplacian_matrix
from .percolation import estimate_mu, reference_mu
from .sampling import DensityModel, PointCloud, sample_iid, sample_ppp
from .spectral import continuum_spectrum_1d, eig_smallest

__version__ = "0.1.0"

__all__ = [
    "DensityModel", "PointCloud", "sample_iid", "sample_ppp",
    "FermatParams", "fermat_pairwise", "fermat_sssp", "normalize_fermat",
    "fermat_ball", "integrate_geodesic",
    "LaplacianSpec", "bandwidth_rule", "build_weights", "laplacian_matrix",
    "eig_smallest", "continuum_spectrum_1d",
    "kmeans", "accuracy", "spectral_cluster_fd", "spectral_cluster_dn",
    "estimate_mu", "reference_mu",
]
