"""Geodesic distances between trees and the inference toolkit on top.

The backbone is the polynomial-time Owen-Provan construction of the
geodesic in the orthant complex of tree space.  Around it: Newick and
alignment ingestion, delta-hyperbolicity of distance matrices, classical
MDS, distance-based tree building and tree-of-trees clustering, Markov
character simulation, bootstrap/cross-validation harnesses, and a
simulated-annealing search for boundary data sets.
"""

__version__ = "0.1.0"

from .dmatrix import DistanceMatrix
from .embedding import EmbeddingResult, classical_mds, kernel_transform, stress
from .errors import DomainError, ParseError, TreespaceError, ValidationError
from .geodesic import (GeodesicPath, SupportPair, boundary_trees, cone_path,
                       distance_matrix, geodesic, geodesic_distance,
                       min_weight_cover, point_on_path)
from .hyperbolicity import DeltaReport, four_point_check, gromov_delta
from .inference import (AnnealResult, TopologyBins, anneal_to_boundary,
                        bin_topologies, bootstrap_trees, bootstrap_weights,
                        estimate_tree, loo_trees, nearest_boundary_neighbors,
                        neighborhood_count, shannon_diversity, star_tree)
from .newick import (Alignment, Tree, parse_alignment, parse_newick,
                     parse_trees, write_newick)
from .simulate import EvolutionModel, evolve, make_tree, random_tree
from .splits import (Split, SplitSet, classify_edges, compatible,
                     partition_into_bins, splits_to_tree, tree_to_splits)
from .treebuild import (Dendrogram, cut_dendrogram, hamming_matrix,
                        jc69_matrix, neighbor_joining, single_linkage, upgma)

__all__ = [name for name in dir() if not name.startswith("_")]
