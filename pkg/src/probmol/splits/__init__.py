"""Dataset partitioning: random, stratified, iterative-stratified and cluster splits."""

from .basic import (SplitPlan, iterative_stratified_split, largest_remainder, random_split,
                    stratified_split)
from .cluster import (ClusterAssignment, ClusterLadder, attach_noise, cluster_assign,
                      cluster_ladder, encode_targets, intra_inter_similarity, pca_embed,
                      read_split_manifest, write_split_manifest)
from .hdbscan import hdbscan

__all__ = ["SplitPlan", "iterative_stratified_split", "largest_remainder", "random_split",
           "stratified_split", "ClusterAssignment", "ClusterLadder", "attach_noise",
           "cluster_assign", "cluster_ladder", "encode_targets", "intra_inter_similarity",
           "pca_embed", "read_split_manifest", "write_split_manifest", "hdbscan"]
