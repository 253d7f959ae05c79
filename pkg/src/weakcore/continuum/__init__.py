"""Continuum-player games on (0, 1], their discretizations and blocking search."""
from .game import ContinuumGame, adaptive_gauss, discretize, integrate_payoff, lifted_joint
from .profiles import (IntervalPartition, PartitionNet, StepProfile, complement, contains, lift,
                       measure, normalize_intervals)
from .search import (ContinuumCertificate, SearchSpace, continuum_margin, dyadic_samples,
                     find_blocking_continuum, iter_blocking_continuum, transfer_certificate,
                     verify_continuum_certificate)
from .pipeline import (PipelineReport, blocking_transfer, default_probes, default_test_points,
                       equi_usc_falsifier, existence_pipeline, regularity_diagnostics, weak_distance)
