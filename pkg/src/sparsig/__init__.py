"""Euler-square sparse spreading signatures with FEC for non-orthogonal access."""

__version__ = "0.1.0"

from .euler import (BudgetExceededError, EulerSquare, ParameterError, Protograph,
                    SparseMapping, UnsupportedParameterError, build_mapping_matrix,
                    check_partial_geometry, connectivity, construct_euler_square,
                    count_cycles, euler_square_exists, extract_protograph, girth,
                    verify_properties)
from .signatures import SignatureMatrix, build_signatures, cover_wyner, spectral_efficiency
from .ldpc import (BpResult, Interleaver, LdpcCode, bp_decode, encode,
                   gallager_construct, make_interleaver)
from .channel import (ActiveSet, Link, ScenarioConfig, build_link, ebn0_to_snr,
                      modulate_bpsk, sample_activity, snr_to_ebn0_db, substream, transmit)
from .receiver import (DecodeOutcome, PrunedGraph, account_errors, exact_map, mpa_mud,
                       peel, peel_structural, prune_and_classify, turbo_receive)
from .analysis import (SweepResult, degree_histogram_experiment, pe_sweep,
                       required_ebn0, required_ebn0_sweep, spectral_efficiency_curve)
