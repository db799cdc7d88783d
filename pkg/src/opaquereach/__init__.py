"""Set-based verification of k-initial-state opacity for discrete-time LTI systems."""

__version__ = "0.1.0"

from .approx import ApproxPair, approx_reach, cost_model, verify_sound
from .decentralized import (AdversaryEnsemble, CommGraph, check_aggregated,
                            check_co_opacity, check_decentralized,
                            simulate_collusion)
from .epsilon import check_eps_K_iso, check_eps_k_iso, opacity_radius
from .geometry import (DEFAULT_TOL, HPolytope, Tolerances, VPolytope, Zonotope,
                       backend_name)
from .nonlinear import NlSystem, SampleCloud, nl_falsify, nl_reach_samples
from .opacity import (Status, Verdict, check_K_iso, check_pre0_conditions,
                      check_strong_k_iso, check_weak_k_iso, k_step_schedule,
                      prune_secret, set_algebra_suite)
from .outputctrl import (OcWitness, is_output_controllable,
                         oc_witness_from_opacity, synth_opaque_pair)
from .system import (InputSet, LtiSystem, ReachSet, Scenario, output_set,
                     reach_exact, simulate)

__all__ = ["AdversaryEnsemble", "ApproxPair", "CommGraph", "DEFAULT_TOL",
           "HPolytope", "InputSet", "LtiSystem", "NlSystem", "OcWitness",
           "ReachSet", "SampleCloud", "Scenario", "Status", "Tolerances",
           "VPolytope", "Verdict", "Zonotope", "approx_reach", "backend_name",
           "check_K_iso", "check_aggregated", "check_co_opacity",
           "check_decentralized", "check_eps_K_iso", "check_eps_k_iso",
           "check_pre0_conditions", "check_strong_k_iso", "check_weak_k_iso",
           "cost_model", "is_output_controllable", "k_step_schedule",
           "nl_falsify", "nl_reach_samples", "oc_witness_from_opacity",
           "opacity_radius", "output_set", "prune_secret", "reach_exact",
           "set_algebra_suite", "simulate", "simulate_collusion",
           "synth_opaque_pair", "verify_sound"]
