"""Simulation and verification toolkit for single-crossing multistate
Landau-Zener models: numerical propagation of linear-in-time Hamiltonians,
closed-form scattering solutions, exact-identity checking, triangular
connection-matrix algebra, and solvability scans."""

from .errors import (
    AnsatzViolated,
    DegenerateRealPart,
    DegenerateSlopes,
    DiagonalCoupling,
    DiagonalConditionViolated,
    DimensionMismatch,
    DisconnectedGauge,
    DuplicateCoupling,
    InvalidParameter,
    MlzError,
    NotBipartite,
    Overflow,
    ParseError,
    SchemaError,
    Singular,
    ToleranceExceeded,
    UnsupportedSignPattern,
)
from .model import (
    BipartiteStructure,
    DualModel,
    EtaVector,
    MlzModel,
    build_bowtie,
    build_chain,
    build_dtcm,
    build_five_state,
    build_four_state,
    build_generic,
    build_six_state,
    detect_bipartition,
    dtcm_couplings,
    dual_bosonic,
    eta,
    permute_model,
    sort_by_slope,
)
from .propagate import (
    CyclicProducts,
    EvolutionMatrix,
    PropagationSettings,
    ScatteringEstimate,
    cyclic_products,
    evolve_nonunitary,
    evolve_unitary,
    scattering_estimate,
)
from .analytic import (
    AnalyticSolution,
    be_formula,
    bowtie3_scattering,
    bowtie_alpha,
    dtcm4_probabilities,
    dtcm5_probabilities,
    dtcm_extremal,
    five_state_probabilities,
    hc2_relation,
    hc_rhs,
    six_state_probabilities,
    six_state_sector,
)
from .constraints import (
    AlphaMatrix,
    ConstraintReport,
    check_bipartite_symmetry,
    check_cyclic_reality,
    check_hierarchy,
    check_trace_identity,
    extract_alpha,
)
from .stokes import (
    DualScattering,
    StokesSet,
    bowtie3_stokes,
    check_monodromy,
    condensate_populations,
    dual_scattering,
    factor_scattering,
    mirror_stokes,
    stokes_from_scattering,
)
from .scanner import RefineSettings, SweepResult, find_simultaneous_zero, sweep

__version__ = "0.1.0"
