"""Matrix symbols, spectra and Mellin diagonalization checks for
multidimensional Hausdorff operators (Hf)(x) = int K(u) f(A(u) x) dmu(u)."""

from .expr import DomainError, ExprError, ExprSyntaxError, eval_expr, evaluate, parse_expr, to_string
from .fixtures import load_fixture, load_function
from .checks import Check, run_checks
from .mellin import (
    GridFunction,
    LogGrid,
    apply_hausdorff,
    block_apply,
    diagonalization_residual,
    galerkin_matrix,
    mellin_forward,
    mellin_inverse,
    sample_function,
)
from .octants import classify_nodes, epsilon, octant_of_point
from .quadrature import NodeSet, QuadConfig, discretize_measure, integrate
from .spec_model import FunctionSpec, OperatorSpec, SpecError, load_spec, parse_config, parse_function
from .special import cesaro_gamma_symbol, complex_gamma, qcesaro_branches, qcesaro_symbol
from .spectral import (
    SGrid,
    classify,
    noncompactness_probe,
    norm_bound,
    operator_norm,
    point_spectrum_estimate,
    resolvent_margin,
    spectrum,
)
from .symbol import (
    SymbolGrid,
    SymbolMatrix,
    adjoint_spec,
    compose_specs,
    detect_structure,
    scalar_symbol,
    symbol_grid,
    symbol_inverse,
    symbol_matrix,
    xor_coefficient,
)

__version__ = "0.1.0"
