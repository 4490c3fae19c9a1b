"""Symbolic symmetry analysis and verified numerics for planar
Ermakov-type systems: expression trees, the first-extension calculus,
model builders, generator algebras, and a compiled/pure dual-backend
integrator with invariant monitoring."""

__version__ = "1.0.0"

from . import backend
from .expr import (Add, Call, Expr, ExprError, Fn, Mul, Num, ParseError, Pow,
                   Sym, differentiate, free_functions, free_symbols, opaque,
                   parse, sqrt, substitute, substitute_function, to_str)
from .simplify import (NonElementaryAntiderivative, NonPolynomialError,
                       antiderivative_power, collect_poly, expand,
                       is_zero_structural, simplify, structurally_equal)
from .numeric import (Bindings, EvalDomainError, FnBinding, Tape,
                      UnboundFunctionError, UnboundSymbolError, compile_tape,
                      equivalent, evaluate, inline_functions, max_abs_on,
                      sample_points)
from .jet import (AnsatzFamily, DynamicalGenerator, JetError,
                  MonomialCondition, PointGenerator, SecondOrderSystem,
                  VerificationReport, apply_derivative_rules, apply_extended,
                  cartan_generator, determining_equations, format_determining,
                  is_symmetry, noether_first_integral, prolong, subscript_form,
                  symmetry_residual, total_derivative, verify_dynamical)
from .models import (DEFAULT_DOMAIN, POLAR_DOMAIN, InvariantSpec, KEParams,
                     ModelError, PolarModel, UnaryFunc, bindings,
                     build_lagrangian, build_system, cartesian_to_polar_state,
                     curl_free_shape, derive_g_from_f, ermakov_invariant,
                     euler_lagrange_system, lagrangian_compatibility,
                     polar_to_cartesian_state, psi_potential,
                     radial_constraint_residual, standard_H, standard_params,
                     to_polar)
from .sigma import (PinneyReduction, Resolution, SigmaError,
                    build_generator_family, pinney_reduction,
                    resolve_h_exponent, resolve_sigma_k, sigma_basis,
                    sigma_residual)
from .algebra import (AlgebraError, AlgebraTable, basis_change, classify,
                      lie_bracket, structure_constants)
from .dynamics import (DriftReport, DriftSeries, IntegrationError,
                       SingularityError, Trajectory, auto_guards,
                       evaluate_on, integrate, monitor, write_drift_csv,
                       write_trajectory_csv)

__all__ = [n for n in dir() if not n.startswith("_")]
