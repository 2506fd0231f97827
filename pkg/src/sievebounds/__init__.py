"""Certified enclosures of Buchstab-function sieve integrals."""

from .buchstab import BuchstabTable, build_table, omega, omega_closed
from .enclosure import (Enclosure, enc, enc_add, enc_div, enc_hull, enc_intersect, enc_log,
                        enc_mul, enc_sqrt, enc_sub, enc_width)
from .errors import (ConfigError, DomainError, InfeasibleError, SieveBoundsError,
                     TableRangeError)
from .integrals import (QuadratureConfig, TermResult, admissible_tau, compute_all,
                        compute_term, fixed_sum, primed_fixed_sum, rho_coefficient,
                        solve_tau, total_S)
from .oracle import (OracleEstimate, PrimitiveCount, empirical_rho, mc_term, omega_reference,
                     primitive_count_by_definition, riemann_fast)
from .report import BoundsReport, build_report, read_report
from .terms import (CellClass, TermId, TermSpec, closed_form_term, f4, f4_array, f4_cell,
                    integrand, sigma, term_spec, xi)

__version__ = "0.1.0"
