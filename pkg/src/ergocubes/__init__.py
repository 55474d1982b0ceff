"""Exact computations for finite systems with two commuting measure-preserving
maps: self-joinings, a four-fold seminorm, magic extensions, quadruple spaces,
window averages with closed-form compression, and analytic torus oracles."""

from .core import (
    DimensionError,
    Observable,
    Partition,
    PreconditionError,
    SparseMeasure,
    as_fraction,
    common_refinement,
    format_fraction,
    integrate,
    marginal,
)
from .finite import (
    ErgodicComponent,
    FiniteMPS,
    FreenessResult,
    GroupElement,
    InvalidSystemError,
    S_GEN,
    SystemFormatError,
    T_GEN,
    apply_group,
    diagonal_grid,
    ergodic_decomposition,
    invariant_partition,
    is_ergodic,
    is_free,
    partition_s,
    partition_t,
    product_grid,
    product_system,
    random_ergodic_system,
    random_product_system,
    random_system,
    system_from_dict,
    system_to_dict,
    translation_system,
    z4_diagonal,
)
from .joinings import (
    ExtensionConstructionError,
    HostMeasure,
    MagicExtension,
    MagicReport,
    SeminormValue,
    cond_exp,
    host_measure,
    host_seminorm,
    invariant_w,
    is_magic,
    magic_extension,
    measurability_check,
    rel_indep_square,
    seminorm_kernel_basis,
)
from .cubes import (
    ActionSpace,
    CubeTransform,
    ProductCubeReport,
    cube_space,
    empirical_unique_ergodicity,
    product_cube_identification,
    two_sided_cube,
)
from .averaging import (
    AverageSpec,
    BoundCheck,
    ConvergenceReport,
    DecompositionResult,
    ReportRow,
    birkhoff_average,
    check_bound_average,
    check_telescoping,
    cubic_average,
    decompose_and_converge,
    fourfold_average,
    fourfold_average_naive,
    run_average,
    window_counts,
    windowed_sn,
    windowed_sn_naive,
)
from .torus import (
    TorusSystem,
    TrigPoly,
    fourier_cubic_limit,
    fourier_host_integral,
    sqrt23_system,
    sqrt_fraction,
    torus_average,
    torus_average_naive,
    torus_report,
)
from .verify import (
    SuiteResult,
    SweepResult,
    exhaustive_bound_sweep,
    find_bound_constant,
    run_suites,
)

__version__ = "0.1.0"
