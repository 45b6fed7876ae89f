"""Quantum-metric data for AF groupoids at finite truncation depth.

The pipeline: a Bratteli diagram (``bratteli``) yields a truncated path
groupoid with its length function and unit-space ultrametric
(``groupoid``); kernels on the groupoid form a convolution *-algebra with
blockwise norms (``algebra``); slip-norm seminorms, multipliers, eps-nets
and the compactness tail bound live in ``quantum_metric``; transport
distances between unit-space measures in ``transport``.  The ``afqms``
command drives it all (``cli``), and ``acceptance`` holds the end-to-end
checks.
"""

__version__ = "0.1.0"

from .bratteli import (
    BratteliDiagram,
    DiagramError,
    PathCountTable,
    augment,
    car_diagram,
    load_diagram,
    make_diagram,
    parse_diagram,
    path_counts,
    stationary_diagram,
)
from .groupoid import (
    ElementClass,
    FinitePath,
    GroupoidError,
    TruncatedGroupoid,
    format_element,
    format_path,
    parse_element,
    parse_path,
)
from .algebra import (
    Kernel,
    KernelError,
    Measure,
    cond_expect,
    convolve,
    growth_profile,
    i_norm,
    involute,
    kernel_from_json,
    kernel_to_json,
    make_measure,
    matrix_unit,
    measure_from_json,
    measure_to_json,
    op_norm,
    random_kernel,
    rd_ratio,
    state_eval,
    two_s_norm,
    uniform_measure,
    unit_kernel,
)
from .quantum_metric import (
    EpsNet,
    QghBound,
    RoeKernel,
    SeminormReport,
    Stratification,
    build_eps_net,
    commutator_seminorm,
    delta_n,
    lipschitz_seminorm,
    multiplier_apply,
    plateau,
    qgh_bound,
    sample_ball,
    total_seminorm,
    truncation_symbol,
    verify_intertwining,
)
from .transport import (
    CylinderTree,
    mk_lower_bound,
    wasserstein_lp,
    wasserstein_tree,
)
