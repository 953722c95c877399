"""wnilab: empirical measurement of weighted norm inequalities on a grid.

Discretizes the classical objects of rough singular-integral theory (maximal
functions, Muckenhoupt characteristics, sparse families, Orlicz bumps) onto a
finite box and measures the ratios the sharp inequalities predict.
"""

__version__ = "0.1.0"

from .grid import (
    Grid,
    GridFunction,
    distribution,
    load_function,
    lp_norm,
    make_function,
    make_grid,
    make_weight,
    save_function,
    weak_lp_norm,
)
from .dyadic import (
    DyadicCube,
    SparseFamily,
    average,
    carleson_sum,
    family_from_json,
    family_to_json,
    lattice_cubes,
    principal_pair_family,
    s_average,
    stopping_family,
    verify_sparse,
    weighted_average,
)
from .young import (
    YoungFunction,
    beta_p,
    beta_p_dual,
    complementary,
    custom,
    holder_defect,
    iterated_maximal,
    lorentz_logl_norm,
    maximal,
    orlicz_norm,
    power,
    power_log,
    power_r,
)
from .weights import (
    WeightReport,
    a1_constant,
    ainf_constant,
    ap_constant,
    calibrate_tau,
    power_weight,
    random_a1_weight,
    reverse_holder_check,
    weight_report,
)
from .operators import (
    CZDecomposition,
    KernelSpec,
    apply_operator,
    bj_group,
    bochner_riesz_critical,
    cz_decompose,
    kj_piece,
    kj_radial,
    rough_kernel,
    sample_angles,
    sign_kernel,
    smooth_cutoff,
    t_omega,
)
from .analysis import (
    RatioReport,
    RdFResult,
    ap_strong_ratios,
    cf_ratio,
    domination_exponents,
    domination_ratio,
    good_lambda_measure,
    iterated_ratio,
    make_report,
    rubio_de_francia,
    sawyer_ratio,
    sparse_form,
    sparse_operator,
    sparse_r_two_weight_ratio,
    two_weight_bump_ratio,
    vector_valued_ratio,
    weak11_ratio,
)
from .corpus import adversarial_pair, bump, random_smooth, weight_suite
