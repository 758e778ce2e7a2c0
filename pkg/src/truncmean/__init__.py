"""Mean testing and center estimation when an epsilon-fraction of the law is hidden."""

__version__ = "0.1.0"

from .distributions import (  # noqa: E402
    DiagonalGaussian,
    DiscreteAtomic,
    IsotropicGaussian,
    Pareto,
    PiecewiseUniform,
    SampleBatch,
    StudentT,
    sample,
    spec_from_dict,
)
from .median import direction_net, estimate_center, regularity_test  # noqa: E402
from .moments import bias_floor, block_count, required_n_amplified, required_n_const  # noqa: E402
from .truncation import (  # noqa: E402
    center_hollowing_adversary,
    halfspace_adversary,
    impossibility_adversary,
    sharpness_construction,
    truncated_sampler,
)
from .ustat import Decision, amplified_test, const_error_test, u_statistic  # noqa: E402
