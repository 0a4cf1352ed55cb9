"""Exploration-free bandit driven by a known linear Gaussian dynamical system."""

__version__ = "0.1.0"

from .bounds import (  # noqa: E402
    BoundReport,
    angle,
    bound_report,
    compute_p_bar,
    exploration_conditions,
    implicit_exploration_term,
    online_angle_bound,
    regret_bound,
    steady_angle_bound,
    theorem4_conditions,
    u_tilde,
)
from .env import (  # noqa: E402
    EnvState,
    LgdsParams,
    burn_in,
    generate_instance,
    init_state,
    load_instance,
    save_instance,
    simulate_path,
    step,
)
from .experiments import (  # noqa: E402
    EpisodeTrace,
    ExperimentConfig,
    boxplot_stats,
    pearson_r,
    percent_regret_decrease,
    run_episode,
    run_suite,
)
from .kalman import KalmanState, kalman_init, kalman_update, predict_reward  # noqa: E402
from .matops import (  # noqa: E402
    observability_decompose,
    observability_gramian,
    psd_dominates,
    quadratic_form_quantile,
    riccati_step,
    solve_dare,
    solve_lyapunov,
    spectral_radius,
)
from .policies import make_policy, kode_select, oracle_select  # noqa: E402
