"""Learning preferred actions from uncertain human feedback.

The toolkit models a trainer whose praise and criticism rates decay with
the distance between the taken action and the preferred one, infers the
preferred-action map by EM with the peak rates latent, fits the decay
width by gradient descent, and packages baselines, scenario simulators, a
seeded experiment harness, and an HTTP service for live human training.
"""

from .feedback_model import (
    GAUSSIAN,
    ConstraintViolation,
    FeedbackKind,
    FeedbackModelParams,
    KernelKind,
    ProbTriple,
    feedback_probs,
    isabl_indicator,
    kernel,
    validate_params,
)
from .history import FeedbackCounts, InteractionHistory, InteractionRecord, most_disliked_action
from .em import QuadratureGrid, e_step_objective, em_fixpoint, em_update, log_weight, state_log_term
from .sigma import SigmaState, loss_gradient, model_ratios, ratio_loss, sigma_step
from .learners import LearnerKind, LearnerSession, ProtocolError, SelectionRequired, UcbStats, ucb_value
from .environments import (
    Episode,
    ModelFollowingTrainer,
    RandomTableTrainer,
    ScenarioConfig,
    catch_outcome,
    dog_default,
    env_step,
    gen_model_trainer,
    gen_random_table_trainer,
    lighting_default,
    sample_rat,
    trainer_feedback,
)
from .harness import (
    EpisodeConfig,
    EpisodeResult,
    ExperimentGrid,
    accumulative_distance,
    default_grid,
    policy_gap,
    rats_per_step,
    replay_episode_log,
    run_episode,
    run_grid,
    welch_t,
    write_episode_log,
)

__version__ = "0.1.0"
