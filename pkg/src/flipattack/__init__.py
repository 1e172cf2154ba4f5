"""White-box L1-minimal adversarial attack on binary feed-forward classifiers."""
from .attack import (AttackCandidate, Branch, CandidateBatch, GdConfig, core_baseline,
                     core_baseline_batch, core_step_size, follow_up, gd_attack, gd_attack_batch,
                     loss_subgradient, piecewise_loss)
from .campaign import (CampaignConfig, CampaignResult, CampaignState, build_init, load_checkpoint,
                       maybe_refresh, mix_rows, reduce_best, run_campaign, run_round, sample_step,
                       save_checkpoint, step_bounds)
from .data import Dataset, generate_synthetic, load_dataset, load_matrix, save_adversarial, save_dataset
from .errors import FlipAttackError, StructuralError, SurrogateNotCleanError, ValidationError
from .kernels import BACKEND
from .metrics import (MetricsRecord, emit_metrics_csv, evaluate, fooling_ratio, format_summary,
                      load_metrics_csv, mean_l1_fooled, score)
from .model import (Model, ModelSpec, accuracy, bce, finite_diff_gradient, forward, input_gradient,
                    predict, sigmoid, train_surrogate)

__version__ = "0.1.0"
