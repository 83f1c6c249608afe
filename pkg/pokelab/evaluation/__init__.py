from .metrics import relative_location_error, pose_error
from .experiment import (CSV_FIELDS, MetricRow, episode_poses, run_experiment, run_single_poke_study,
                         write_metrics_csv)
from .summary import Summary, paired_sign_test, summarize

__all__ = [
    "relative_location_error", "pose_error", "CSV_FIELDS", "MetricRow", "episode_poses", "run_experiment",
    "run_single_poke_study", "write_metrics_csv", "Summary", "paired_sign_test", "summarize",
]
