"""Corruption-level estimation for rotation synchronization from cycles of
length three to six, with downstream solvers and a distributed pipeline."""
from .cycles import f_closed_form, f_g_bruteforce, f_g_closed_form, g_closed_form, verify_forms
from .engine import LongSyncConfig, cemp_naive, longsync_linear_group, longsync_multilength, longsync_run
from .evaluation import align, error_summary, evaluate
from .kernels import BACKEND
from .models import SyncProblem, compute_lambda, gen_adversarial, gen_ubcm, gen_ucm
from .pipeline import PipelineOptions, run_pipeline
from .solvers import IrlsConfig, irls_gm, mst_init, random_tree_init

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "IrlsConfig",
    "LongSyncConfig",
    "PipelineOptions",
    "SyncProblem",
    "align",
    "cemp_naive",
    "compute_lambda",
    "error_summary",
    "evaluate",
    "f_closed_form",
    "f_g_bruteforce",
    "f_g_closed_form",
    "g_closed_form",
    "gen_adversarial",
    "gen_ubcm",
    "gen_ucm",
    "irls_gm",
    "longsync_linear_group",
    "longsync_multilength",
    "longsync_run",
    "mst_init",
    "random_tree_init",
    "run_pipeline",
    "verify_forms",
]
