"""Rigid slice-to-volume registration via discrete MRF labeling, with a
Nelder-Mead baseline, a hybrid refined mode, and a synthetic-phantom
benchmark harness."""

from .imgcore import ImageGrid2, Pyramid, Volume3, build_pyramid, \
    load_metaimage, save_metaimage, smooth_and_halve
from .matching import PENALTY, MatchStats, mad, sad, ssd
from .mrf import LabelSpace, PairwiseMrf, apply_labeling, build_label_space, \
    build_pairwise_costs, mrf_energy, solve_exact, solve_icm
from .optim import LevelConfig, RegistrationResult, Schedule, default_schedule, \
    nelder_mead, register, register_discrete_level
from .rigid import RigidParams, SliceGeometry, map_slice_point, param_error, \
    perturb_params, resample_slice, rotation_matrix
from .harness import CaseRecord, PhantomSpec, generate_phantom, run_individual, \
    run_temporal, write_csv

__version__ = "0.1.0"

__all__ = [
    "ImageGrid2", "Pyramid", "Volume3", "build_pyramid", "load_metaimage",
    "save_metaimage", "smooth_and_halve",
    "PENALTY", "MatchStats", "mad", "sad", "ssd",
    "LabelSpace", "PairwiseMrf", "apply_labeling", "build_label_space",
    "build_pairwise_costs", "mrf_energy", "solve_exact", "solve_icm",
    "LevelConfig", "RegistrationResult", "Schedule", "default_schedule",
    "nelder_mead", "register", "register_discrete_level",
    "RigidParams", "SliceGeometry", "map_slice_point", "param_error",
    "perturb_params", "resample_slice", "rotation_matrix",
    "CaseRecord", "PhantomSpec", "generate_phantom", "run_individual",
    "run_temporal", "write_csv",
]
