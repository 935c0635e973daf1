from .spec import ExperimentSpec, ResultTable, VARIANTS
from .runner import (
    cmd_ablate,
    cmd_eval,
    cmd_kern_sweep,
    cmd_perturb_sweep,
    cmd_synth,
    cmd_train,
)
from .plot import emit_plot
