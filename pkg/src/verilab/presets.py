"""Named defaults for attacks and training.

Every magic number used elsewhere in the package lives here so that
configs can reference (and override) them by name.
"""

LINF_EPS = 8.0 / 255.0
L2_EPS = 0.5

TRAIN_ATTACK_STEPS = 10
EVAL_ATTACK_STEPS = 20
STEP_SIZE_FRACTION = 0.25  # step = eps / 4

POISON_STEPS = 100
POISON_STEP_FRACTION = 0.2  # step = eps / 5

MOMENTUM = 0.9
WEIGHT_DECAY = 5e-4
LR_DECAY_FACTOR = 0.1


def default_step_size(eps):
    return eps * STEP_SIZE_FRACTION


def default_eps(norm):
    return LINF_EPS if norm == "linf" else L2_EPS
