"""Constants shared by the compiled and pure-Python kernels."""

# State layout: (x, p, g1, g2, G1, G2); extended modes append a second block of 6.
STATE_DIM = 6

MODE_STATE = 0    # bare equations of motion, 6 components
MODE_TANGENT = 1  # state + linearized tangent vector, 12 components
MODE_PAIR = 2     # two copies of the state integrated in lockstep, 12 components

STATUS_OK = 0
STATUS_STEP_UNDERFLOW = 1
STATUS_MAX_STEPS = 2
STATUS_NORM_DRIFT = 3
STATUS_NONFINITE = 4

STATUS_MESSAGES = {
    STATUS_OK: "ok",
    STATUS_STEP_UNDERFLOW: "step size underflow",
    STATUS_MAX_STEPS: "maximum number of steps exceeded",
    STATUS_NORM_DRIFT: "norm drift exceeded abort threshold",
    STATUS_NONFINITE: "non-finite state encountered",
}


def mode_dim(mode):
    return STATE_DIM if mode == MODE_STATE else 2 * STATE_DIM
