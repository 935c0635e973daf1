from .tensor import (
    DiffcoreError,
    NonFiniteError,
    ShapeError,
    Tape,
    Tensor,
    active_tape,
    backward,
    constant,
    no_grad,
    parameter,
    record,
    tape,
)
from .ops import (
    add,
    add_bias,
    avgpool2,
    bilinear_sample,
    concat,
    conv2d,
    elementwise,
    exp,
    log_softmax,
    matmul,
    mean_all,
    mul,
    permute,
    relu,
    reshape,
    reverse_axis,
    scale,
    sigmoid,
    slice_axis,
    sub,
    sum_all,
    sumsq,
    tanh,
    upsample2,
)
from .optim import AdamState, adam_step
from .check import check_grad, finite_difference_grad, rel_err
