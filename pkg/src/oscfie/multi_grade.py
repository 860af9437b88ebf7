"""Multi-grade training.

Grade l is a sin network whose input is the feature (last hidden layer) of
grade l-1, itself evaluated on the feature of grade l-2 and so on.  Once a
grade is trained it is frozen and the residual target at the nodes is
updated, e_l = e_{l-1} - M v_l, where v_l is the new grade's complexified
output at the nodes.  The approximate solution is the sum of all grade
outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nn import SinMlp, complexify, feature, forward, init_he
from .single_grade import TrainConfig, TrainRecord, _train_loop, validation_loss
from .system import SystemMatrix, seminorm

__all__ = [
    "GradeSpec",
    "GradeStack",
    "train_grade",
    "train_multi_grade",
    "compose_solution",
    "grade_components",
]


@dataclass(frozen=True)
class GradeSpec:
    """Hidden widths and training settings for each grade.

    ``widths[l]`` lists the hidden layer widths of grade l; its input width is
    1 for the first grade and the last hidden width of grade l-1 afterwards.
    """

    widths: tuple[tuple[int, ...], ...]
    epochs: tuple[int, ...] = (500, 1000, 2000)
    overrides: tuple[dict, ...] = ()

    def __post_init__(self):
        widths = tuple(tuple(int(w) for w in ws) for ws in self.widths)
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "epochs", tuple(int(e) for e in self.epochs))
        if not widths:
            raise ValueError("need at least one grade")
        if any(not ws or min(ws) < 1 for ws in widths):
            raise ValueError("every grade needs at least one hidden layer of positive width")
        if len(self.epochs) != len(widths):
            raise ValueError("one epoch count per grade")
        if self.overrides and len(self.overrides) != len(widths):
            raise ValueError("overrides must be empty or have one entry per grade")

    @property
    def n_grades(self) -> int:
        return len(self.widths)

    def dims(self, grade: int) -> list[int]:
        inp = 1 if grade == 0 else self.widths[grade - 1][-1]
        return [inp, *self.widths[grade], 2]

    def config(self, grade: int, base: TrainConfig) -> TrainConfig:
        kw = {**base.__dict__, "epochs": self.epochs[grade]}
        if self.overrides:
            kw.update(self.overrides[grade])
        return TrainConfig(**kw)


@dataclass
class GradeStack:
    """Trained grades plus residual targets at the collocation nodes.

    ``residuals[0]`` is the right-hand side; ``residuals[l]`` the residual
    after l grades.  ``node_features`` caches the current feature at the nodes
    and ``node_solution`` the composed solution there.
    """

    nodes: np.ndarray
    residuals: list[np.ndarray]
    grades: list[SinMlp] = field(default_factory=list)
    node_features: np.ndarray | None = None
    node_solution: np.ndarray | None = None

    @classmethod
    def start(cls, M: SystemMatrix, v_f) -> "GradeStack":
        v_f = np.asarray(v_f, dtype=complex)
        if v_f.shape != (M.params.N,):
            raise ValueError(f"right-hand side must have length {M.params.N}")
        nodes = M.params.nodes
        return cls(nodes, [v_f.copy()], [], nodes, np.zeros(nodes.size, dtype=complex))

    @property
    def n_grades(self) -> int:
        return len(self.grades)

    @property
    def feature_dim(self) -> int:
        return 1 if not self.grades else self.grades[-1].dims[-2]

    @property
    def target(self) -> np.ndarray:
        return self.residuals[-1]

    def residual_norms(self) -> list[float]:
        return [seminorm(r) for r in self.residuals[1:]]

    def features(self, t, upto: int | None = None) -> np.ndarray:
        """Feature chain after the first ``upto`` grades (default: all)."""
        a = np.asarray(t, dtype=float)
        for net in self.grades[: self.n_grades if upto is None else upto]:
            a = feature(net, a)
        return a


def _grade_outputs(stack: GradeStack, t, extra: SinMlp | None = None) -> list[np.ndarray]:
    a = np.asarray(t, dtype=float)
    outs = []
    for net in [*stack.grades, *([extra] if extra is not None else [])]:
        out, tape = forward(net, a)
        outs.append(complexify(out))
        a = tape.activations[-1]
    return outs


def compose_solution(stack: GradeStack, t) -> np.ndarray:
    if not stack.grades:
        raise ValueError("stack has no grades")
    t_arr = np.asarray(t, dtype=float)
    flat = t_arr.reshape(-1)
    total = np.zeros(flat.size, dtype=complex)
    for v in _grade_outputs(stack, flat):
        total += v
    return total[0] if t_arr.ndim == 0 else total.reshape(t_arr.shape)


def grade_components(stack: GradeStack, grid) -> list[np.ndarray]:
    g = np.asarray(grid, dtype=float).reshape(-1)
    if g.size == 0:
        return [np.zeros(0, dtype=complex) for _ in stack.grades]
    return _grade_outputs(stack, g)


def train_grade(stack: GradeStack, grade_net: SinMlp, M: SystemMatrix, config: TrainConfig,
                validation=None, target=None) -> tuple[GradeStack, TrainRecord]:
    """Train ``grade_net`` on the current residual and append it to ``stack``.

    Earlier grades are never handed to the optimiser, so their parameters
    are left untouched.
    """
    target = stack.target if target is None else np.asarray(target, dtype=complex)
    if target.shape != stack.nodes.shape:
        raise ValueError(f"target must have length {stack.nodes.size}")
    if grade_net.dims[0] != stack.feature_dim:
        raise ValueError(f"grade input width {grade_net.dims[0]} != feature width {stack.feature_dim}")
    if grade_net.dims[-1] != 2:
        raise ValueError("grade head must output 2 values")
    A = M.entries
    val_fn = None
    if validation is not None:
        pts, fv = validation
        pts = np.asarray(pts, dtype=float)
        qn = M.params.spec.nodes
        prev_pts = compose_solution(stack, pts) if stack.grades else 0.0
        prev_q = compose_solution(stack, qn) if stack.grades else 0.0
        feat_pts, feat_q = stack.features(pts), stack.features(qn)

        cached = ((qn, prev_q, feat_q), (pts, prev_pts, feat_pts))

        def Y(t):
            t = np.asarray(t, dtype=float)
            for grid, prev, feat in cached:
                if t.shape == grid.shape and np.array_equal(t, grid):
                    return prev + complexify(forward(grade_net, feat)[0])
            base = compose_solution(stack, t) if stack.grades else 0.0
            return base + complexify(forward(grade_net, stack.features(t))[0])

        def val_fn(net):
            return validation_loss(Y, M.params, pts, fv)

    hist = _train_loop(grade_net, stack.node_features, A, target, config, val_fn,
                       label=f"grade {stack.n_grades + 1}")
    grade_net.freeze()
    out, tape = forward(grade_net, stack.node_features)
    v = complexify(out)
    stack.grades.append(grade_net)
    stack.residuals.append(target - A @ v)
    stack.node_features = tape.activations[-1]
    stack.node_solution = stack.node_solution + v
    return stack, hist


def train_multi_grade(spec: GradeSpec, M: SystemMatrix, v_f, base: TrainConfig,
                      validation=None, seed: int | None = None, callback=None):
    """Train every grade in ``spec`` in turn.

    Grade l is initialised from seed + l (seed defaults to ``base.seed``) and
    shuffled with the same seed, so grade 1 reproduces a single-grade run.
    Returns the stack and one history per grade.
    """
    seed = base.seed if seed is None else seed
    stack = GradeStack.start(M, v_f)
    histories = []
    for g in range(spec.n_grades):
        cfg = spec.config(g, base)
        cfg = TrainConfig(**{**cfg.__dict__, "seed": seed + g})
        net = init_he(spec.dims(g), seed + g)
        stack, hist = train_grade(stack, net, M, cfg, validation)
        histories.append(hist)
        if callback is not None:
            callback(g, stack, hist)
    return stack, histories
