'''
bi-arm trajectory optimization

Short-horizon problems over the stacked joint velocities of both arms are
solved by sequential quadratic programming and concatenated into a plan:
the terminal state of one meta-step is the initial state of the next, and
each accepted meta-step may not end further from the goal than the one
before it.
'''

from dataclasses import dataclass, field, replace
import time
import warnings

import numpy as np
from scipy import sparse

from . import config
from .exceptions import JointLimitWarning
from .geometry import Pose, arm_kinematics, sphere_aabb_distances, \
    rotation_error_vector, orientation_error
from .qpsolver import solve_bounded_qp

__all__ = ['TrajOptConfig',
           'JointGoal',
           'arm_key',
           'TrajOptProblem',
           'MetaStepResult',
           'PlanResult',
           'count_constraints',
           'rollout',
           'build_subproblem',
           'solve_meta_step',
           'plan',
           'check_solution',
           'benchmark_rows']

#exact-penalty weight of the collision slacks (and of violations in the merit)
SLACK_PENALTY = 1e4
#quadratic weight on terminal errors above the telescoping bound
TELESCOPE_PENALTY = 1e4
#goal cost weights of intermediate knots and of the terminal knot
RUNNING_WEIGHT = 0.1
TERMINAL_WEIGHT = 5.0
STEP_TOL = 1e-5
STALL_TOL = 1e-4


@dataclass(eq=False)
class TrajOptConfig:
    '''planner settings, see config.trajopt_defaults for the defaults'''
    horizon: int = 10
    dt: float = 0.1
    max_meta_steps: int = 10
    eps_p: float = 0.005
    eps_r: float = 0.05
    sqp_max_iters: int = 12
    qp_tolerance: float = 1e-4
    trust_region: float = 0.15
    collision_margin: float = 0.005
    weights: dict = field(default_factory=lambda: {'goal_p': 100.0, 'goal_r': 10.0,
                                                   'effort': 0.1})

    def __post_init__(self):
        if self.horizon < 2:
            raise ValueError('horizon needs to be >= 2, got %i' %self.horizon)
        if not self.dt > 0:
            raise ValueError('dt needs to be > 0, got %s' %self.dt)
        if self.max_meta_steps < 1:
            raise ValueError('max_meta_steps needs to be >= 1, got %i' %self.max_meta_steps)
        if not (self.eps_p > 0 and self.eps_r > 0):
            raise ValueError('eps_p and eps_r need to be > 0')
        for key in ('goal_p', 'goal_r', 'effort'):
            if key not in self.weights:
                raise LookupError('weights need the key "%s"' %key)

    @classmethod
    def from_config(cls, **overrides):
        '''builds a config from the module settings in biarmpy.config'''
        settings = config.trajopt_defaults()
        settings.update(overrides)
        return cls(**settings)


@dataclass(eq=False)
class JointGoal:
    '''joint-space target for one arm'''
    q: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=np.float64).reshape(-1)


def arm_key(arm_id):
    if arm_id in ('left', 'left-arm'):
        return 'left'
    if arm_id in ('right', 'right-arm'):
        return 'right'
    raise LookupError('unknown arm id "%s", use "left-arm" or "right-arm"' %arm_id)


@dataclass(eq=False)
class TrajOptProblem:
    '''one planning query on a bi-arm model

    goals maps 'left'/'right' to a Pose, a JointGoal or None. Initial
    configurations violating the joint limits by less than 1e-6 rad are
    projected back with a JointLimitWarning, larger violations raise.
    '''
    model: object
    q0: np.ndarray
    goals: dict = field(default_factory=dict)
    obstacles: list = field(default_factory=list)
    qdot0: np.ndarray = None
    goal_labels: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.model.n_joints
        q0 = np.asarray(self.q0, dtype=np.float64).reshape(-1)
        if len(q0) != n:
            raise ValueError('dimension mismatch: model has %i joints, got q0 of length %i'
                             %(n, len(q0)))
        lower = np.concatenate([self.model.left.lower, self.model.right.lower])
        upper = np.concatenate([self.model.left.upper, self.model.right.upper])
        violation = np.max(np.maximum(np.maximum(lower - q0, q0 - upper), 0.0))
        if violation > 1e-6:
            raise ValueError('q0 violates the joint limits by %.3e rad' %violation)
        elif violation > 0:
            warnings.warn('q0 violated the joint limits by %.3e rad and was projected'
                          %violation, JointLimitWarning)
            q0 = np.clip(q0, lower, upper)
        self.q0 = q0
        self.qdot0 = np.zeros(n) if self.qdot0 is None else \
            np.asarray(self.qdot0, dtype=np.float64).reshape(n)

        goals = {}
        for arm_id, goal in self.goals.items():
            key = arm_key(arm_id)
            if isinstance(goal, JointGoal):
                if len(goal.q) != self.model.arm(key).n_joints:
                    raise ValueError('joint goal for %s has length %i' %(arm_id, len(goal.q)))
            elif goal is not None and not isinstance(goal, Pose):
                raise ValueError('goal for %s needs to be a Pose, JointGoal or None' %arm_id)
            goals[key] = goal
        self.goals = goals
        self.goal_labels = {arm_key(k): v for k, v in self.goal_labels.items()}


@dataclass(eq=False)
class MetaStepResult:
    q_traj: np.ndarray
    qdot_traj: np.ndarray
    e_p_T: float
    e_r_T: float
    converged: bool
    sqp_iters: int
    constraint_violation_max: float
    qp_iters: int = 0
    wall_ms: float = 0.0
    constraint_count: int = 0
    arm_errors: dict = field(default_factory=dict)


@dataclass(eq=False)
class PlanResult:
    '''accepted meta-steps plus outcome

    status is one of 'Reached', 'InfeasibleGoal' or 'Timeout'.
    '''
    meta_steps: list
    status: str
    feedback: str = ''
    rejected: int = 0

    @property
    def reached(self):
        return self.status == 'Reached'

    def q_traj(self, q0=None):
        '''all knots of the concatenated plan'''
        if not self.meta_steps:
            return np.atleast_2d(q0) if q0 is not None else np.zeros((0, 0))
        return np.vstack([self.meta_steps[0].q_traj[:1]] +
                         [ms.q_traj[1:] for ms in self.meta_steps])

    def qdot_traj(self):
        if not self.meta_steps:
            return np.zeros((0, 0))
        return np.vstack([ms.qdot_traj for ms in self.meta_steps])

    def n_knots(self):
        return sum(len(ms.qdot_traj) for ms in self.meta_steps)

    def duration(self, dt):
        '''predicted execution time of the plan (s)'''
        return self.n_knots() * dt

    @property
    def final_errors(self):
        if not self.meta_steps:
            return np.inf, np.inf
        return self.meta_steps[-1].e_p_T, self.meta_steps[-1].e_r_T


def count_constraints(model, n_obstacles, horizon):
    '''one-sided inequality rows of a subproblem

    T * (2 * (2n + 3S) + P + S * O) for n joints, S collision spheres,
    P = S_left * S_right arm-to-arm pairs and O obstacles.

    Examples
    --------
    >>> from biarmpy.geometry import test_biarm
    >>> count_constraints(test_biarm(), 2, 10)
    520
    '''
    n = model.n_joints
    s_l, s_r = len(model.left.collision_spheres), len(model.right.collision_spheres)
    S = s_l + s_r
    return horizon * (2 * (2 * n + 3 * S) + s_l * s_r + S * n_obstacles)


def rollout(q0, qdot_traj, dt):
    '''integrates single-integrator joint kinematics knot by knot

    >>> rollout([0.0, 1.0], [[1.0, 0.0], [1.0, 1.0]], 0.1)
    array([[0. , 1. ],
           [0.1, 1. ],
           [0.2, 1.1]])
    '''
    qdot_traj = np.asarray(qdot_traj, dtype=np.float64)
    q_traj = np.empty((len(qdot_traj) + 1, qdot_traj.shape[1]))
    q_traj[0] = q0
    for t in range(len(qdot_traj)):
        q_traj[t + 1] = q_traj[t] + dt * qdot_traj[t]
    return q_traj


class _Layout(object):
    '''static index bookkeeping of a bi-arm model'''

    def __init__(self, model):
        self.n = model.n_joints
        self.n_left = model.left.n_joints
        self.s_left = len(model.left.collision_spheres)
        self.s_right = len(model.right.collision_spheres)
        self.S = self.s_left + self.s_right
        self.radii = np.concatenate([model.left.radii, model.right.radii]) if self.S else np.zeros(0)
        a, b = np.meshgrid(np.arange(self.s_left), self.s_left + np.arange(self.s_right),
                           indexing='ij')
        self.pairs = np.column_stack([a.ravel(), b.ravel()])
        self.lower = np.concatenate([model.left.lower, model.right.lower])
        self.upper = np.concatenate([model.left.upper, model.right.upper])
        self.vel = np.concatenate([model.left.vel_limits, model.right.vel_limits])


def _knot_state(model, layout, q):
    q_l, q_r = model.split(q)
    kin_l = arm_kinematics(model.left, q_l)
    kin_r = arm_kinematics(model.right, q_r)
    jac = np.zeros((layout.S, 3, layout.n))
    jac[:layout.s_left, :, :layout.n_left] = kin_l['sphere_jacobians']
    jac[layout.s_left:, :, layout.n_left:] = kin_r['sphere_jacobians']
    ee_jac = {'left': np.zeros((6, layout.n)), 'right': np.zeros((6, layout.n))}
    ee_jac['left'][:, :layout.n_left] = kin_l['ee_jacobian']
    ee_jac['right'][:, layout.n_left:] = kin_r['ee_jacobian']
    return {'q': q,
            'centers': np.vstack([kin_l['centers'], kin_r['centers']]),
            'sphere_jacobians': jac,
            'pose': {'left': kin_l['pose'], 'right': kin_r['pose']},
            'ee_jacobian': ee_jac}


def _knot_states(prob, layout, q_traj):
    return [_knot_state(prob.model, layout, q) for q in q_traj]


def _goal_terms(prob, layout, cfg, knot):
    '''linearized goal residuals: list of (weight, residual, d residual / d q)'''
    terms = []
    for arm_id in ('left', 'right'):
        goal = prob.goals.get(arm_id)
        if goal is None:
            continue
        if isinstance(goal, JointGoal):
            sl = prob.model.arm_slice(arm_id)
            G = np.zeros((len(goal.q), layout.n))
            G[:, sl] = np.eye(len(goal.q))
            terms.append((cfg.weights['goal_r'], knot['q'][sl] - goal.q, G))
            continue
        pose = knot['pose'][arm_id]
        J = knot['ee_jacobian'][arm_id]
        terms.append((cfg.weights['goal_p'], pose.position - goal.position, J[:3]))
        #gauss-newton on the rotation vector error
        err = rotation_error_vector(goal.orientation, pose.orientation)
        terms.append((cfg.weights['goal_r'], -err, J[3:]))
    return terms


def _pair_distances(layout, centers):
    if len(layout.pairs) == 0:
        return np.zeros(0), np.zeros((0, 3))
    diff = centers[layout.pairs[:, 0]] - centers[layout.pairs[:, 1]]
    dist = np.linalg.norm(diff, axis=1)
    normal = np.where(dist[:, None] > 1e-12, diff / np.maximum(dist, 1e-12)[:, None],
                      np.array([0.0, 0.0, 1.0]))
    d = dist - layout.radii[layout.pairs[:, 0]] - layout.radii[layout.pairs[:, 1]]
    return d, normal


def _knot_weight(t, horizon):
    return TERMINAL_WEIGHT if t == horizon else RUNNING_WEIGHT


def _violations(prob, layout, knot):
    '''nonlinear constraint violations at one configuration

    Collision violations are penetration depths (distance below zero),
    the planning margin is not counted.
    '''
    q = knot['q']
    ws = prob.model.workspace
    centers = knot['centers']
    joint = float(np.max(np.maximum(np.maximum(layout.lower - q, q - layout.upper), 0.0)))
    if layout.S:
        outside = np.maximum(ws.min_corner - centers, 0.0) + np.maximum(centers - ws.max_corner, 0.0)
        workspace = float(outside.max())
    else:
        workspace = 0.0
    d_pair, _ = _pair_distances(layout, centers)
    d_obs, _ = sphere_aabb_distances(centers, layout.radii, prob.obstacles)
    arm_arm = float(max(0.0, -d_pair.min())) if len(d_pair) else 0.0
    arm_object = float(max(0.0, -d_obs.min())) if d_obs.size else 0.0
    distances = np.concatenate([d_pair, d_obs.ravel()])
    return {'joint_limit': joint,
            'workspace': workspace,
            'arm_arm': arm_arm,
            'arm_object': arm_object,
            'min_distance': float(distances.min()) if len(distances) else np.inf}


def _telescoping_rows(prob, knot, bounds):
    '''linearized terminal error bounds at the last knot

    Returns (f0, g, bound) triples meaning f0 + g.(q - knot['q']) <= bound.
    Pose goals give one row per finite bound on the position and rotation
    error norms, joint goals two rows per joint on the absolute error.
    '''
    rows = []
    bound_p, bound_r = bounds
    index = np.arange(len(knot['q']))
    for arm_id, goal in sorted(prob.goals.items()):
        if goal is None:
            continue
        if isinstance(goal, JointGoal):
            if not np.isfinite(bound_r):
                continue
            sl = prob.model.arm_slice(arm_id)
            for j, diff in zip(index[sl], knot['q'][sl] - goal.q):
                g = np.zeros(len(index))
                g[j] = 1.0
                rows.append((diff, g, bound_r))
                rows.append((-diff, -g, bound_r))
            continue
        pose = knot['pose'][arm_id]
        J = knot['ee_jacobian'][arm_id]
        r = pose.position - goal.position
        e = float(np.linalg.norm(r))
        if np.isfinite(bound_p) and e > 1e-9:
            rows.append((e, (r / e).dot(J[:3]), bound_p))
        err = rotation_error_vector(goal.orientation, pose.orientation)
        e = float(np.linalg.norm(err))
        if np.isfinite(bound_r) and e > 1e-9:
            rows.append((e, -(err / e).dot(J[3:]), bound_r))
    return rows


def _telescoping_bounds(prev_terminal_errors, cfg):
    return (max(prev_terminal_errors[0], cfg.eps_p), max(prev_terminal_errors[1], cfg.eps_r))


def _merit(prob, layout, cfg, qdot_traj, knots, telescoping=None,
           telescope_weight=TELESCOPE_PENALTY):
    '''true objective plus exact penalty on constraint violations'''
    T = cfg.horizon
    cost = cfg.weights['effort'] * float(np.sum(qdot_traj ** 2))
    if telescoping is not None:
        for e_p, e_r in _terminal_errors(prob, knots[T]).values():
            cost += telescope_weight * (max(e_p - telescoping[0], 0.0) ** 2 +
                                        max(e_r - telescoping[1], 0.0) ** 2)
    penalty = 0.0
    margin = cfg.collision_margin
    ws = prob.model.workspace
    for t in range(1, T + 1):
        knot = knots[t]
        lam = _knot_weight(t, T)
        for w, r, _ in _goal_terms(prob, layout, cfg, knot):
            cost += lam * w * float(r.dot(r))
        centers = knot['centers']
        d_pair, _ = _pair_distances(layout, centers)
        d_obs, _ = sphere_aabb_distances(centers, layout.radii, prob.obstacles)
        penalty += np.sum(np.maximum(margin - d_pair, 0.0)) + np.sum(np.maximum(margin - d_obs, 0.0))
        if layout.S:
            penalty += np.sum(np.maximum(ws.min_corner - centers, 0.0) +
                              np.maximum(centers - ws.max_corner, 0.0))
    return cost + SLACK_PENALTY * float(penalty)


def build_subproblem(prob, q_traj_lin, qdot_traj_lin, cfg, trust_region=None, knots=None,
                     telescoping=None, telescope_weight=TELESCOPE_PENALTY):
    '''assembles the QP of one SQP iteration

    Decision variables are the stacked joint velocities of all T steps
    followed by one slack per collision row and per telescoping row. Joint
    positions are eliminated through q_t = q_0 + dt * (qdot_0 + ... + qdot_{t-1}).
    Collision slacks carry a linear (exact) penalty, telescoping slacks a
    quadratic one.

    Parameters
    ----------
    prob : TrajOptProblem
        the planning query

    q_traj_lin : (T+1) x n array
        linearization trajectory, q_traj_lin[0] is the initial state

    qdot_traj_lin : T x n array
        linearization velocities

    cfg : TrajOptConfig
        planner settings

    trust_region : float or None
        per-knot joint displacement bound (rad), defaults to cfg.trust_region

    telescoping : tuple or None
        (bound_p, bound_r) the terminal errors should stay below, infinite
        bounds add no rows. None adds no telescoping rows.

    telescope_weight : float
        quadratic penalty weight of the telescoping slacks
        default : 1e4

    Returns
    -------
    qp : dict
        'P', 'q', 'A', 'l', 'u' in the form of solve_bounded_qp, 'n_vel' and
        'n_slack' variable counts, 'n_terminal' (telescoping rows, the last
        slacks), 'slack_rows' (row index of every slack) and
        'constraint_count', the number of one-sided inequality rows.

    Examples
    --------
    >>> from biarmpy.geometry import test_biarm
    >>> model = test_biarm()
    >>> cfg = TrajOptConfig(horizon=3)
    >>> prob = TrajOptProblem(model, model.home_configuration())
    >>> v = np.zeros((3, 4))
    >>> qp = build_subproblem(prob, rollout(prob.q0, v, cfg.dt), v, cfg)
    >>> qp['n_vel'], qp['n_slack'], qp['constraint_count']
    (12, 12, 132)

    A pose goal with finite telescoping bounds adds a position row and a
    rotation row on the terminal knot

    >>> from biarmpy.geometry import forward_kinematics
    >>> goal = forward_kinematics(model.left, [np.pi/2 + 0.3, 0.0])
    >>> prob = TrajOptProblem(model, model.home_configuration(), {'left': goal})
    >>> qp = build_subproblem(prob, rollout(prob.q0, v, cfg.dt), v, cfg, telescoping=(0.01, 0.05))
    >>> qp['n_terminal'], qp['n_slack']
    (2, 14)
    >>> build_subproblem(prob, rollout(prob.q0, v, cfg.dt), v, cfg,
    ...                  telescoping=(np.inf, np.inf))['n_terminal']
    0
    '''
    T, dt = cfg.horizon, cfg.dt
    layout = _Layout(prob.model)
    n, S = layout.n, layout.S
    q_traj_lin = np.asarray(q_traj_lin, dtype=np.float64)
    qdot_traj_lin = np.asarray(qdot_traj_lin, dtype=np.float64)
    if q_traj_lin.shape != (T + 1, n) or qdot_traj_lin.shape != (T, n):
        raise ValueError('linearization trajectory needs shapes (%i, %i) and (%i, %i), got %s and %s'
                         %(T + 1, n, T, n, q_traj_lin.shape, qdot_traj_lin.shape))
    if knots is None:
        knots = _knot_states(prob, layout, q_traj_lin)
    trust = cfg.trust_region if trust_region is None else trust_region
    margin = cfg.collision_margin
    ws = prob.model.workspace
    O = len(prob.obstacles)
    n_vel = T * n
    q0 = q_traj_lin[0]

    H = 2.0 * cfg.weights['effort'] * np.eye(n_vel)
    grad = np.zeros(n_vel)
    hard_rows, hard_l, hard_u = [], [], []
    soft_rows, soft_l = [], []

    def lift(t, G):
        #rows over the velocity variables of the first t steps
        block = np.zeros((G.shape[0], n_vel))
        block[:, :t * n] = np.tile(dt * G, (1, t))
        return block

    for t in range(1, T + 1):
        knot = knots[t]
        dq = knot['q'] - q0
        lam = _knot_weight(t, T)

        for w, r_bar, G in _goal_terms(prob, layout, cfg, knot):
            r0 = r_bar - G.dot(dq)
            Gt = dt * G
            H[:t * n, :t * n] += 2.0 * w * lam * np.kron(np.ones((t, t)), Gt.T.dot(Gt))
            grad[:t * n] += 2.0 * w * lam * np.tile(Gt.T.dot(r0), t)

        #(i) joint position limits
        hard_rows.append(lift(t, np.eye(n)))
        hard_l.append(layout.lower - q0)
        hard_u.append(layout.upper - q0)

        if S == 0:
            continue
        centers = knot['centers']
        jac = knot['sphere_jacobians']

        #(ii) workspace limits on every sphere center
        G = jac.reshape(3 * S, n)
        offset = G.dot(dq) - centers.ravel()
        hard_rows.append(lift(t, G))
        hard_l.append(np.tile(ws.min_corner, S) + offset)
        hard_u.append(np.tile(ws.max_corner, S) + offset)

        #(iii) arm-to-arm separation
        d_pair, normal = _pair_distances(layout, centers)
        if len(d_pair):
            a, b = layout.pairs[:, 0], layout.pairs[:, 1]
            G = np.einsum('ki,kij->kj', normal, jac[a] - jac[b])
            soft_rows.append(lift(t, G))
            soft_l.append(margin - d_pair + G.dot(dq))

        #(iv) arm-to-object separation
        if O:
            d_obs, d_grad = sphere_aabb_distances(centers, layout.radii, prob.obstacles)
            G = np.einsum('soi,sij->soj', d_grad, jac).reshape(S * O, n)
            soft_rows.append(lift(t, G))
            soft_l.append(margin - d_obs.ravel() + G.dot(dq))

    #(v) telescoping of the terminal errors
    n_terminal = 0
    if telescoping is not None:
        dq = knots[T]['q'] - q0
        for f0, g, bound in _telescoping_rows(prob, knots[T], telescoping):
            soft_rows.append(-lift(T, g[None, :]))
            soft_l.append(np.array([f0 - g.dot(dq) - bound]))
            n_terminal += 1

    v_bar = qdot_traj_lin.ravel()
    vel = np.tile(layout.vel, T)
    v_low = np.maximum(-vel, v_bar - trust / dt)
    v_up = np.minimum(vel, v_bar + trust / dt)
    v_up = np.maximum(v_up, v_low)

    A_hard = np.vstack(hard_rows)
    A_soft = np.vstack(soft_rows) if soft_rows else np.zeros((0, n_vel))
    n_slack = A_soft.shape[0]

    A = sparse.bmat([[sparse.csr_matrix(A_hard), None],
                     [sparse.csr_matrix(A_soft), sparse.eye(n_slack) if n_slack else None],
                     [sparse.eye(n_vel), None],
                     [None, sparse.eye(n_slack) if n_slack else None]], format='csc') \
        if n_slack else sparse.vstack([sparse.csr_matrix(A_hard), sparse.eye(n_vel)], format='csc')
    l = np.concatenate([np.concatenate(hard_l),
                        np.concatenate(soft_l) if soft_l else np.zeros(0),
                        v_low, np.zeros(n_slack)])
    u = np.concatenate([np.concatenate(hard_u), np.full(n_slack, np.inf), v_up,
                        np.full(n_slack, np.inf)])

    n_collision = n_slack - n_terminal
    if n_slack:
        slack_quad = np.concatenate([np.zeros(n_collision), np.full(n_terminal, 2.0 * telescope_weight)])
        P = sparse.block_diag([sparse.csr_matrix(H), sparse.diags(slack_quad)], format='csc')
    else:
        P = sparse.csc_matrix(H)
    q = np.concatenate([grad, np.full(n_collision, SLACK_PENALTY), np.zeros(n_terminal)])

    n_hard = A_hard.shape[0]
    return {'P': P, 'q': q, 'A': A, 'l': l, 'u': u,
            'n_vel': n_vel, 'n_slack': n_slack, 'n_terminal': n_terminal,
            'slack_rows': n_hard + np.arange(n_slack),
            'constraint_count': 2 * n_hard + n_slack + 2 * n_vel}


def _terminal_errors(prob, knot):
    errors = {}
    for arm_id, goal in prob.goals.items():
        if goal is None:
            continue
        if isinstance(goal, JointGoal):
            q_arm = knot['q'][prob.model.arm_slice(arm_id)]
            errors[arm_id] = (0.0, float(np.max(np.abs(q_arm - goal.q))))
        else:
            pose = knot['pose'][arm_id]
            errors[arm_id] = (float(np.linalg.norm(pose.position - goal.position)),
                              orientation_error(goal.orientation, pose.orientation))
    return errors


def solve_meta_step(prob, cfg=None, prev_terminal_errors=(np.inf, np.inf), max_violation=None,
                    verbose=False, telescope_weight=TELESCOPE_PENALTY):
    '''solves one short-horizon problem by SQP

    Each iteration linearizes around the current trajectory, solves the QP
    and accepts the step by a backtracking line search on the exact-penalty
    merit function. Rejected steps halve the trust region. The loop stops
    when the step norm drops below 1e-5 or after cfg.sqp_max_iters.

    The telescoping bounds max(e_prev, eps) enter the QP as quadratically
    penalized rows on the terminal knot. The result is converged when the
    terminal errors satisfy
    e_p_T <= max(e_p_prev, eps_p) and e_r_T <= max(e_r_prev, eps_r) and
    the knots violate no constraint by more than max_violation.

    Parameters
    ----------
    prob : TrajOptProblem
        the planning query, prob.q0 is the initial state

    cfg : TrajOptConfig or None
        planner settings, None uses biarmpy.config

    prev_terminal_errors : tuple
        (e_p, e_r) of the preceding meta-step, (inf, inf) for the first

    max_violation : float or None
        constraint violation accepted at the knots, defaults to
        config.max_plan_violation

    telescope_weight : float
        quadratic penalty weight on terminal errors above the bounds
        default : 1e4

    Returns
    -------
    result : MetaStepResult

    Examples
    --------
    A goal at the current end-effector pose needs no motion

    >>> from biarmpy.geometry import test_biarm, forward_kinematics
    >>> model = test_biarm()
    >>> q0 = model.home_configuration()
    >>> goal = forward_kinematics(model.left, q0[:2])
    >>> res = solve_meta_step(TrajOptProblem(model, q0, {'left': goal}), TrajOptConfig())
    >>> res.converged, res.sqp_iters, res.e_p_T
    (True, 1, 0.0)
    '''
    cfg = TrajOptConfig.from_config() if cfg is None else cfg
    max_violation = config.max_plan_violation if max_violation is None else max_violation
    start = time.perf_counter()
    T, dt = cfg.horizon, cfg.dt
    layout = _Layout(prob.model)
    n = layout.n
    bounds = _telescoping_bounds(prev_terminal_errors, cfg)

    v = np.zeros((T, n))
    q_traj = rollout(prob.q0, v, dt)
    knots = _knot_states(prob, layout, q_traj)
    merit = _merit(prob, layout, cfg, v, knots, bounds, telescope_weight)
    trust = cfg.trust_region
    qp_iters = 0
    constraint_count = count_constraints(prob.model, len(prob.obstacles), T)
    y_warm = None

    sqp_iters = 0
    for sqp_iters in range(1, cfg.sqp_max_iters + 1):
        qp = build_subproblem(prob, q_traj, v, cfg, trust_region=trust, knots=knots,
                              telescoping=bounds, telescope_weight=telescope_weight)
        if y_warm is not None and len(y_warm) != len(qp['l']):
            y_warm = None
        sol = solve_bounded_qp(qp['P'], qp['q'], qp['A'], qp['l'], qp['u'],
                               tol=cfg.qp_tolerance, y0=y_warm)
        qp_iters += sol.iterations
        if sol.x is None:
            break
        y_warm = sol.y
        step = sol.x[:qp['n_vel']].reshape(T, n) - v
        if np.max(np.abs(step)) < STEP_TOL:
            break

        alpha = 1.0
        accepted = False
        for _ in range(4):
            v_try = v + alpha * step
            q_try = rollout(prob.q0, v_try, dt)
            knots_try = _knot_states(prob, layout, q_try)
            merit_try = _merit(prob, layout, cfg, v_try, knots_try, bounds, telescope_weight)
            if merit_try < merit:
                accepted = True
                break
            alpha *= 0.5

        if verbose:
            print('  sqp iter %i: merit %.6f, alpha %.3f, trust %.4f%s'
                  %(sqp_iters, merit_try, alpha, trust, '' if accepted else ' (rejected)'))

        if not accepted:
            trust *= 0.5
            if trust < 1e-4:
                break
            continue

        v, q_traj, knots, merit = v_try, q_try, knots_try, merit_try
        if np.max(np.abs(alpha * step)) < STEP_TOL:
            break

    arm_errors = _terminal_errors(prob, knots[-1])
    e_p = max([e[0] for e in arm_errors.values()], default=0.0)
    e_r = max([e[1] for e in arm_errors.values()], default=0.0)
    violation = 0.0
    for knot in knots[1:]:
        viol = _violations(prob, layout, knot)
        violation = max(violation, viol['joint_limit'], viol['workspace'],
                        viol['arm_arm'], viol['arm_object'])
    velocity = float(np.max(np.maximum(np.abs(v) - layout.vel, 0.0)))
    violation = max(violation, velocity)

    telescoping = e_p <= bounds[0] and e_r <= bounds[1]
    return MetaStepResult(q_traj, v, e_p, e_r, bool(telescoping and violation <= max_violation),
                          sqp_iters, violation, qp_iters, 1000.0 * (time.perf_counter() - start),
                          constraint_count, arm_errors)


def _feedback(prob, arm_id, prefix='cannot reach the object'):
    arm_name = '%s-arm' %arm_id
    return '%s: %s/%s' %(prefix, arm_name, prob.goal_labels.get(arm_id, 'goal'))


def _worst_arm(result, prob):
    if result is None or not result.arm_errors:
        goals = [k for k, g in prob.goals.items() if g is not None]
        return goals[0] if goals else 'left'
    return max(sorted(result.arm_errors),
               key=lambda k: result.arm_errors[k][0] + 0.1 * result.arm_errors[k][1])


def _stall_step(stall, improved, progress, tol):
    '''counts non-improving meta-steps while the progress error is above tol

    >>> _stall_step(1, False, 0.02, 0.005)
    2
    >>> _stall_step(1, False, 0.003, 0.005)
    0
    >>> _stall_step(1, True, 0.02, 0.005)
    0
    '''
    if progress <= tol or improved:
        return 0
    return stall + 1


def plan(prob, cfg=None, verbose=False):
    '''plans by concatenating meta-steps until the goal is reached

    Every accepted meta-step starts from the terminal state of the previous
    one. Meta-steps failing the telescoping check are discarded and count
    as non-improving; the retry from the same state halves the trust region
    and raises the telescoping weight tenfold. Planning stops with

    - 'Reached' once both terminal tolerances are met,
    - 'InfeasibleGoal' when e_p did not decrease by more than 1e-4 over 2
      consecutive meta-steps while above eps_p, or when a pose goal lies
      outside the workspace box. Problems with joint goals only track the
      joint error against eps_r instead.
    - 'Timeout' after cfg.max_meta_steps meta-steps.

    Parameters
    ----------
    prob : TrajOptProblem
        the planning query

    cfg : TrajOptConfig or None
        planner settings, None uses biarmpy.config

    verbose : bool
        whether to print progress per meta-step
        default : False

    Returns
    -------
    result : PlanResult
        feedback is 'cannot reach the object: <arm>/<goal>' for
        infeasible goals

    Examples
    --------
    >>> from biarmpy.geometry import test_biarm, forward_kinematics
    >>> model = test_biarm()
    >>> q0 = model.home_configuration()
    >>> goal = forward_kinematics(model.left, q0[:2])
    >>> res = plan(TrajOptProblem(model, q0, {'left': goal}))
    >>> res.status, len(res.meta_steps)
    ('Reached', 1)

    Goals outside the workspace are reported as feedback text

    >>> far = Pose([0.0, 0.0, 3.0])
    >>> res = plan(TrajOptProblem(model, q0, {'left': far}, goal_labels={'left': 'bottle'}))
    >>> res.status, res.feedback
    ('InfeasibleGoal', 'cannot reach the object: left-arm/bottle')
    '''
    cfg = TrajOptConfig.from_config() if cfg is None else cfg
    for arm_id, goal in sorted(prob.goals.items()):
        if isinstance(goal, Pose) and not prob.model.workspace.contains(goal.position):
            return PlanResult([], 'InfeasibleGoal', _feedback(prob, arm_id))

    has_pose = any(isinstance(g, Pose) for g in prob.goals.values())
    tol = cfg.eps_p if has_pose else cfg.eps_r
    steps = []
    prev = (np.inf, np.inf)
    progress = np.inf
    q = prob.q0
    stall = 0
    rejected = 0
    retry = 0
    result = None
    for i in range(cfg.max_meta_steps):
        step_cfg = replace(cfg, trust_region=cfg.trust_region * 0.5 ** retry) if retry else cfg
        result = solve_meta_step(replace(prob, q0=q, qdot0=None), step_cfg, prev,
                                 telescope_weight=TELESCOPE_PENALTY * 10.0 ** retry)
        if verbose:
            print('meta-step %i: e_p %.4f m, e_r %.4f rad, converged %s, %i sqp iters'
                  %(i + 1, result.e_p_T, result.e_r_T, result.converged, result.sqp_iters))
        if result.converged:
            retry = 0
            steps.append(result)
            q = result.q_traj[-1]
            if result.e_p_T <= cfg.eps_p and result.e_r_T <= cfg.eps_r:
                return PlanResult(steps, 'Reached', '', rejected)
            current = result.e_p_T if has_pose else result.e_r_T
            improved = progress - current > STALL_TOL
            progress = current
            prev = (result.e_p_T, result.e_r_T)
        else:
            rejected += 1
            retry += 1
            improved = False
        stall = _stall_step(stall, improved, progress, tol)
        if stall >= 2:
            return PlanResult(steps, 'InfeasibleGoal',
                              _feedback(prob, _worst_arm(result, prob)), rejected)

    return PlanResult(steps, 'Timeout',
                      _feedback(prob, _worst_arm(result, prob),
                                'timed out after %i meta-steps' %cfg.max_meta_steps), rejected)


def check_solution(result, prob, cfg=None, substeps=10):
    '''independent verification of a plan

    Re-evaluates the nonlinear constraints at every knot and at substeps
    linear interpolation points between knots, and checks the
    single-integrator consistency, the telescoping inequalities and the
    recursive feasibility of the terminal state.

    Returns
    -------
    report : dict
        'max_violation' (m or rad), per-kind maxima 'joint_limit',
        'velocity', 'workspace', 'arm_arm', 'arm_object', 'min_distance'
        (negative means penetration), 'collision', 'integration_error',
        'telescoping_ok', 'recursive_feasible' and 'n_samples'.

    Examples
    --------
    A zero-motion plan in free space has no violations

    >>> from biarmpy.geometry import test_biarm, Aabb
    >>> model = test_biarm()
    >>> cfg = TrajOptConfig(horizon=2)
    >>> q0 = model.home_configuration()
    >>> still = MetaStepResult(rollout(q0, np.zeros((2, 4)), 0.1), np.zeros((2, 4)), 0., 0., True, 1, 0.)
    >>> report = check_solution(PlanResult([still], 'Reached'), TrajOptProblem(model, q0), cfg)
    >>> report['max_violation'], report['collision']
    (0.0, False)

    Sweeping through a box is flagged

    >>> wall = Aabb([-0.2, 0.3, -0.1], [0.1, 0.4, 0.1])
    >>> sweep = np.array([[0.0, 0.0, 1.5, 0.0], [3.0, 0.0, 0.0, 0.0]])
    >>> q0 = np.array([0.2, 0.0, np.pi/2, 0.0])
    >>> ms = MetaStepResult(rollout(q0, sweep, 0.1), sweep, 0., 0., True, 1, 0.)
    >>> report = check_solution(PlanResult([ms], 'Reached'), TrajOptProblem(model, q0, obstacles=[wall]), cfg)
    >>> report['collision'], report['min_distance'] < 0
    (True, True)
    '''
    cfg = TrajOptConfig.from_config() if cfg is None else cfg
    layout = _Layout(prob.model)
    report = {'joint_limit': 0.0, 'velocity': 0.0, 'workspace': 0.0, 'arm_arm': 0.0,
              'arm_object': 0.0, 'min_distance': np.inf, 'integration_error': 0.0,
              'telescoping_ok': True, 'recursive_feasible': True, 'n_samples': 0}

    def visit(q):
        viol = _violations(prob, layout, _knot_state(prob.model, layout, q))
        for key in ('joint_limit', 'workspace', 'arm_arm', 'arm_object'):
            report[key] = max(report[key], viol[key])
        report['min_distance'] = min(report['min_distance'], viol['min_distance'])
        report['n_samples'] += 1
        return viol

    prev = (np.inf, np.inf)
    for ms in result.meta_steps:
        q_traj, qdot = ms.q_traj, ms.qdot_traj
        step_error = q_traj[1:] - q_traj[:-1] - cfg.dt * qdot
        report['integration_error'] = max(report['integration_error'],
                                          float(np.max(np.abs(step_error))) if step_error.size else 0.0)
        report['velocity'] = max(report['velocity'],
                                 float(np.max(np.maximum(np.abs(qdot) - layout.vel, 0.0))))
        for t in range(len(qdot)):
            for k in range(substeps):
                visit(q_traj[t] + (q_traj[t + 1] - q_traj[t]) * k / float(substeps))
        if ms.converged:
            if not (ms.e_p_T <= max(prev[0], cfg.eps_p) and ms.e_r_T <= max(prev[1], cfg.eps_r)):
                report['telescoping_ok'] = False
            prev = (ms.e_p_T, ms.e_r_T)

    if result.meta_steps:
        final = visit(result.meta_steps[-1].q_traj[-1])
    else:
        final = visit(prob.q0)
    #zero-velocity continuation of the terminal state
    report['recursive_feasible'] = bool(max(final['joint_limit'], final['workspace'],
                                            final['arm_arm'], final['arm_object']) <= 1e-9)
    report['max_violation'] = max(report['joint_limit'], report['velocity'], report['workspace'],
                                  report['arm_arm'], report['arm_object'])
    report['collision'] = bool(report['min_distance'] < 0)
    return report


def benchmark_rows(result):
    '''per meta-step solver statistics for the CSV benchmark export

    >>> ms = MetaStepResult(np.zeros((3, 2)), np.zeros((2, 2)), 0., 0., True, 2, 0., 40, 1.5, 340)
    >>> benchmark_rows(PlanResult([ms], 'Reached'))
    [{'meta_step': 1, 'sqp_iters': 2, 'qp_iters': 40, 'wall_ms': 1.5, 'constraint_count': 340}]
    '''
    return [{'meta_step': i + 1,
             'sqp_iters': ms.sqp_iters,
             'qp_iters': ms.qp_iters,
             'wall_ms': ms.wall_ms,
             'constraint_count': ms.constraint_count}
            for i, ms in enumerate(result.meta_steps)]
