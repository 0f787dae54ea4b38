'''
property suites checking the solver, kinematics, planner, controller,
grasp network and command language at configurable scale

Every suite returns a report dict. The doctests run them at reduced size;
pass the full sizes (the defaults) for an acceptance run.
'''

import itertools
import time

import numpy as np

from . import config
from .biarmpy import benchmark_sorting
from .datautils import load_robot_config
from .geometry import Pose, Aabb, forward_kinematics, ee_jacobian, sphere_point_jacobian, \
    sphere_centers
from .control import PlantState, ComplianceGains, Simulation, control_step, step_plant, \
    kinematic_events
from .grasping import GraspAction, GraspObservation, GraspEnv, EsConfig, OFFSET_RANGE, \
    ROLL_RANGE, grasp_objects, make_observation, init_weights, zero_weights, pct_forward, \
    es_train, random_policy_baseline
from .qpsolver import solve_qp, kkt_residuals
from .robolang import PickAndPlace, UnscrewCap, DiscardTrash, Say, PlanAst, PlannerInput, \
    ARM_IDS, REFUSAL, parse, print_ast, template_plan, group_attribute
from .scene import SceneObject, PointCloud, SORTING_GROUPS, TABLE_AREA, box_shape, \
    sample_point_cloud, sorting_catalog, generate_sorting_tasks, get_state, region_of, \
    table_obstacle, make_scene
from .exceptions import ParseError
from .skills import SkillContext, pick, handover
from .trajopt import TrajOptConfig, TrajOptProblem, MetaStepResult, PlanResult, plan, check_solution

__all__ = ['random_qp',
           'kkt_enumeration_oracle',
           'qp_oracle_suite',
           'jacobian_suite',
           'telescoping_suite',
           'compliance_suite',
           'handover_torque_suite',
           'tracking_suite',
           'attachment_suite',
           'sorting_suite',
           'pct_property_suite',
           'es_suite',
           'dsl_suite',
           'safety_suite']


def random_qp(rng, max_dim=20, max_ineq=8, max_eq=2):
    '''strictly convex QP with a strictly feasible point

    Returns
    -------
    H, g, A_ineq, b_ineq, A_eq, b_eq : arrays
        A_ineq and A_eq may have zero rows
    '''
    n = int(rng.integers(1, max_dim + 1))
    M = rng.standard_normal((n, n))
    H = M.dot(M.T) + 0.1 * np.eye(n)
    g = rng.standard_normal(n)
    m = int(rng.integers(0, max_ineq + 1))
    k = int(rng.integers(0, min(max_eq, n - 1) + 1))
    x0 = rng.standard_normal(n)
    A_ineq = rng.standard_normal((m, n))
    b_ineq = A_ineq.dot(x0) + rng.uniform(0.0, 1.0, m)
    A_eq = rng.standard_normal((k, n))
    b_eq = A_eq.dot(x0)
    return H, g, A_ineq, b_ineq, A_eq, b_eq


def kkt_enumeration_oracle(H, g, A_ineq, b_ineq, A_eq, b_eq, tol=1e-9):
    '''exact QP solution by enumerating active sets

    For strictly convex problems the first active set whose KKT solution is
    primal and dual feasible holds the unique optimum.

    Returns
    -------
    x, objective : 1d array, float
        (None, None) when no active set qualifies

    Examples
    --------
    minimize (x - 3)^2 subject to x <= 1

    >>> x, f = kkt_enumeration_oracle(np.array([[2.0]]), np.array([-6.0]), np.array([[1.0]]),
    ...                               np.array([1.0]), np.zeros((0, 1)), np.zeros(0))
    >>> x.tolist(), f
    ([1.0], -5.0)
    '''
    n, m, k = len(g), len(b_ineq), len(b_eq)
    for size in range(0, min(m, n - k) + 1):
        for active in itertools.combinations(range(m), size):
            rows = np.vstack([A_eq, A_ineq[list(active)]])
            r = len(rows)
            K = np.zeros((n + r, n + r))
            K[:n, :n] = H
            K[:n, n:] = rows.T
            K[n:, :n] = rows
            rhs = np.concatenate([-g, b_eq, b_ineq[list(active)]])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                continue
            x, y = sol[:n], sol[n + k:]
            if np.all(A_ineq.dot(x) <= b_ineq + tol * (1.0 + np.abs(b_ineq))) and np.all(y >= -tol):
                return x, float(0.5 * x.dot(H).dot(x) + g.dot(x))
    return None, None


def qp_oracle_suite(n_problems=1000, max_dim=20, seed=0):
    '''compares solve_qp against the active-set enumeration oracle

    Returns
    -------
    report : dict
        'n_problems', 'max_objective_gap' (relative to max(1, |f|)),
        'max_kkt_residual', 'failures' (gap or residual above 1e-6 or
        status not 'solved')

    Examples
    --------
    >>> report = qp_oracle_suite(20, max_dim=6, seed=0)
    >>> report['n_problems'], bool(report['max_objective_gap'] < 1e-4)
    (20, True)
    '''
    rng = np.random.default_rng(seed)
    gaps, residuals = [], []
    failures = 0
    for _ in range(n_problems):
        H, g, A, b, A_eq, b_eq = random_qp(rng, max_dim)
        x_ref, f_ref = kkt_enumeration_oracle(H, g, A, b, A_eq, b_eq)
        sol = solve_qp(H, g, A if len(b) else None, b if len(b) else None,
                       A_eq if len(b_eq) else None, b_eq if len(b_eq) else None)
        if not sol.solved or x_ref is None:
            failures += 1
            continue
        f = 0.5 * sol.x.dot(H).dot(sol.x) + g.dot(sol.x)
        gap = abs(f - f_ref) / max(1.0, abs(f_ref))
        res = kkt_residuals(H, g, sol.x, A if len(b) else None, b, sol.y_ineq,
                            A_eq if len(b_eq) else None, b_eq, sol.y_eq)
        gaps.append(gap)
        residuals.append(max(res.values()))
        if gap > 1e-6 or residuals[-1] > 1e-6:
            failures += 1
    return {'n_problems': n_problems,
            'max_objective_gap': max(gaps) if gaps else np.inf,
            'max_kkt_residual': max(residuals) if residuals else np.inf,
            'failures': failures}


def jacobian_suite(n_configs=1000, seed=0, model=None, h=1e-6):
    '''analytic against central finite difference Jacobians

    The error of a configuration is the largest absolute entry difference
    divided by max(1, largest Jacobian entry), over the end-effector
    Jacobian (linear and angular rows) and all sphere Jacobians.

    Examples
    --------
    >>> report = jacobian_suite(20, seed=1)
    >>> bool(report['max_relative_error'] < 1e-5)
    True
    '''
    model = load_robot_config(apply_gains=False) if model is None else model
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(n_configs):
        arm = model.left if i % 2 == 0 else model.right
        q = rng.uniform(arm.lower, arm.upper)
        J = ee_jacobian(arm, q)
        fd = np.zeros_like(J)
        for j, e in enumerate(np.eye(arm.n_joints)):
            plus = forward_kinematics(arm, q + h * e)
            minus = forward_kinematics(arm, q - h * e)
            fd[:3, j] = (plus.position - minus.position) / (2 * h)
            fd[3:, j] = (plus.rotation() * minus.rotation().inv()).as_rotvec() / (2 * h)
        worst = max(worst, np.abs(J - fd).max() / max(1.0, np.abs(J).max()))
        for s in range(len(arm.collision_spheres)):
            Js = sphere_point_jacobian(arm, q, s)
            fds = np.array([(_sphere_center(arm, q + h * e, s) - _sphere_center(arm, q - h * e, s))
                            / (2 * h) for e in np.eye(arm.n_joints)]).T
            worst = max(worst, np.abs(Js - fds).max() / max(1.0, np.abs(Js).max()))
    return {'n_configs': n_configs, 'max_relative_error': float(worst)}


def _sphere_center(arm, q, index):
    return sphere_centers(arm, q)[index][0]


def _still(q, horizon):
    q_traj = np.tile(q, (horizon + 1, 1))
    ms = MetaStepResult(q_traj, np.zeros((horizon, len(q))), 0.0, 0.0, True, 0, 0.0)
    return PlanResult([ms], 'Reached')


def _free(model, q, obstacles, cfg_horizon=2):
    prob = TrajOptProblem(model, q, obstacles=obstacles)
    report = check_solution(_still(q, cfg_horizon), prob)
    return report['max_violation'] <= 0 and report['min_distance'] > config.collision_margin


def _random_goal(model, rng, arm_id, max_boxes=2):
    '''reachable goal pose near home and a static scene free at both ends'''
    home = model.home_configuration()
    arm = model.arm(arm_id)
    sl = model.arm_slice(arm_id)
    while True:
        obstacles = [table_obstacle()]
        for _ in range(int(rng.integers(0, max_boxes + 1))):
            c = [rng.uniform(*TABLE_AREA[0]), rng.uniform(*TABLE_AREA[1]), 0.0]
            obstacles.append(Aabb.from_center(c, rng.uniform(0.02, 0.06, 3)))
        q_goal = home.copy()
        q_goal[sl] = np.clip(home[sl] + rng.uniform(-0.6, 0.6, arm.n_joints), arm.lower, arm.upper)
        goal = forward_kinematics(arm, q_goal[sl])
        if (model.workspace.contains(goal.position) and _free(model, q_goal, obstacles)
                and _free(model, home, obstacles)):
            return goal, obstacles


def telescoping_suite(n_problems=100, seed=0, model=None, verbose=False):
    '''plans to random reachable goals in random static scenes

    Goals are end-effector poses of random collision-free configurations
    near home, scenes hold the table and up to two random boxes. Every
    accepted meta-step needs to satisfy the telescoping inequalities and
    its terminal state, continued at zero velocity, needs to be feasible.

    Returns
    -------
    report : dict
        'n_problems', 'status_counts', 'telescoping_violations',
        'recursive_failures', 'max_violation' of all reached plans,
        'wall_s'

    Examples
    --------
    >>> report = telescoping_suite(2, seed=0)
    >>> report['n_problems'], report['telescoping_violations']
    (2, 0)
    '''
    model = load_robot_config(apply_gains=False) if model is None else model
    rng = np.random.default_rng(seed)
    home = model.home_configuration()
    counts = {}
    telescoping = recursive = 0
    max_violation = 0.0
    t0 = time.perf_counter()
    for i in range(n_problems):
        arm_id = ('left', 'right')[i % 2]
        goal, obstacles = _random_goal(model, rng, arm_id)
        prob = TrajOptProblem(model, home, {arm_id: goal}, obstacles)
        result = plan(prob)
        counts[result.status] = counts.get(result.status, 0) + 1
        report = check_solution(result, prob)
        if not report['telescoping_ok']:
            telescoping += 1
        for ms in result.meta_steps:
            still = check_solution(_still(ms.q_traj[-1], 2), prob)
            if still['max_violation'] > config.max_plan_violation:
                recursive += 1
        if result.reached:
            max_violation = max(max_violation, report['max_violation'])
        if verbose: # pragma: no cover
            print('problem %i: %s, %i meta-steps' %(i, result.status, len(result.meta_steps)))
    return {'n_problems': n_problems,
            'status_counts': counts,
            'telescoping_violations': telescoping,
            'recursive_failures': recursive,
            'max_violation': max_violation,
            'wall_s': time.perf_counter() - t0}


def compliance_suite(torques=(0.5, 2.0, 8.0), profiles=('stiff', 'default', 'compliant'),
                     steps=5000, model=None):
    '''steady-state deflection and pedal threshold checks

    A PD-held joint under a constant external torque settles at tau / kp.
    For the pedal check the right arm rests at home with its tool pressed
    config.pedal_depth into a pedal; the lid opens iff the contact force
    depth / C_zz reaches config.pedal_force_threshold.

    Returns
    -------
    report : dict
        'max_deflection_error' (rad) and 'pedal', a list of dicts with
        profile, force (N) and pressed per gain profile

    Examples
    --------
    >>> report = compliance_suite(steps=5000)
    >>> bool(report['max_deflection_error'] < 1e-4)
    True
    >>> all(p['pressed'] == (p['force'] >= 5.0) for p in report['pedal'])
    True
    '''
    worst = 0.0
    for profile in profiles:
        gains = ComplianceGains.from_profile(profile, 1)
        for tau in torques:
            state = PlantState([0.0], [0.0], external_torques=np.array([tau]))
            for _ in range(steps):
                state = step_plant(state, control_step(state, [0.0], [0.0], [0.0], gains))
            worst = max(worst, abs(state.q[0] - tau / gains.kp[0]))

    model = load_robot_config(apply_gains=False) if model is None else model
    state = PlantState.initial(model)
    tool = forward_kinematics(model.right, model.split(state.q)[1]).position
    pedal = Aabb(tool - [0.03, 0.03, 0.03], tool + [0.03, 0.03, config.pedal_depth])
    can = SceneObject('pedal bin', Pose(pedal.center()), box_shape(pedal.half_extents() * 2.0 + 0.02),
                      {'trash can'}, {'push pedal': pedal})
    scene = make_scene([can], obstacles=[])
    pedals = []
    for profile in profiles:
        gains = {arm: ComplianceGains.from_profile(profile, model.arm(arm).n_joints)
                 for arm in ('left', 'right')}
        new, _ = kinematic_events(state, scene, model, gains)
        pedals.append({'profile': profile,
                       'force': float(new.contacts['pedal_force']['pedal bin']),
                       'pressed': bool(new.contacts['lid_open']['pedal bin'])})
    return {'max_deflection_error': float(worst), 'pedal': pedals}


def _handover_run(model, release, hold_gains, misalign):
    block = SceneObject('test block', Pose([-0.3, 0.45, 0.02]), box_shape([0.04, 0.04, 0.04]), {'block'})
    ctx = SkillContext(model, make_scene([block]), release=release,
                       faults={'handover_misalign': misalign})
    got = pick(ctx, 'left', 'test block', allow_switch=False)
    if not got.success:
        return got.status, 0.0
    ctx.sim.set_gains('left', hold_gains)
    passed = handover(ctx, 'left', 'right')
    return passed.status, ctx.sim.peak_internal_torque


def handover_torque_suite(profiles=('stiff', 'compliant'), misalign=0.01, model=None):
    '''peak internal torque of a handover with and without force release

    The left arm picks a block and hands it to the right arm, which closes
    misalign (m) off the object frame along its closing line. Every holding
    gain profile runs with the closed-chain release on and off.

    Returns
    -------
    report : dict
        'runs' (profile, release, status and peak torque per run),
        'release_ratio' per profile (peak with release over peak without),
        'max_release_ratio' and 'peak' per profile without release

    Examples
    --------
    >>> report = handover_torque_suite()
    >>> [r['status'] for r in report['runs']]
    ['Success', 'Success', 'Success', 'Success']
    >>> bool(report['max_release_ratio'] <= 0.25)
    True
    >>> bool(report['peak']['stiff'] > report['peak']['compliant'])
    True
    '''
    model = load_robot_config() if model is None else model
    runs = []
    ratios, peaks = {}, {}
    for profile in profiles:
        out = {}
        for release in (True, False):
            status, peak = _handover_run(model, release, profile, misalign)
            runs.append({'profile': profile, 'release': release, 'status': status, 'peak': peak})
            out[release] = peak
        ratios[profile] = out[True] / out[False] if out[False] > 0 else float('inf')
        peaks[profile] = out[False]
    return {'runs': runs,
            'release_ratio': ratios,
            'max_release_ratio': max(ratios.values()),
            'peak': peaks}


def tracking_suite(n_problems=20, seed=0, model=None):
    '''executes reached plans in free space and records the tracking error

    Returns
    -------
    report : dict
        'n_executed', 'max_tracking_error' (rad, over all runs)

    Examples
    --------
    >>> report = tracking_suite(2, seed=3)
    >>> bool(report['max_tracking_error'] <= 0.02)
    True
    '''
    model = load_robot_config() if model is None else model
    rng = np.random.default_rng(seed)
    home = model.home_configuration()
    cfg = TrajOptConfig.from_config()
    worst = 0.0
    executed = 0
    for i in range(n_problems):
        arm_id = ('left', 'right')[i % 2]
        goal, obstacles = _random_goal(model, rng, arm_id, max_boxes=0)
        prob = TrajOptProblem(model, home, {arm_id: goal}, obstacles)
        result = plan(prob, cfg)
        if not result.reached:
            continue
        sim = Simulation(model, make_scene([], obstacles=obstacles))
        stats = sim.execute(result.q_traj(), cfg.dt)
        worst = max(worst, stats['max_tracking_error'])
        executed += 1
    return {'n_executed': executed, 'max_tracking_error': float(worst)}


def attachment_suite(n_problems=5, seed=0, model=None):
    '''carries an attached object along random plans knot by knot

    The pose of the object in the tool frame is compared against its value
    at the attach event after every executed knot.

    Returns
    -------
    report : dict
        'n_knots', 'max_position_drift' (m), 'max_rotation_drift' (rad)

    Examples
    --------
    >>> report = attachment_suite(2, seed=1)
    >>> bool(report['max_position_drift'] <= 1e-9), bool(report['max_rotation_drift'] <= 1e-9)
    (True, True)
    '''
    model = load_robot_config() if model is None else model
    rng = np.random.default_rng(seed)
    home = model.home_configuration()
    cfg = TrajOptConfig.from_config()
    drift_p = drift_r = 0.0
    knots = 0
    for i in range(n_problems):
        arm_id = ('left', 'right')[i % 2]
        goal, obstacles = _random_goal(model, rng, arm_id, max_boxes=0)
        prob = TrajOptProblem(model, home, {arm_id: goal}, obstacles)
        result = plan(prob, cfg)
        if not result.reached:
            continue
        tool = forward_kinematics(model.arm(arm_id), home[model.arm_slice(arm_id)])
        obj = SceneObject('carried block', Pose(tool.position), box_shape([0.03, 0.03, 0.03]))
        sim = Simulation(model, make_scene([obj], obstacles=obstacles))
        sim.set_gripper(arm_id, True)
        ref = sim.tool_pose(arm_id).inverse().compose(sim.scene.object(obj.name).pose)
        q_traj = result.q_traj()
        for k in range(len(q_traj) - 1):
            sim.execute(q_traj[k:k + 2], cfg.dt)
            rel = sim.tool_pose(arm_id).inverse().compose(sim.scene.object(obj.name).pose)
            drift_p = max(drift_p, float(np.linalg.norm(rel.position - ref.position)))
            drift_r = max(drift_r, float((rel.rotation() * ref.rotation().inv()).magnitude()))
            knots += 1
    return {'n_knots': knots, 'max_position_drift': drift_p, 'max_rotation_drift': drift_r}


def sorting_suite(n_tasks=30, seed=0, min_rate=0.9, model=None, verbose=False):
    '''procedural sorting tasks with ground-truth perception

    Passes when at least min_rate of the tasks succeed (27 of the default 30).

    Returns
    -------
    report : dict
        'n_tasks', 'n_success', 'needed', 'passed', 'counts'

    Examples
    --------
    >>> report = sorting_suite(2, seed=0)
    >>> report['needed'], report['passed']
    (2, True)
    '''
    table = benchmark_sorting(n_tasks, seed, 'none', model=model, verbose=verbose)
    n_success = table['counts'].get('Success', 0)
    needed = int(np.ceil(min_rate * n_tasks - 1e-9))
    return {'n_tasks': n_tasks,
            'n_success': n_success,
            'needed': needed,
            'passed': n_success >= needed,
            'counts': table['counts']}


def pct_property_suite(n_clouds=20, n_points=1024, seed=0):
    '''permutation invariance, action ranges and the zero-weights action

    Returns
    -------
    report : dict
        'max_permutation_error', 'in_range' (all de-normalized actions
        within their ranges), 'zero_weights_mid_range', 'mean_forward_s'

    Examples
    --------
    >>> report = pct_property_suite(3, n_points=128)
    >>> bool(report['max_permutation_error'] <= 1e-6), report['in_range'], report['zero_weights_mid_range']
    (True, True, True)
    '''
    rng = np.random.default_rng(seed)
    catalog = grasp_objects()
    perm_error = 0.0
    in_range = mid_range = True
    elapsed = []
    zero = zero_weights()
    for i in range(n_clouds):
        weights = init_weights(seed=int(rng.integers(0, 2 ** 31)))
        entry = catalog[i % len(catalog)]
        pose = Pose.from_rotvec([0.0, 0.0, rng.uniform(0, np.pi)],
                                [rng.uniform(-0.3, 0.3), rng.uniform(0.4, 0.6), 0.1])
        obj = SceneObject(entry['name'], pose, entry['shape'])
        obs = make_observation(sample_point_cloud(obj, n_points, seed=int(rng.integers(0, 2 ** 31))))
        t0 = time.perf_counter()
        a = pct_forward(weights, obs, normalized=True)
        elapsed.append(time.perf_counter() - t0)
        perm = rng.permutation(len(obs.cloud))
        shuffled = GraspObservation(PointCloud(obs.cloud.points[perm]), obs.cloud_mean, obs.major_axis)
        perm_error = max(perm_error, float(np.abs(a - pct_forward(weights, shuffled, normalized=True)).max()))
        act = GraspAction.from_normalized(a)
        in_range &= bool(np.all(np.abs(act.fingertip_offset) <= OFFSET_RANGE + 1e-12)
                         and abs(np.linalg.norm(act.approach_dir) - 1.0) < 1e-9
                         and abs(act.roll_angle) <= ROLL_RANGE + 1e-12)
        mid = pct_forward(zero, obs)
        mid_range &= bool(np.all(mid.fingertip_offset == 0.0) and mid.roll_angle == 0.0
                          and np.array_equal(mid.approach_dir, np.array([0.0, 0.0, -1.0])))
    return {'max_permutation_error': perm_error,
            'in_range': in_range,
            'zero_weights_mid_range': mid_range,
            'mean_forward_s': float(np.mean(elapsed))}


def _monotone_fraction(curve, window=10):
    blocks = np.asarray(curve)[:len(curve) // window * window].reshape(-1, window).mean(axis=1)
    if len(blocks) < 2:
        return 1.0
    return float(np.mean(np.diff(blocks) >= 0.0))


def es_suite(n_seeds=5, iters=200, l=50, n_episodes=10, eval_episodes=200, verbose=False):
    '''trains the grasp network from several seeds against the random baseline

    Returns
    -------
    report : dict
        'baseline', 'final_rewards' (one per seed), 'median_improvement',
        'monotone_fraction' (median over seeds of the share of 10-iteration
        windows whose mean reward did not drop)

    Examples
    --------
    >>> report = es_suite(n_seeds=1, iters=2, l=2, n_episodes=2, eval_episodes=10)
    >>> len(report['final_rewards']), 0.0 <= report['baseline'] <= 1.0
    (1, True)
    '''
    baseline = random_policy_baseline(max(eval_episodes, 50), seed=0)
    env = GraspEnv(n_episodes)
    finals, monotone = [], []
    for seed in range(n_seeds):
        weights, curve = es_train(env, init_weights(seed=seed), EsConfig(l=l, iters=iters, seed=seed),
                                  verbose=verbose)
        finals.append(env.evaluate(weights, eval_episodes))
        monotone.append(_monotone_fraction(curve))
    return {'baseline': baseline,
            'final_rewards': finals,
            'median_improvement': float(np.median(finals) - baseline),
            'monotone_fraction': float(np.median(monotone))}


_ALPHABET = list("abcdefghijklmnopqrstuvwxyz ABC-.,'\\\n\t#()[]0123456789") + ['é', '✓']


def _random_text(rng, max_len=20):
    n = int(rng.integers(1, max_len + 1))
    return ''.join(_ALPHABET[j] for j in rng.integers(0, len(_ALPHABET), n))


def _random_statement(rng):
    kind = int(rng.integers(0, 4))
    if kind == 0:
        return PickAndPlace(_random_text(rng), _random_text(rng))
    if kind == 1:
        return UnscrewCap(_random_text(rng), _random_text(rng), int(rng.integers(1, 50)))
    if kind == 2:
        items = [_random_text(rng) for _ in range(int(rng.integers(1, 4)))]
        return DiscardTrash(ARM_IDS[int(rng.integers(0, 2))], ARM_IDS[int(rng.integers(0, 2))],
                            _random_text(rng), _random_text(rng), items)
    return Say(_random_text(rng, 60))


def dsl_suite(n_cases=1000, seed=0, max_bytes=4096):
    '''round trip of random programs and parser totality on random input

    Returns
    -------
    report : dict
        'roundtrip_failures', 'crashes' (exceptions other than ParseError),
        'parse_errors' and 'n_cases'

    Examples
    --------
    >>> report = dsl_suite(50, seed=2, max_bytes=256)
    >>> report['roundtrip_failures'], report['crashes']
    (0, 0)
    '''
    rng = np.random.default_rng(seed)
    roundtrip = crashes = errors = 0
    for _ in range(n_cases):
        ast = PlanAst([_random_statement(rng) for _ in range(int(rng.integers(0, 6)))])
        if parse(print_ast(ast)) != ast:
            roundtrip += 1

        text = print_ast(ast).encode('utf-8')
        kind = int(rng.integers(0, 3))
        if kind == 0:
            data = rng.integers(0, 256, int(rng.integers(0, max_bytes + 1))).astype(np.uint8).tobytes()
        elif kind == 1 and text:
            #mutate a valid program
            data = bytearray(text)
            for _ in range(int(rng.integers(1, 6))):
                pos = int(rng.integers(0, len(data) + 1))
                if rng.random() < 0.5 and pos < len(data):
                    del data[pos]
                else:
                    data.insert(pos, int(rng.integers(0, 128)))
            data = bytes(data)
        else:
            data = _random_text(rng, max(1, max_bytes // 4)).encode('utf-8')
        try:
            parse(data)
        except ParseError:
            errors += 1
        except Exception:
            crashes += 1
    return {'n_cases': n_cases,
            'roundtrip_failures': roundtrip,
            'crashes': crashes,
            'parse_errors': errors}


def _random_instruction(rng, knife_name):
    groups = sorted(SORTING_GROUPS) + ['utensils', 'sharp objects', knife_name, 'green objects']
    group = groups[int(rng.integers(0, len(groups)))]
    side = ('left', 'right')[int(rng.integers(0, 2))]
    templates = ['Move the %s to the %s side', 'Put the %s on the %s side',
                 'Place all the %s on the %s side']
    if rng.random() < 0.1:
        return 'Juggle the %s' %group, None, None
    return templates[int(rng.integers(0, len(templates)))] %(group, side), group, side


def safety_suite(n_cases=1000, seed=0):
    '''no generated program picks a sharp object

    Every scene holds a sharp knife. A refusal is required whenever the
    knife matches the instruction's group and is not in the target region
    yet.

    Returns
    -------
    report : dict
        'n_cases', 'sharp_picks' (need to be 0), 'missing_refusals'
        (need to be 0)

    Examples
    --------
    >>> report = safety_suite(30, seed=4)
    >>> report['sharp_picks'], report['missing_refusals']
    (0, 0)
    '''
    rng = np.random.default_rng(seed)
    knife = [c for c in sorting_catalog() if 'sharp' in c['attributes']][0]
    tasks = generate_sorting_tasks(max(1, min(n_cases, 50)), seed=seed)
    sharp_picks = missing = 0
    for i in range(n_cases):
        scene = tasks[i % len(tasks)][0]
        if not scene.has_object(knife['name']):
            x, y = rng.uniform(-0.6, 0.6), rng.uniform(*TABLE_AREA[1])
            scene = scene.with_object(SceneObject(knife['name'], Pose([x, y, 0.0075]),
                                                  knife['shape'], knife['attributes']))
        instruction, group, side = _random_instruction(rng, knife['name'])
        ast = template_plan(PlannerInput(instruction, get_state(scene)), scene)
        for stmt in ast.statements:
            if isinstance(stmt, PickAndPlace) and 'sharp' in scene.object(stmt.object_name).attributes:
                sharp_picks += 1
            if isinstance(stmt, DiscardTrash) and any('sharp' in scene.object(n).attributes
                                                      for n in stmt.items):
                sharp_picks += 1
        if group is None:
            continue
        obj = scene.object(knife['name'])
        matches = group_attribute(group) in obj.attributes or group == obj.name
        region = '%s side' %side
        if matches and region_of(scene, obj.pose.position) != region:
            if Say(REFUSAL %obj.name) not in ast.statements:
                missing += 1
    return {'n_cases': n_cases, 'sharp_picks': sharp_picks, 'missing_refusals': missing}
