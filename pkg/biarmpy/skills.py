'''
manipulation skills

Skills chain perception, grasp generation, planning and compliant execution
into the pick, place, handover, push and twist state machines and the
pick_and_place, unscrew_cap and discard_trash commands built on them.
Every skill returns a SkillOutcome; failures are values, not exceptions.
Calling a skill in a state it does not accept raises SkillPreconditionError.
'''

from contextlib import contextmanager
from dataclasses import dataclass, replace
import time

import numpy as np

from . import config
from .control import Simulation
from .exceptions import SkillPreconditionError
from .geometry import Pose, BiArmModel, CollisionSphere, grasp_orientation, \
    forward_kinematics, ee_jacobian, sphere_centers, sphere_aabb_distances
from .grasping import make_observation, heuristic_grasp, pct_forward
from .scene import find_object, detect, region_of, update_obstacles
from .trajopt import TrajOptConfig, TrajOptProblem, JointGoal, PlanResult, plan, \
    check_solution, arm_key

__all__ = ['SkillOutcome',
           'SkillContext',
           'SUCCESS', 'PERCEPTION', 'GRASP', 'HANDOVER', 'COLLISION', 'INFEASIBLE',
           'move_to_pose',
           'grasp_at_pose',
           'move_along_trajectory',
           'go_home',
           'pick',
           'place',
           'handover',
           'push_and_hold',
           'release_push',
           'twist_cycle',
           'pick_and_place',
           'unscrew_cap',
           'discard_trash',
           'say']

SUCCESS = 'Success'
PERCEPTION = 'PerceptionFailure'
GRASP = 'GraspFailure'
HANDOVER = 'HandoverFailure'
COLLISION = 'Collision'
INFEASIBLE = 'Infeasible'

#giving tool point of the handover
HANDOVER_POINT = np.array([0.0, 0.45, 0.35])
SETTLE_STEPS = 25
PUSH_APPROACH = np.array([0.0, 1.0, -1.0]) / np.sqrt(2.0)
#joint tolerance of twist and rewind plans (rad)
TWIST_TOLERANCE = 1e-3


@dataclass(eq=False)
class SkillOutcome:
    '''result of a skill

    trace_ref is the (first, last + 1) index range of the skill's events in
    the context trace.
    '''
    status: str
    detail: str = ''
    trace_ref: tuple = (0, 0)
    arm: str = None
    object_name: str = None

    @property
    def success(self):
        return self.status == SUCCESS


def _other(arm):
    return 'right' if arm == 'left' else 'left'


class SkillContext(object):
    '''everything a skill runs against: model, simulation, planner settings

    Parameters
    ----------
    model : BiArmModel
        robot model

    scene : Scene
        initial scene, owned by the simulation from here on

    cfg : TrajOptConfig or None
        planner settings, defaults to the module configuration

    noise : dict or None
        detection noise profile, None for ground truth

    seed : int
        seed of detection noise and fault draws

    weights : PctWeights or None
        grasp network, without it the heuristic grasp is used directly

    account_held_object : bool
        adds a collision sphere for a carried object while transporting it
        default : False

    faults : dict or None
        fault injection: 'handover_drop' (probability), 'handover_misalign'
        (receiver offset along its closing line, m) and 'low_lift' (bool)

    release : bool
        closed-chain force release in the controller
        default : True
    '''

    def __init__(self, model, scene, cfg=None, noise=None, seed=0, weights=None,
                 account_held_object=False, faults=None, release=True, gains='default'):
        self.model = model
        self.sim = Simulation(model, scene, gains=gains, release=release)
        self.cfg = TrajOptConfig.from_config() if cfg is None else cfg
        self.noise = noise
        self.weights = weights
        self.account_held_object = account_held_object
        self.faults = dict(faults or {})
        self.rng = np.random.default_rng(seed)
        self.seed = seed
        self.utterances = []
        self.timings = {'perceive': 0.0, 'grasp': 0.0, 'solve': 0.0, 'sim': 0.0}
        self.planned_knots = 0
        #arms that keep their configuration in plans that give them no goal
        self.pinned = set()
        self._draws = 0

    @property
    def scene(self):
        return self.sim.scene

    @property
    def events(self):
        return self.sim.trace.events

    @property
    def q(self):
        return self.sim.state.q

    def holding(self, arm):
        '''name of the object carried by an arm, None when empty'''
        grip = self.sim.state.attached[arm_key(arm)]
        return None if grip is None else grip[0]

    def held_objects(self):
        return [self.holding(arm) for arm in ('left', 'right') if self.holding(arm) is not None]

    @contextmanager
    def timed(self, key):
        '''accumulates wall-clock seconds of the enclosed block under key'''
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[key] = self.timings.get(key, 0.0) + time.perf_counter() - t0

    def next_seed(self):
        self._draws += 1
        return self.seed * 100003 + self._draws

    def log(self, event, arm=None, detail=''):
        self.sim.trace.log(event, self.sim.state.sim_time, arm, detail)

    def outcome(self, start, status, detail='', arm=None, object_name=None):
        self.log('outcome', arm, ('%s %s' %(status, detail)).strip())
        return SkillOutcome(status, detail, (start, len(self.events)), arm, object_name)

    def planning_model(self, transport=False):
        '''robot model for planning, with carried objects as spheres if enabled'''
        if not (transport and self.account_held_object):
            return self.model
        arms = {}
        for arm in ('left', 'right'):
            arms[arm] = self.model.arm(arm)
            name = self.holding(arm)
            if name is None or arm not in self.sim.state.grasp_offsets:
                continue
            box = self.scene.object(name).bounding_box()
            offset = arms[arm].ee_offset.compose(self.sim.state.grasp_offsets[arm]).position
            sphere = CollisionSphere(arms[arm].n_joints - 1, offset, float(np.linalg.norm(box.half_extents())))
            arms[arm] = arms[arm].with_extra_sphere(sphere)
        return BiArmModel(arms['left'], arms['right'], self.model.workspace, self.model.home)


def _held_object_collision(ctx, arm, q_traj):
    '''first object (or the table) a carried object runs into along a plan'''
    name = ctx.holding(arm)
    if name is None or arm not in ctx.sim.state.grasp_offsets:
        return None
    obj = ctx.scene.object(name)
    offset = ctx.sim.state.grasp_offsets[arm]
    others = [(o.name, o.bounding_box()) for o in ctx.scene.objects
              if o.name != name and o.name not in ctx.held_objects()]
    for q in q_traj:
        q_arm = q[ctx.model.arm_slice(arm)]
        box = obj.moved_to(forward_kinematics(ctx.model.arm(arm), q_arm).compose(offset)).bounding_box()
        if box.min_corner[2] < -0.005:
            return 'table'
        for other, obox in others:
            depth = np.minimum(box.max_corner, obox.max_corner) - np.maximum(box.min_corner, obox.min_corner)
            if np.all(depth > 0.005):
                return other
    return None


@dataclass(eq=False)
class _Motion:
    '''a plan with the query and settings it was made with'''
    result: PlanResult
    prob: TrajOptProblem
    cfg: TrajOptConfig
    report: dict = None

    @property
    def reached(self):
        return self.result.reached

    @property
    def feedback(self):
        return self.result.feedback


def _touching(ctx, model, exclude):
    '''objects the collision spheres already penetrate at the current configuration'''
    objects = [o for o in ctx.scene.objects if o.name not in exclude]
    q_l, q_r = model.split(ctx.q)
    spheres = sphere_centers(model.left, q_l) + sphere_centers(model.right, q_r)
    if not objects or not spheres:
        return []
    d, _ = sphere_aabb_distances(np.array([c for c, _ in spheres]), np.array([r for _, r in spheres]),
                                 [o.bounding_box() for o in objects])
    return [o.name for o, d_min in zip(objects, d.min(axis=0)) if d_min < 0]


def _plan(ctx, goals, labels, exclude=(), transport=False, cfg=None):
    '''plans and verifies a motion

    Objects the arms already touch are left out of the obstacles, pinned
    arms without a goal hold their configuration. A reached plan failing
    check_solution is planned once more on a grid of half the time step.
    '''
    cfg = ctx.cfg if cfg is None else cfg
    model = ctx.planning_model(transport)
    exclude = list(exclude) + ctx.held_objects()
    touching = _touching(ctx, model, exclude)
    if touching:
        ctx.log('contact', None, ', '.join(touching))
    goals, labels = dict(goals), dict(labels)
    for arm in sorted(ctx.pinned):
        if goals.get(arm) is None:
            goals[arm] = _hold_still(ctx, arm)
            labels[arm] = 'hold'
    prob = TrajOptProblem(model, ctx.q.copy(), goals, update_obstacles(ctx.scene, exclude + touching),
                          goal_labels=labels)
    for attempt in range(2):
        with ctx.timed('solve'):
            result = plan(prob, cfg)
        ctx.planned_knots += result.n_knots()
        if not result.reached:
            return _Motion(result, prob, cfg)
        report = check_solution(result, prob, cfg)
        if report['max_violation'] <= config.max_plan_violation or attempt == 1:
            break
        ctx.log('replan', None, 'violation %.4f between knots' %report['max_violation'])
        cfg = replace(cfg, dt=cfg.dt / 2.0, horizon=2 * cfg.horizon)
    return _Motion(result, prob, cfg, report)


def _execute(ctx, motion, start, arm):
    '''runs a reached and verified plan, returns a failure outcome or None'''
    report = motion.report
    if report is None:
        report = check_solution(motion.result, motion.prob, motion.cfg)
    if report['max_violation'] > config.max_plan_violation:
        ctx.log('plan_refused', arm, 'violation %.4f' %report['max_violation'])
        return ctx.outcome(start, INFEASIBLE, 'plan refused: constraint violation %.4f'
                           %report['max_violation'], arm)
    q_traj = motion.result.q_traj()
    hits = [(a, _held_object_collision(ctx, a, q_traj)) for a in ('left', 'right')]
    with ctx.timed('sim'):
        ctx.sim.execute(q_traj, motion.cfg.dt, hold_steps=SETTLE_STEPS)
    for a, hit in hits:
        if hit is not None:
            ctx.log('collision', a, '%s hit %s' %(ctx.holding(a), hit))
            return ctx.outcome(start, COLLISION, 'carried %s hit %s' %(ctx.holding(a), hit), a)
    return None


def move_to_pose(ctx, arm, pose, label='goal', exclude=(), transport=False):
    '''plans one arm to a tool pose and executes it

    Returns
    -------
    outcome : SkillOutcome
        Success, Infeasible (with the planner feedback) or Collision
    '''
    arm = arm_key(arm)
    start = len(ctx.events)
    motion = _plan(ctx, {arm: pose}, {arm: label}, exclude, transport)
    ctx.log('plan', arm, '%s %s %i meta-steps' %(label, motion.result.status,
                                                  len(motion.result.meta_steps)))
    if not motion.reached:
        return ctx.outcome(start, INFEASIBLE, motion.feedback, arm)
    failure = _execute(ctx, motion, start, arm)
    if failure is not None:
        return failure
    return ctx.outcome(start, SUCCESS, label, arm)


def move_along_trajectory(ctx, q_traj, dt=None):
    '''tracks a joint trajectory directly, without planning

    >>> from biarmpy.geometry import test_biarm
    >>> from biarmpy.scene import make_scene
    >>> ctx = SkillContext(test_biarm(), make_scene(regions={}, workspace=test_biarm().workspace))
    >>> q = ctx.model.home_configuration()
    >>> stats = move_along_trajectory(ctx, [q, q, q])
    >>> stats['n_steps'] > 0, stats['max_tracking_error'] < 1e-6
    (True, True)
    '''
    with ctx.timed('sim'):
        stats = ctx.sim.execute(np.asarray(q_traj), ctx.cfg.dt if dt is None else dt,
                                hold_steps=SETTLE_STEPS)
    ctx.log('trajectory', None, 'max tracking error %.4f rad' %stats['max_tracking_error'])
    return stats


def go_home(ctx, arms=('left', 'right')):
    '''moves the given arms back to their home configuration'''
    start = len(ctx.events)
    home_l, home_r = ctx.model.split(ctx.model.home_configuration())
    homes = {'left': home_l, 'right': home_r}
    goals = {arm_key(a): JointGoal(homes[arm_key(a)]) for a in arms}
    motion = _plan(ctx, goals, {k: 'home' for k in goals}, transport=True)
    if not motion.reached:
        return ctx.outcome(start, INFEASIBLE, motion.feedback)
    failure = _execute(ctx, motion, start, None)
    return failure or ctx.outcome(start, SUCCESS, 'home')


def grasp_at_pose(ctx, arm, pose, label, lift=None, exclude=()):
    '''pre-grasp, approach, close and lift

    The pre-grasp pose sits config.pregrasp_offset back along the approach.
    Both approach plans are made before the arm moves, so an infeasible
    grasp leaves the robot where it was.
    '''
    arm = arm_key(arm)
    start = len(ctx.events)
    approach = pose.matrix()[:, 2]
    pre = pose.translated(-config.pregrasp_offset * approach)
    exclude = list(exclude) + [label]

    first = _plan(ctx, {arm: pre}, {arm: label}, exclude)
    if not first.reached:
        return ctx.outcome(start, INFEASIBLE, first.feedback, arm)
    q_saved = ctx.sim.state.q
    ctx.sim.state.q = first.result.q_traj()[-1]
    second = _plan(ctx, {arm: pose}, {arm: label}, exclude)
    ctx.sim.state.q = q_saved
    if not second.reached:
        return ctx.outcome(start, INFEASIBLE, second.feedback, arm)

    failure = _execute(ctx, first, start, arm)
    if failure is not None:
        return failure
    #replanned from the tracked state, which differs slightly from the planned one
    second = _plan(ctx, {arm: pose}, {arm: label}, exclude)
    if not second.reached:
        return ctx.outcome(start, INFEASIBLE, second.feedback, arm)
    failure = _execute(ctx, second, start, arm)
    if failure is not None:
        return failure

    grip = ctx.sim.set_gripper(arm, True)
    if grip is None:
        ctx.sim.set_gripper(arm, False)
        return ctx.outcome(start, GRASP, 'nothing within reach of the gripper', arm)
    lift = (0.01 if ctx.faults.get('low_lift') else config.lift_height) if lift is None else lift
    if lift > 0:
        up = ctx.sim.tool_pose(arm).translated([0.0, 0.0, lift])
        moved = move_to_pose(ctx, arm, up, 'lift', exclude)
        if not moved.success:
            return ctx.outcome(start, moved.status, moved.detail, arm, grip[0])
    return ctx.outcome(start, SUCCESS, 'holding %s' %grip[0], arm, grip[0])


def _grasp_candidates(ctx, obs):
    out = []
    if ctx.weights is not None:
        with ctx.timed('grasp'):
            out.append(('pct', pct_forward(ctx.weights, obs)))
    with ctx.timed('grasp'):
        out.append(('heuristic', heuristic_grasp(obs)))
    return out


def pick(ctx, arm, caption, allow_switch=True):
    '''detects, grasps and lifts an object

    Fallback order: network grasp, heuristic grasp at the cloud mean, the
    other arm (once, if allowed and empty), then failure.

    Examples
    --------
    >>> from biarmpy.geometry import test_biarm
    >>> from biarmpy.scene import make_scene
    >>> ctx = SkillContext(test_biarm(), make_scene(regions={}, workspace=test_biarm().workspace))
    >>> pick(ctx, 'left-arm', 'coke can').status
    'PerceptionFailure'
    '''
    arm = arm_key(arm)
    start = len(ctx.events)
    if ctx.holding(arm) is not None:
        raise SkillPreconditionError('%s-arm already holds %s' %(arm, ctx.holding(arm)))
    with ctx.timed('perceive'):
        det, cloud = find_object(ctx.scene, caption, ctx.noise, ctx.next_seed())
    if not det.found:
        ctx.log('not_found', arm, caption)
        return ctx.outcome(start, PERCEPTION, 'could not find %s' %caption, arm)
    ctx.log('detected', arm, '%s -> %s' %(caption, det.object_name))
    obs = make_observation(cloud)

    arms = [arm]
    if allow_switch and ctx.holding(_other(arm)) is None:
        arms.append(_other(arm))
    last = None
    for i, a in enumerate(arms):
        if i > 0:
            ctx.log('switch_arm', a, caption)
        for kind, action in _grasp_candidates(ctx, obs):
            ctx.log('grasp_attempt', a, kind)
            last = grasp_at_pose(ctx, a, action.grasp_pose(obs), det.object_name)
            if last.status != INFEASIBLE:
                return ctx.outcome(start, last.status, last.detail, a, det.object_name)
    return ctx.outcome(start, INFEASIBLE, last.detail, arm, det.object_name)


def _free_spot(scene, name, region_box, footprint):
    '''region position for an object footprint, nearest to the region center'''
    lo = region_box.min_corner[:2] + footprint + 0.01
    hi = region_box.max_corner[:2] - footprint - 0.01
    center = region_box.center()[:2]
    if np.any(lo > hi):
        return center
    xs, ys = np.arange(lo[0], hi[0] + 1e-9, 0.04), np.arange(lo[1], hi[1] + 1e-9, 0.04)
    spots = sorted(((x, y) for x in xs for y in ys),
                   key=lambda s: (np.hypot(s[0] - center[0], s[1] - center[1]), s))
    boxes = [o.bounding_box() for o in scene.objects if o.name != name]
    for x, y in spots:
        if all(np.any(np.abs(np.array([x, y]) - b.center()[:2]) >= footprint + b.half_extents()[:2] + 0.01)
               for b in boxes):
            return np.array([x, y])
    return center


def _carry_target(ctx, arm, position):
    '''tool pose that puts the carried object's center at position'''
    obj = ctx.scene.object(ctx.holding(arm))
    tool = ctx.sim.tool_pose(arm)
    return Pose(tool.position + (np.asarray(position) - obj.pose.position), tool.orientation)


def _carry(ctx, arm, xy, z_bottom, label, clearance):
    '''moves the carried object over xy at a transit height, then down to z_bottom

    The transit height keeps the object bottom clearance above every other
    object top and above z_bottom.
    '''
    start = len(ctx.events)
    name = ctx.holding(arm)
    obj = ctx.scene.object(name)
    half = obj.pose.position[2] - obj.bounding_box().min_corner[2]
    tops = [o.bounding_box().max_corner[2] for o in ctx.scene.objects
            if o.name != name and o.name not in ctx.held_objects()]
    transit = max([z_bottom] + [t + clearance for t in tops])
    here = obj.pose.position
    steps = []
    if transit > obj.bounding_box().min_corner[2] + 1e-3:
        steps.append(([here[0], here[1]], transit, label + ' transit'))
    steps.append((xy, transit, label + ' approach'))
    if transit - z_bottom > 1e-3:
        steps.append((xy, z_bottom, label))
    for target_xy, bottom, step_label in steps:
        moved = move_to_pose(ctx, arm, _carry_target(ctx, arm, [target_xy[0], target_xy[1], bottom + half]),
                             step_label, transport=True)
        if not moved.success:
            return moved
    return ctx.outcome(start, SUCCESS, label, arm, name)


def place(ctx, arm, region_name):
    '''carries the held object over a free spot of a region and lets go

    The object travels above the other objects and is lowered until its
    bottom is config.place_hover above the table before the gripper opens.

    Examples
    --------
    >>> from biarmpy.geometry import test_biarm
    >>> from biarmpy.scene import make_scene
    >>> ctx = SkillContext(test_biarm(), make_scene(regions={}, workspace=test_biarm().workspace))
    >>> place(ctx, 'left-arm', 'left side')
    Traceback (most recent call last):
        ...
    biarmpy.exceptions.SkillPreconditionError: left-arm holds nothing to place
    '''
    arm = arm_key(arm)
    start = len(ctx.events)
    name = ctx.holding(arm)
    if name is None:
        raise SkillPreconditionError('%s-arm holds nothing to place' %arm)
    if region_name not in ctx.scene.regions:
        raise LookupError('unknown region "%s", available are: %s'
                          %(region_name, ', '.join(sorted(ctx.scene.regions))))
    box = ctx.scene.regions[region_name]
    obox = ctx.scene.object(name).bounding_box()
    spot = _free_spot(ctx.scene, name, box, obox.half_extents()[:2])
    moved = _carry(ctx, arm, spot, box.min_corner[2] + config.place_hover, region_name, 0.05)
    if not moved.success:
        return ctx.outcome(start, moved.status, moved.detail, arm, name)
    ctx.sim.set_gripper(arm, False)
    landed = region_of(ctx.scene, ctx.scene.object(name).pose.position)
    if landed != region_name:
        return ctx.outcome(start, INFEASIBLE, '%s landed in %s' %(name, landed), arm, name)
    return ctx.outcome(start, SUCCESS, '%s placed in %s' %(name, region_name), arm, name)


def handover(ctx, from_arm, to_arm):
    '''passes the held object between the arms

    The giving tool point moves to a fixed point above the table center. The
    receiving one approaches antipodally, stopping half the gap between the
    palms (config.handover_clearance apart) past the object frame. The
    receiving gripper closes first, then the giving one opens.
    '''
    from_arm, to_arm = arm_key(from_arm), arm_key(to_arm)
    start = len(ctx.events)
    name = ctx.holding(from_arm)
    if name is None:
        raise SkillPreconditionError('%s-arm holds nothing to hand over' %from_arm)
    if ctx.holding(to_arm) is not None:
        raise SkillPreconditionError('%s-arm is not empty' %to_arm)
    u = np.array([1.0, 0.0, 0.0]) if from_arm == 'left' else np.array([-1.0, 0.0, 0.0])
    gap = (config.handover_clearance - 2 * config.palm_offset) / 2.0
    give = Pose(HANDOVER_POINT - gap * u, grasp_orientation(u, [0.0, 0.0, 1.0]))
    take = Pose(HANDOVER_POINT + gap * u, grasp_orientation(-u, [0.0, 0.0, 1.0]))

    moved = move_to_pose(ctx, from_arm, give, 'handover', transport=True)
    if not moved.success:
        return ctx.outcome(start, moved.status, moved.detail, from_arm, name)
    take = Pose(ctx.scene.object(name).pose.position + gap * u, take.orientation)
    if ctx.faults.get('handover_misalign', 0.0):
        take = take.translated(ctx.faults['handover_misalign'] * take.matrix()[:, 1])

    drop = ctx.faults.get('handover_drop', 0.0) > 0 and ctx.rng.random() < ctx.faults['handover_drop']
    if drop:
        #receiver stops short of the object
        obox = ctx.scene.object(name).bounding_box()
        reach = np.abs(obox.half_extents().dot(u)) + 2 * config.attach_radius
        take = take.translated(reach * u)
        ctx.log('fault', to_arm, 'handover offset %.3f m' %reach)
    pre = take.translated(config.pregrasp_offset * u)
    for target, label in ((pre, 'handover approach'), (take, 'handover')):
        moved = move_to_pose(ctx, to_arm, target, label, exclude=[name])
        if not moved.success:
            return ctx.outcome(start, moved.status, moved.detail, to_arm, name)

    grip = ctx.sim.set_gripper(to_arm, True)
    if grip is None or grip[0] != name:
        ctx.sim.set_gripper(to_arm, False)
        ctx.sim.set_gripper(from_arm, False)
        return ctx.outcome(start, HANDOVER, '%s dropped during the transfer' %name, to_arm, name)
    ctx.log('closed_chain_gains', ctx.sim.compliant_arm,
            'kp %.1f' %ctx.sim.active_gains()[ctx.sim.compliant_arm].kp[0])
    ctx.sim.set_gripper(from_arm, False)
    retreat = ctx.sim.tool_pose(to_arm).translated(config.pregrasp_offset * u)
    moved = move_to_pose(ctx, to_arm, retreat, 'handover retreat', transport=True)
    if not moved.success:
        return ctx.outcome(start, moved.status, moved.detail, to_arm, name)
    return ctx.outcome(start, SUCCESS, '%s handed to %s-arm' %(name, to_arm), to_arm, name)


def push_and_hold(ctx, arm, part_caption, gains='stiff'):
    '''presses a pedal part and keeps it pressed

    The tool is commanded config.pedal_depth below the pedal surface at its
    front edge, approaching forward and down. The arm is pinned there until
    release_push is called.
    '''
    arm = arm_key(arm)
    start = len(ctx.events)
    det = detect(ctx.scene, part_caption, ctx.noise, ctx.next_seed())
    if not det.found or det.part_name is None:
        return ctx.outcome(start, PERCEPTION, 'could not find %s' %part_caption, arm)
    box = det.box
    push = np.array([box.center()[0], box.min_corner[1] + 0.002, box.max_corner[2] - config.pedal_depth])
    orientation = grasp_orientation(PUSH_APPROACH, [1.0, 0.0, 0.0])
    above = Pose(push + [0.0, -0.05, 0.08], orientation)
    moved = move_to_pose(ctx, arm, above, det.object_name, exclude=[])
    if not moved.success:
        return ctx.outcome(start, moved.status, moved.detail, arm)
    ctx.sim.set_gains(arm, gains)
    ctx.log('gains', arm, str(gains))
    moved = move_to_pose(ctx, arm, Pose(push, orientation), part_caption)
    if not moved.success:
        return ctx.outcome(start, moved.status, moved.detail, arm)
    if not ctx.sim.state.contacts.get('lid_open', {}).get(det.object_name, False):
        force = ctx.sim.state.contacts.get('pedal_force', {}).get(det.object_name, 0.0)
        return ctx.outcome(start, GRASP, 'insufficient contact force (%.2f N)' %force, arm)
    ctx.pinned.add(arm)
    return ctx.outcome(start, SUCCESS, 'pedal pressed', arm)


def release_push(ctx, arm):
    '''lifts a pushing arm off the pedal and restores default gains'''
    arm = arm_key(arm)
    ctx.pinned.discard(arm)
    up = ctx.sim.tool_pose(arm).translated([0.0, -0.05, 0.08])
    outcome = move_to_pose(ctx, arm, up, 'release', exclude=[o.name for o in ctx.scene.objects])
    ctx.sim.set_gains(arm, 'default')
    return outcome


def _twist_joint_goal(ctx, arm, angle):
    '''joint goal turning the tool by angle about its approach axis

    A top-down tool turning by -pi/2 about its approach rotates the cap by
    +pi/2 about the world vertical, counter-clockwise seen from above.
    '''
    q_arm = ctx.q[ctx.model.arm_slice(arm)].copy()
    J = ee_jacobian(ctx.model.arm(arm), q_arm)
    approach = forward_kinematics(ctx.model.arm(arm), q_arm).matrix()[:, 2]
    rate = float(J[3:, -1].dot(approach))
    sign = 1.0 if rate >= 0 else -1.0
    q_arm[-1] += sign * angle
    return q_arm


def _hold_still(ctx, arm):
    return JointGoal(ctx.q[ctx.model.arm_slice(arm)].copy())


def twist_cycle(ctx, hold_arm, twist_arm, container_caption, cap_caption, n_twists):
    '''repeatedly grasps, twists and releases a cap

    hold_arm needs to hold the container. Each twist turns the tool by
    -pi/2 about its approach axis, planned to TWIST_TOLERANCE and commanded
    2 * TWIST_TOLERANCE past the quarter turn so that the turn never ends
    short; the rewind returns it with the gripper open.

    Examples
    --------
    >>> from biarmpy.geometry import test_biarm
    >>> from biarmpy.scene import make_scene
    >>> ctx = SkillContext(test_biarm(), make_scene(regions={}, workspace=test_biarm().workspace))
    >>> twist_cycle(ctx, 'left-arm', 'right-arm', 'bottle', 'cap', 0)
    Traceback (most recent call last):
        ...
    ValueError: n_twists needs to be >= 1, got 0
    '''
    hold_arm, twist_arm = arm_key(hold_arm), arm_key(twist_arm)
    start = len(ctx.events)
    if n_twists < 1:
        raise ValueError('n_twists needs to be >= 1, got %i' %n_twists)
    container = ctx.holding(hold_arm)
    if container is None:
        raise SkillPreconditionError('%s-arm needs to hold the container' %hold_arm)
    det, cloud = find_object(ctx.scene, cap_caption, ctx.noise, ctx.next_seed())
    if not det.found or det.part_name is None:
        return ctx.outcome(start, PERCEPTION, 'could not find %s' %cap_caption, twist_arm)

    obs = make_observation(cloud)
    pose = heuristic_grasp(obs).grasp_pose(obs)
    approach = pose.matrix()[:, 2]
    for target, label in ((pose.translated(-config.pregrasp_offset * approach), 'cap approach'),
                          (pose, 'cap')):
        moved = move_to_pose(ctx, twist_arm, target, label, exclude=[container])
        if not moved.success:
            return ctx.outcome(start, GRASP, 're-grasp failure: %s' %moved.detail, twist_arm)

    angle = -(np.pi / 2 + 2 * TWIST_TOLERANCE)
    fine = replace(ctx.cfg, eps_r=TWIST_TOLERANCE)
    cap_name = '%s cap' %container
    for i in range(n_twists):
        grip = ctx.sim.set_gripper(twist_arm, True)
        if grip is None:
            return ctx.outcome(start, GRASP, 're-grasp failure in twist %i' %(i + 1), twist_arm)
        q_grasp = ctx.q[ctx.model.arm_slice(twist_arm)].copy()
        goals = {twist_arm: JointGoal(_twist_joint_goal(ctx, twist_arm, angle)),
                 hold_arm: _hold_still(ctx, hold_arm)}
        motion = _plan(ctx, goals, {twist_arm: 'twist', hold_arm: container}, cfg=fine)
        if not motion.reached:
            return ctx.outcome(start, GRASP, 'twist %i: %s' %(i + 1, motion.feedback), twist_arm)
        failure = _execute(ctx, motion, start, twist_arm)
        if failure is not None:
            return failure
        progress = ctx.sim.state.contacts.get('twist_progress', {}).get(container, 0.0)
        ctx.log('twist', twist_arm, '%i: progress %.3f rad' %(i + 1, progress))
        if ctx.scene.has_object(cap_name):
            up = ctx.sim.tool_pose(twist_arm).translated([0.0, 0.0, config.pregrasp_offset])
            move_to_pose(ctx, twist_arm, up, 'cap lift', exclude=[container])
            return ctx.outcome(start, SUCCESS, 'cap removed after %i twists' %(i + 1), twist_arm, cap_name)
        ctx.sim.set_gripper(twist_arm, False)
        goals = {twist_arm: JointGoal(q_grasp), hold_arm: _hold_still(ctx, hold_arm)}
        motion = _plan(ctx, goals, {twist_arm: 'rewind', hold_arm: container}, cfg=fine)
        if not motion.reached:
            return ctx.outcome(start, GRASP, 'rewind %i: %s' %(i + 1, motion.feedback), twist_arm)
        failure = _execute(ctx, motion, start, twist_arm)
        if failure is not None:
            return failure
    return ctx.outcome(start, GRASP, 'partial open', twist_arm, container)


def unscrew_cap(ctx, container_caption, cap_caption, n_twists, hold_arm='left', twist_arm='right',
                hold_gains='compliant'):
    '''holds a container from the left and twists its cap off with the other arm

    Examples
    --------
    >>> from biarmpy.geometry import test_biarm
    >>> from biarmpy.scene import make_scene
    >>> ctx = SkillContext(test_biarm(), make_scene(regions={}, workspace=test_biarm().workspace))
    >>> unscrew_cap(ctx, 'bottle', 'cap', 6).status
    'PerceptionFailure'

    Six quarter turns take the cap off the shipped bottle

    >>> from biarmpy.datautils import load_example_scene, load_robot_config
    >>> scene, _ = load_example_scene('bottle')
    >>> ctx = SkillContext(load_robot_config(), scene)
    >>> out = unscrew_cap(ctx, 'bottle', 'cap', 6)
    >>> out.status, out.detail
    ('Success', 'cap removed after 6 twists')
    >>> progress = ctx.sim.state.contacts['twist_progress']['bottle']
    >>> bool(progress >= 3 * np.pi)
    True
    '''
    hold_arm, twist_arm = arm_key(hold_arm), arm_key(twist_arm)
    start = len(ctx.events)
    det, cloud = find_object(ctx.scene, container_caption, ctx.noise, ctx.next_seed())
    if not det.found:
        return ctx.outcome(start, PERCEPTION, 'could not find %s' %container_caption, hold_arm)
    if not detect(ctx.scene, cap_caption).found:
        return ctx.outcome(start, PERCEPTION, 'could not find %s' %cap_caption, twist_arm)

    obs = make_observation(cloud)
    side = [1.0, 0.0, 0.0] if hold_arm == 'left' else [-1.0, 0.0, 0.0]
    held = grasp_at_pose(ctx, hold_arm, heuristic_grasp(obs, side).grasp_pose(obs),
                         det.object_name, lift=0.0)
    if not held.success:
        return ctx.outcome(start, held.status, held.detail, hold_arm, det.object_name)
    ctx.sim.set_gains(hold_arm, hold_gains)
    ctx.log('gains', hold_arm, str(hold_gains))
    out = twist_cycle(ctx, hold_arm, twist_arm, container_caption, cap_caption, n_twists)
    ctx.sim.set_gains(hold_arm, 'default')
    return ctx.outcome(start, out.status, out.detail, twist_arm, det.object_name)


def _dispose(ctx, arm, name, lid_box, can_name):
    start = len(ctx.events)
    moved = _carry(ctx, arm, lid_box.center()[:2], lid_box.max_corner[2] + 0.05, 'lid',
                   config.place_hover)
    if not moved.success:
        return ctx.outcome(start, moved.status, moved.detail, arm, name)
    ctx.sim.set_gripper(arm, False)
    if not ctx.sim.state.contacts.get('lid_open', {}).get(can_name, False):
        return ctx.outcome(start, INFEASIBLE, 'lid closed', arm, name)
    inside = ctx.scene.object(can_name).bounding_box().contains(ctx.scene.object(name).pose.position)
    if not inside:
        return ctx.outcome(start, INFEASIBLE, '%s missed the can' %name, arm, name)
    return ctx.outcome(start, SUCCESS, '%s disposed' %name, arm, name)


def _drop_held(ctx, arm):
    if ctx.holding(arm) is not None:
        ctx.sim.set_gripper(arm, False)


def _assisted_pick(ctx, push_arm, place_arm, item, pedal_caption, push_gains):
    '''lets go of the pedal, picks item with the pushing arm and hands it over

    Returns the pick outcome (carrying place_arm on success) and the outcome
    of pressing the pedal again.
    '''
    start = len(ctx.events)
    ctx.log('assist', push_arm, item)
    release_push(ctx, push_arm)
    got = pick(ctx, push_arm, item, allow_switch=False)
    if got.success:
        passed = handover(ctx, push_arm, place_arm)
        if passed.success:
            got = ctx.outcome(start, SUCCESS, '%s picked by %s-arm' %(got.object_name, push_arm),
                              place_arm, got.object_name)
        else:
            got = passed
    _drop_held(ctx, push_arm)
    go_home(ctx, [push_arm])
    pushed = push_and_hold(ctx, push_arm, pedal_caption, push_gains)
    return got, pushed


def discard_trash(ctx, push_arm, place_arm, lid_caption, pedal_caption, items, push_gains='stiff'):
    '''keeps the pedal pressed with one arm and drops items in the can with the other

    An item the placing arm cannot reach is picked by the pushing arm, which
    lets go of the pedal, hands the item over and presses the pedal again.

    Returns
    -------
    outcomes : list of SkillOutcome
        one per item, in order

    Examples
    --------
    >>> from biarmpy.datautils import load_example_scene, load_robot_config
    >>> scene, _ = load_example_scene('trash')
    >>> ctx = SkillContext(load_robot_config(), scene)
    >>> out = discard_trash(ctx, 'right-arm', 'left-arm', 'lid', 'push pedal',
    ...                     ['crumpled paper', 'paper cup'])
    >>> [o.status for o in out]
    ['Success', 'Success']
    >>> can = ctx.scene.object('trash can').bounding_box()
    >>> all(can.contains(ctx.scene.object(o.object_name).pose.position) for o in out)
    True
    '''
    push_arm, place_arm = arm_key(push_arm), arm_key(place_arm)
    lid = detect(ctx.scene, lid_caption, None)
    if not lid.found or lid.part_name is None:
        start = len(ctx.events)
        return [ctx.outcome(start, PERCEPTION, 'could not find %s' %lid_caption, place_arm, item)
                for item in items]
    pushed = push_and_hold(ctx, push_arm, pedal_caption, push_gains)
    outcomes = []
    for item in items:
        start = len(ctx.events)
        if not pushed.success:
            detail = 'lid closed' if pushed.status == GRASP else pushed.detail
            outcomes.append(ctx.outcome(start, pushed.status if pushed.status == PERCEPTION else INFEASIBLE,
                                        detail, place_arm, item))
            continue
        got = pick(ctx, place_arm, item, allow_switch=False)
        if got.status == INFEASIBLE:
            _drop_held(ctx, place_arm)
            got, pushed = _assisted_pick(ctx, push_arm, place_arm, item, pedal_caption, push_gains)
            if got.success and not pushed.success:
                _drop_held(ctx, place_arm)
                outcomes.append(ctx.outcome(start, INFEASIBLE, 'lid closed', place_arm, item))
                continue
        if not got.success:
            outcomes.append(ctx.outcome(start, got.status, got.detail, place_arm, item))
            _drop_held(ctx, place_arm)
            continue
        outcomes.append(_dispose(ctx, place_arm, got.object_name, lid.box, lid.object_name))
        go_home(ctx, [place_arm])
    if pushed.success:
        release_push(ctx, push_arm)
    return outcomes


def _nearest_arm(ctx, position):
    d = {arm: np.linalg.norm(ctx.model.arm(arm).base_pose.position[:2] - np.asarray(position)[:2])
         for arm in ('left', 'right')}
    return min(sorted(d), key=lambda a: d[a])


def pick_and_place(ctx, caption, region_name):
    '''picks with the nearer arm, hands over if the region is on the other side, places

    Examples
    --------
    >>> from biarmpy.geometry import test_biarm
    >>> from biarmpy.scene import make_scene
    >>> ctx = SkillContext(test_biarm(), make_scene(regions={}, workspace=test_biarm().workspace))
    >>> out = pick_and_place(ctx, 'red block', 'left side')
    >>> out.status, out.detail
    ('PerceptionFailure', 'could not find red block')
    '''
    start = len(ctx.events)
    with ctx.timed('perceive'):
        det = detect(ctx.scene, caption, ctx.noise, ctx.next_seed())
    if not det.found:
        return ctx.outcome(start, PERCEPTION, 'could not find %s' %caption)
    if region_name not in ctx.scene.regions:
        return ctx.outcome(start, INFEASIBLE, 'unknown region %s' %region_name)
    arm = _nearest_arm(ctx, det.box.center())
    got = pick(ctx, arm, caption)
    if not got.success:
        if got.object_name is not None and ctx.holding(got.arm) == got.object_name:
            ctx.sim.set_gripper(got.arm, False)
        go_home(ctx)
        return ctx.outcome(start, got.status, got.detail, got.arm, got.object_name)
    holder = got.arm
    placer = _nearest_arm(ctx, ctx.scene.regions[region_name].center())
    if placer != holder:
        passed = handover(ctx, holder, placer)
        if not passed.success:
            for a in ('left', 'right'):
                if ctx.holding(a) is not None:
                    ctx.sim.set_gripper(a, False)
            go_home(ctx)
            return ctx.outcome(start, passed.status, passed.detail, placer, got.object_name)
        go_home(ctx, [holder])
    put = place(ctx, placer, region_name)
    if ctx.holding(placer) is not None:
        ctx.sim.set_gripper(placer, False)
    go_home(ctx)
    return ctx.outcome(start, put.status, put.detail, placer, got.object_name)


def say(ctx, message):
    '''logs an utterance, no motion

    >>> from biarmpy.geometry import test_biarm
    >>> from biarmpy.scene import make_scene
    >>> ctx = SkillContext(test_biarm(), make_scene(regions={}, workspace=test_biarm().workspace))
    >>> say(ctx, 'hello').status, ctx.utterances
    ('Success', ['hello'])
    '''
    start = len(ctx.events)
    ctx.utterances.append(message)
    ctx.log('say', None, message)
    return ctx.outcome(start, SUCCESS, message)
