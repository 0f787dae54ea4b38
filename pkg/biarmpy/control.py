'''
compliant joint-space control and the simulated plant

The controller is a feedforward plus PD law on decoupled double-integrator
joints. The plant integrates with semi-implicit Euler and applies joint hard
stops 0.05 rad outside the limits. Objects are handled kinematically:
grasped objects follow the tool frame, a pedal registers a press when the
controller pushes hard enough, and a cap comes off after enough twisting.
'''

from dataclasses import dataclass, field, replace
import warnings

import numpy as np
from scipy.interpolate import CubicSpline

from . import config
from .exceptions import TorqueLimitWarning, SkillPreconditionError
from .geometry import Pose, arm_kinematics, forward_kinematics
from .scene import SceneObject, cylinder_shape

__all__ = ['ComplianceGains',
           'PlantState',
           'TrackingTrace',
           'smooth_reference',
           'control_step',
           'step_plant',
           'kinematic_events',
           'closed_chain_release',
           'cartesian_compliance',
           'internal_torque',
           'Simulation']

ARMS = ('left', 'right')
HARD_STOP = 0.05
PEDAL_REACH = 0.01


@dataclass(eq=False)
class ComplianceGains:
    '''per-joint stiffness (N*m/rad) and damping (N*m*s/rad)

    >>> g = ComplianceGains.from_profile('stiff', 2)
    >>> g.kp, g.profile_name
    (array([1000., 1000.]), 'stiff')
    >>> ComplianceGains([-1.0], [0.0])
    Traceback (most recent call last):
        ...
    ValueError: gains need kp >= 0 and kd >= 0 componentwise
    '''
    kp: np.ndarray
    kd: np.ndarray
    profile_name: str = 'custom'

    def __post_init__(self):
        self.kp = np.asarray(self.kp, dtype=np.float64).reshape(-1)
        self.kd = np.asarray(self.kd, dtype=np.float64).reshape(-1)
        if self.kp.shape != self.kd.shape:
            raise ValueError('kp and kd need the same length')
        if np.any(self.kp < 0) or np.any(self.kd < 0):
            raise ValueError('gains need kp >= 0 and kd >= 0 componentwise')

    @classmethod
    def from_profile(cls, profile, n_joints=6):
        g = config.get_gains(profile, n_joints)
        return cls(g['kp'], g['kd'], g['profile_name'])

    def scaled(self, factor, inertia=None):
        '''stiffness scaled by factor, damping kept critical'''
        inertia = config.joint_inertia if inertia is None else inertia
        kp = self.kp * factor
        return ComplianceGains(kp, 2.0 * np.sqrt(kp * inertia), '%s*%g' %(self.profile_name, factor))


@dataclass(eq=False)
class PlantState:
    '''joint state of both arms plus gripper and contact bookkeeping

    q and qdot are combined vectors (left joints first). attached maps an
    arm to (object name, part name or None); grasp_offsets holds the object
    pose in the tool frame of the arm that carries it.
    '''
    q: np.ndarray
    qdot: np.ndarray
    gripper: dict = field(default_factory=lambda: {'left': 'open', 'right': 'open'})
    attached: dict = field(default_factory=lambda: {'left': None, 'right': None})
    grasp_offsets: dict = field(default_factory=dict)
    sim_time: float = 0.0
    external_torques: np.ndarray = None
    contacts: dict = field(default_factory=dict)
    pending: set = field(default_factory=set)

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=np.float64).copy()
        self.qdot = np.asarray(self.qdot, dtype=np.float64).copy()
        if self.external_torques is None:
            self.external_torques = np.zeros(len(self.q))

    @classmethod
    def initial(cls, model, q0=None):
        q0 = model.home_configuration() if q0 is None else q0
        return cls(q0, np.zeros(model.n_joints))

    def copy(self):
        return replace(self, gripper=dict(self.gripper), attached=dict(self.attached),
                       grasp_offsets=dict(self.grasp_offsets), contacts=_copy_contacts(self.contacts),
                       pending=set(self.pending), external_torques=self.external_torques.copy())

    def holder_of(self, name):
        '''arms carrying the whole object (not one of its parts)'''
        return [arm for arm in ARMS if self.attached[arm] is not None and
                self.attached[arm][0] == name and self.attached[arm][1] is None]


def _copy_contacts(contacts):
    return {k: dict(v) if isinstance(v, dict) else v for k, v in contacts.items()}


class TrackingTrace(object):
    '''time series of desired/actual joints, torques and events

    Samples are spaced by exactly control_dt.
    '''

    def __init__(self, control_dt):
        self.control_dt = control_dt
        self.t = []
        self.q_desired = []
        self.q_actual = []
        self.torque = []
        self.external_torque = []
        self.events = []

    def __len__(self):
        return len(self.t)

    def append(self, q_desired, q_actual, torque, external_torque):
        self.t.append(len(self.t) * self.control_dt)
        self.q_desired.append(np.array(q_desired))
        self.q_actual.append(np.array(q_actual))
        self.torque.append(np.array(torque))
        self.external_torque.append(np.array(external_torque))

    def log(self, event, t, arm=None, detail=''):
        self.events.append({'event': event, 't': float(t), 'arm': arm, 'detail': detail})

    def tracking_error(self):
        if not self.t:
            return 0.0
        return float(np.max(np.abs(np.array(self.q_desired) - np.array(self.q_actual))))

    def as_arrays(self):
        return {'t': np.array(self.t),
                'q_desired': np.array(self.q_desired),
                'q_actual': np.array(self.q_actual),
                'torque': np.array(self.torque),
                'external_torque': np.array(self.external_torque)}


def smooth_reference(q_traj, plan_dt=None, control_dt=None):
    '''cubic-spline interpolation of planner knots at the control rate

    Parameters
    ----------
    q_traj : 2d array
        planner knots, one row per knot

    plan_dt : float
        knot spacing (s), defaults to config.plan_dt

    control_dt : float
        control period (s), needs to divide plan_dt, defaults to config.control_dt

    Returns
    -------
    q_d, qdot_d, qddot_d : 2d arrays
        dense reference with zero velocity at both ends

    Examples
    --------
    >>> q_d, qdot_d, qddot_d = smooth_reference([[0.0], [0.0], [0.0]], 0.1, 0.002)
    >>> q_d.shape, float(np.abs(qddot_d).max())
    ((101, 1), 0.0)
    >>> q_d, qdot_d, qddot_d = smooth_reference([[0.0], [1.0]], 0.1, 0.002)
    >>> float(q_d[0, 0]), bool(abs(q_d[-1, 0] - 1.0) < 1e-9), bool(abs(qdot_d[-1, 0]) < 1e-9)
    (0.0, True, True)
    '''
    plan_dt = config.plan_dt if plan_dt is None else plan_dt
    control_dt = config.control_dt if control_dt is None else control_dt
    q_traj = np.asarray(q_traj, dtype=np.float64)
    if q_traj.ndim == 1:
        q_traj = q_traj[:, None]
    if len(q_traj) < 2:
        raise ValueError('smoothing needs at least 2 knots, got %i' %len(q_traj))
    ratio = plan_dt / control_dt
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise ValueError('control_dt (%s) needs to divide plan_dt (%s)' %(control_dt, plan_dt))
    ratio = int(round(ratio))

    knots = np.arange(len(q_traj)) * plan_dt
    spline = CubicSpline(knots, q_traj, axis=0, bc_type='clamped')
    n_dense = (len(q_traj) - 1) * ratio + 1
    #dense samples land exactly on the knot times
    t = np.arange(n_dense) // ratio * plan_dt + (np.arange(n_dense) % ratio) * control_dt
    return spline(t), spline(t, 1), spline(t, 2)


def control_step(state, q_d, qdot_d, qddot_d, gains, inertia=None):
    '''feedforward plus PD torque

    tau = I * qddot_d + kp * (q_d - q) + kd * (qdot_d - qdot)

    Examples
    --------
    >>> state = PlantState([0.0, 0.0], [0.0, 0.0])
    >>> gains = ComplianceGains([50.0, 50.0], [3.0, 3.0])
    >>> control_step(state, [0.1, 0.0], [0.0, 0.0], [0.0, 0.0], gains)
    array([5., 0.])
    '''
    inertia = config.joint_inertia if inertia is None else inertia
    return (inertia * np.asarray(qddot_d) + gains.kp * (np.asarray(q_d) - state.q) +
            gains.kd * (np.asarray(qdot_d) - state.qdot))


def step_plant(state, torque, control_dt=None, limits=None, inertia=None):
    '''integrates the decoupled plant I * qddot = tau + tau_ext by one step

    Semi-implicit Euler: the velocity is updated first and the new velocity
    moves the position. With limits=(lower, upper), joints are clamped
    0.05 rad outside the limits and their velocity is zeroed there.

    Examples
    --------
    >>> state = PlantState([0.3], [0.0])
    >>> step_plant(state, [0.0], 0.002).q
    array([0.3])

    Under a constant external torque a PD-held joint settles at tau_ext / kp

    >>> state = PlantState([0.0], [0.0], external_torques=np.array([2.0]))
    >>> gains = ComplianceGains.from_profile(400.0, 1)
    >>> for _ in range(5000):
    ...     state = step_plant(state, control_step(state, [0.0], [0.0], [0.0], gains), 0.002)
    >>> '%.4f' %state.q[0]
    '0.0050'
    '''
    control_dt = config.control_dt if control_dt is None else control_dt
    inertia = config.joint_inertia if inertia is None else inertia
    new = state.copy()
    qddot = (np.asarray(torque, dtype=np.float64) + state.external_torques) / inertia
    new.qdot = state.qdot + control_dt * qddot
    new.q = state.q + control_dt * new.qdot
    if limits is not None:
        lower, upper = limits[0] - HARD_STOP, limits[1] + HARD_STOP
        stopped = (new.q < lower) | (new.q > upper)
        new.q = np.clip(new.q, lower, upper)
        new.qdot[stopped] = 0.0
    new.sim_time = state.sim_time + control_dt
    return new


def cartesian_compliance(model, arm_id, q_arm, kp):
    '''tool-point compliance J K^-1 J' (m/N) of a PD-held arm'''
    J = arm_kinematics(model.arm(arm_id), q_arm)['ee_jacobian'][:3]
    return J.dot(np.diag(1.0 / np.maximum(kp, 1e-12))).dot(J.T)


def internal_torque(model, state, arm_id, kp, displacement):
    '''fighting torque of a PD-held arm forced to move its tool by displacement

    tau = K * J^+ * delta, J^+ the pseudo-inverse of the position Jacobian.

    Examples
    --------
    >>> from biarmpy.geometry import test_biarm
    >>> model = test_biarm()
    >>> state = PlantState.initial(model)
    >>> tau = internal_torque(model, state, 'left', np.array([100.0, 100.0]), [0.0, 0.0, 0.0])
    >>> float(np.abs(tau).max())
    0.0
    '''
    q_arm = state.q[model.arm_slice(arm_id)]
    J = arm_kinematics(model.arm(arm_id), q_arm)['ee_jacobian'][:3]
    return kp * np.linalg.pinv(J).dot(np.asarray(displacement, dtype=np.float64))


def _tool_poses(model, q):
    q_l, q_r = model.split(q)
    return {'left': forward_kinematics(model.left, q_l), 'right': forward_kinematics(model.right, q_r)}


def _support_height(scene, obj, position):
    '''height of the highest surface below position, table at z = 0'''
    top = 0.0
    for other in scene.objects:
        if other.name == obj.name:
            continue
        box = other.bounding_box()
        if box.min_corner[0] <= position[0] <= box.max_corner[0] and \
           box.min_corner[1] <= position[1] <= box.max_corner[1] and box.max_corner[2] <= position[2]:
            top = max(top, box.max_corner[2])
    return top


def _containers_below(scene, obj, position):
    for other in sorted(scene.objects, key=lambda o: o.name):
        if other.name == obj.name or 'container' not in other.attributes or 'lid' not in other.part_labels:
            continue
        box = other.bounding_box()
        if box.min_corner[0] <= position[0] <= box.max_corner[0] and \
           box.min_corner[1] <= position[1] <= box.max_corner[1]:
            return other
    return None


def _drop(state, scene, name, trace, arm):
    '''lets a released object fall onto the surface below it'''
    obj = scene.object(name)
    pos = obj.pose.position
    lo = obj.bounding_box().min_corner[2]
    half = pos[2] - lo
    can = _containers_below(scene, obj, pos)
    if can is not None:
        box = can.bounding_box()
        if state.contacts.get('lid_open', {}).get(can.name, False):
            target = box.min_corner[2] + half + 0.005
            trace_detail, event = can.name, 'dropped_in'
        else:
            target = box.max_corner[2] + half
            trace_detail, event = 'lid closed', 'dropped'
    else:
        target = _support_height(scene, obj, pos) + half
        trace_detail, event = '', 'dropped'
    if trace is not None:
        trace.log(event, state.sim_time, arm, trace_detail or name)
    return scene.moved_object(name, Pose([pos[0], pos[1], target], obj.pose.orientation))


def _try_attach(state, scene, model, arm, poses, trace):
    '''closes a gripper on the part or object whose frame is nearest the tool point

    Parts of an object held by the other arm are tried first, against their
    box centers. Free objects attach when the tool point is within
    config.attach_radius of their pose.
    '''
    tool = poses[arm]
    p = tool.position
    other = 'right' if arm == 'left' else 'left'
    held_by_other = state.attached[other][0] if state.attached[other] is not None else None
    radius = config.attach_radius

    if held_by_other is not None and scene.has_object(held_by_other):
        obj = scene.object(held_by_other)
        parts = sorted((np.linalg.norm(box.center() - p), part) for part, box in obj.part_labels.items())
        parts = [d for d in parts if d[0] <= radius]
        if parts:
            state.attached[arm] = (obj.name, parts[0][1])
            state.contacts['twist_reference'] = tool.matrix()
            if trace is not None:
                trace.log('attached', state.sim_time, arm, '%s/%s' %(obj.name, parts[0][1]))
            return
    candidates = sorted((np.linalg.norm(obj.pose.position - p), obj.name) for obj in scene.objects)
    candidates = [c for c in candidates if c[0] <= radius]
    if not candidates:
        if trace is not None:
            trace.log('grasp_empty', state.sim_time, arm, 'nothing within %.3f m' %radius)
        return
    name = candidates[0][1]
    state.attached[arm] = (name, None)
    state.grasp_offsets[arm] = tool.inverse().compose(scene.object(name).pose)
    if trace is not None:
        trace.log('attached', state.sim_time, arm, name)


def _detach_cap(state, scene, container, cap_arm, tool, trace):
    box = container.part_labels['cap']
    center, half = box.center(), box.half_extents()
    parts = {k: v for k, v in container.part_labels.items() if k != 'cap'}
    scene = scene.with_object(replace(container, part_labels=parts))
    cap = SceneObject('%s cap' %container.name, Pose(center), cylinder_shape(max(half[0], half[1]),
                      2.0 * half[2]), {'cap'})
    scene = scene.with_object(cap)
    state.attached[cap_arm] = (cap.name, None)
    state.grasp_offsets[cap_arm] = tool.inverse().compose(cap.pose)
    state.contacts['twist_reference'] = None
    if trace is not None:
        trace.log('cap_removed', state.sim_time, cap_arm, container.name)
    return scene


def kinematic_events(state, scene, model, gains=None, q_d=None, trace=None):
    '''applies attachment, release, pedal and twist events

    Parameters
    ----------
    state : PlantState
        current plant state, gripper changes since the last call are in
        state.pending

    scene : Scene
        scene owned by the simulation

    model : BiArmModel
        robot model

    gains : dict or None
        ComplianceGains per arm, needed for pedal contact forces

    q_d : 1d array or None
        commanded joint positions, defaults to the actual ones

    trace : TrackingTrace or None
        receives the events

    Returns
    -------
    state, scene : PlantState, Scene
        updated copies

    Examples
    --------
    >>> from biarmpy.geometry import test_biarm
    >>> from biarmpy.scene import make_scene, box_shape
    >>> model = test_biarm()
    >>> block = SceneObject('block', Pose([-1.0, 1.1, 0.0]), box_shape([0.04]*3))
    >>> scene = make_scene([block], obstacles=[], regions={}, workspace=model.workspace)
    >>> state = PlantState.initial(model)
    >>> state.gripper['left'] = 'closed'; state.pending.add('left')
    >>> state, scene = kinematic_events(state, scene, model)
    >>> state.attached['left'] is None
    True

    A closing gripper takes an object whose frame lies within the attach
    radius, not one whose box merely surrounds the tool point

    >>> tool = _tool_poses(model, state.q)['left'].position
    >>> def close_on(offset):
    ...     obj = SceneObject('block', Pose(tool + offset), box_shape([0.08]*3))
    ...     sc = make_scene([obj], obstacles=[], regions={}, workspace=model.workspace)
    ...     st = PlantState.initial(model)
    ...     st.gripper['left'] = 'closed'; st.pending.add('left')
    ...     return kinematic_events(st, sc, model)[0].attached['left']
    >>> close_on([0.015, 0.0, 0.0])
    ('block', None)
    >>> close_on([0.03, 0.0, 0.0]) is None
    True
    '''
    state = state.copy()
    poses = _tool_poses(model, state.q)

    #(a) and (b): gripper transitions
    for arm in ARMS:
        if arm not in state.pending:
            continue
        if state.gripper[arm] == 'closed' and state.attached[arm] is None:
            _try_attach(state, scene, model, arm, poses, trace)
        elif state.gripper[arm] == 'open' and state.attached[arm] is not None:
            name, part = state.attached[arm]
            state.attached[arm] = None
            state.grasp_offsets.pop(arm, None)
            if trace is not None:
                trace.log('released', state.sim_time, arm, name if part is None else '%s/%s' %(name, part))
            if part is None and not state.holder_of(name) and scene.has_object(name):
                scene = _drop(state, scene, name, trace, arm)
    state.pending = set()

    #attached objects follow the tool of the arm that carries them
    moved = set()
    for arm in ARMS:
        if state.attached[arm] is None or state.attached[arm][1] is not None:
            continue
        name = state.attached[arm][0]
        if name in moved or arm not in state.grasp_offsets or not scene.has_object(name):
            continue
        scene = scene.moved_object(name, poses[arm].compose(state.grasp_offsets[arm]))
        moved.add(name)

    #(c) pedal pushes
    commanded = poses if q_d is None else _tool_poses(model, q_d)
    lid_open = dict(state.contacts.get('lid_open', {}))
    forces = {}
    for obj in scene.objects:
        pedal = obj.part_labels.get('push pedal')
        if pedal is None:
            continue
        force = 0.0
        for arm in ARMS:
            p = poses[arm].position
            if pedal.point_distance(p) > PEDAL_REACH:
                continue
            depth = pedal.max_corner[2] - commanded[arm].position[2]
            if depth <= 0:
                continue
            kp = gains[arm].kp if gains is not None else config.get_gains('default', model.arm(arm).n_joints)['kp']
            C = cartesian_compliance(model, arm, state.q[model.arm_slice(arm)], kp)
            force = max(force, depth / C[2, 2])
        forces[obj.name] = force
        pressed = force >= config.pedal_force_threshold
        if pressed != lid_open.get(obj.name, False) and trace is not None:
            trace.log('pedal_pressed' if pressed else 'pedal_released', state.sim_time, None,
                      '%s %.2f N' %(obj.name, force))
        lid_open[obj.name] = pressed
    state.contacts['lid_open'] = lid_open
    state.contacts['pedal_force'] = forces

    #(d) twisting a cap off a held container
    for cap_arm in ARMS:
        grip = state.attached[cap_arm]
        if grip is None or grip[1] != 'cap' or not scene.has_object(grip[0]):
            continue
        hold_arm = 'right' if cap_arm == 'left' else 'left'
        if state.attached[hold_arm] != (grip[0], None):
            continue
        container = scene.object(grip[0])
        axis = container.pose.matrix()[:, 2]
        R_now = poses[cap_arm].matrix()
        R_prev = state.contacts.get('twist_reference')
        if R_prev is not None:
            delta = Pose.from_matrix(R_now.dot(R_prev.T), [0, 0, 0]).rotation().as_rotvec()
            progress = dict(state.contacts.get('twist_progress', {}))
            progress[container.name] = progress.get(container.name, 0.0) + float(delta.dot(axis))
            state.contacts['twist_progress'] = progress
            if progress[container.name] >= config.twist_threshold:
                scene = _detach_cap(state, scene, container, cap_arm, poses[cap_arm], trace)
                continue
        state.contacts['twist_reference'] = R_now

    state.contacts['closed_chain'] = bool(
        state.attached['left'] is not None and state.attached['right'] is not None and
        state.attached['left'][0] == state.attached['right'][0])
    return state, scene


def closed_chain_release(state, gains, compliant_arm=None, factor=None):
    '''scales the stiffness of the compliant arm while a closed chain exists

    A closed chain is formed when both arms hold the same rigid body (or the
    body and one of its parts). The compliant arm defaults to the arm that
    carries the whole body.

    Returns
    -------
    gains : dict
        ComplianceGains per arm, unchanged when no chain is closed

    Examples
    --------
    >>> gains = {arm: ComplianceGains.from_profile('default', 2) for arm in ARMS}
    >>> state = PlantState(np.zeros(4), np.zeros(4))
    >>> state.attached['left'] = ('can', None)
    >>> closed_chain_release(state, gains)['left'].kp
    array([400., 400.])
    >>> state.attached['right'] = ('can', None)
    >>> closed_chain_release(state, gains, compliant_arm='left')['left'].kp
    array([80., 80.])
    '''
    factor = config.release_factor if factor is None else factor
    left, right = state.attached['left'], state.attached['right']
    if left is None or right is None or left[0] != right[0]:
        return dict(gains)
    if compliant_arm is None:
        holders = [arm for arm in ARMS if state.attached[arm][1] is None]
        compliant_arm = holders[0] if holders else 'left'
    out = dict(gains)
    out[compliant_arm] = gains[compliant_arm].scaled(factor)
    return out


class Simulation(object):
    '''owns the plant state and a scene copy and executes joint plans

    Parameters
    ----------
    model : BiArmModel
        robot model

    scene : Scene
        initial scene, copied on every change

    q0 : 1d array or None
        initial configuration, the model home configuration by default

    gains : str or dict
        gain profile name for both arms or ComplianceGains per arm

    release : bool
        whether closed-chain force release is active
        default : True
    '''

    def __init__(self, model, scene, q0=None, gains='default', control_dt=None, release=True):
        self.model = model
        self.scene = scene
        self.state = PlantState.initial(model, q0)
        self.control_dt = config.control_dt if control_dt is None else control_dt
        if isinstance(gains, dict):
            self.gains = dict(gains)
        else:
            self.gains = {arm: ComplianceGains.from_profile(gains, model.arm(arm).n_joints)
                          for arm in ARMS}
        self.release = release
        self.compliant_arm = None
        self.trace = TrackingTrace(self.control_dt)
        self.peak_internal_torque = 0.0
        self._limits = (np.concatenate([model.left.lower, model.right.lower]),
                        np.concatenate([model.left.upper, model.right.upper]))

    @property
    def q(self):
        return self.state.q

    def set_gains(self, arm, profile):
        self.gains[arm] = ComplianceGains.from_profile(profile, self.model.arm(arm).n_joints)

    def tool_pose(self, arm):
        return forward_kinematics(self.model.arm(arm), self.state.q[self.model.arm_slice(arm)])

    def active_gains(self):
        if self.release and self.state.contacts.get('closed_chain', False):
            return closed_chain_release(self.state, self.gains, self.compliant_arm)
        return self.gains

    def set_gripper(self, arm, closed):
        '''commands a gripper, attach and release happen in the next event pass

        Returns the (object, part) now carried by the arm or None.
        '''
        other = 'right' if arm == 'left' else 'left'
        before = self.state.attached[other]
        self.state.gripper[arm] = 'closed' if closed else 'open'
        self.state.pending.add(arm)
        self.trace.log('gripper_closed' if closed else 'gripper_opened', self.state.sim_time, arm)
        self.state, self.scene = kinematic_events(self.state, self.scene, self.model, self.gains,
                                                  trace=self.trace)
        if self.state.contacts.get('closed_chain') and closed:
            #the arm already holding the body becomes the compliant one
            self.compliant_arm = other if before is not None else arm
            self._chain_formed(arm)
        elif not self.state.contacts.get('closed_chain'):
            self.compliant_arm = None
        return self.state.attached[arm]

    def _chain_formed(self, grasping_arm):
        '''imposes the centring displacement of the grasping fingers on the held body'''
        holder = self.compliant_arm
        name = self.state.attached[grasping_arm][0]
        if holder == grasping_arm or not self.scene.has_object(name):
            return
        tool = self.tool_pose(grasping_arm)
        closing = tool.matrix()[:, 1]
        offset = self.scene.object(name).pose.position - tool.position
        delta = -closing * offset.dot(closing)
        kp = self.active_gains()[holder].kp
        tau = internal_torque(self.model, self.state, holder, kp, delta)
        peak = float(np.max(np.abs(tau))) if len(tau) else 0.0
        self.peak_internal_torque = max(self.peak_internal_torque, peak)
        self.trace.log('closed_chain', self.state.sim_time, holder, 'internal torque %.4f N*m' %peak)

    def release_object(self, arm):
        if self.state.attached[arm] is None:
            raise SkillPreconditionError('%s-arm holds nothing to release' %arm)
        return self.set_gripper(arm, False)

    def execute(self, q_traj, plan_dt=None, hold_steps=0):
        '''tracks a knot trajectory with the compliant controller

        Returns
        -------
        stats : dict
            'max_tracking_error' (rad), 'peak_torque' (N*m) and 'n_steps'
        '''
        q_d, qdot_d, qddot_d = smooth_reference(q_traj, plan_dt, self.control_dt)
        if hold_steps:
            q_d = np.vstack([q_d, np.repeat(q_d[-1:], hold_steps, axis=0)])
            qdot_d = np.vstack([qdot_d, np.zeros((hold_steps, qdot_d.shape[1]))])
            qddot_d = np.vstack([qddot_d, np.zeros((hold_steps, qddot_d.shape[1]))])
        peak = 0.0
        error = 0.0
        for k in range(len(q_d)):
            gains = self.active_gains()
            kp = np.concatenate([gains['left'].kp, gains['right'].kp])
            kd = np.concatenate([gains['left'].kd, gains['right'].kd])
            tau = control_step(self.state, q_d[k], qdot_d[k], qddot_d[k], ComplianceGains(kp, kd))
            peak = max(peak, float(np.max(np.abs(tau))))
            self.state = step_plant(self.state, tau, self.control_dt, self._limits)
            if self._needs_events():
                self.state, self.scene = kinematic_events(self.state, self.scene, self.model, gains,
                                                          q_d[k], self.trace)
            error = max(error, float(np.max(np.abs(q_d[k] - self.state.q))))
            self.trace.append(q_d[k], self.state.q, tau, self.state.external_torques)
        if peak > config.torque_limit:
            warnings.warn('commanded torque %.1f N*m exceeds the limit of %.1f N*m'
                          %(peak, config.torque_limit), TorqueLimitWarning)
        self.trace.log('executed', self.state.sim_time, None, '%i steps' %len(q_d))
        return {'max_tracking_error': error, 'peak_torque': peak, 'n_steps': len(q_d)}

    def _needs_events(self):
        if any(self.state.attached[arm] is not None for arm in ARMS):
            return True
        return any('push pedal' in obj.part_labels for obj in self.scene.objects)
