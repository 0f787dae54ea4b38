'''
rigid-body math, serial-chain kinematics and sphere geometry

Poses use a position in meters and a unit quaternion stored (w, x, y, z).
Arms are axis-offset chains: the frame of link i is reached from the frame
of link i-1 by the fixed joint origin transform followed by a rotation of
q[i] about the joint axis. Link index -1 denotes the arm base.
'''

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

__all__ = ['Pose',
           'Aabb',
           'Joint',
           'CollisionSphere',
           'ArmModel',
           'BiArmModel',
           'test_arm',
           'test_biarm',
           'forward_kinematics',
           'sphere_centers',
           'ee_jacobian',
           'sphere_point_jacobian',
           'arm_kinematics',
           'signed_distance_sphere_aabb',
           'sphere_aabb_gradient',
           'sphere_aabb_distances',
           'distance_sphere_sphere',
           'orientation_error',
           'rotation_error_vector',
           'grasp_orientation',
           'arm_from_dict',
           'arm_to_dict',
           'biarm_from_dict',
           'biarm_to_dict']


def _as_rotation(quat):
    #scipy stores quaternions scalar-last
    return Rotation.from_quat(np.roll(quat, -1))


def _as_wxyz(rotation):
    return np.roll(rotation.as_quat(), 1)


class Pose(object):
    '''rigid-body transform: position plus unit quaternion (w, x, y, z)

    Examples
    --------
    >>> p = Pose([1.0, 0.0, 0.0], [np.cos(np.pi/4), 0, 0, np.sin(np.pi/4)])
    >>> p.transform_point([1.0, 0.0, 0.0]).round(9)
    array([1., 1., 0.])

    Composing a pose with its inverse gives the identity

    >>> ident = p.compose(p.inverse())
    >>> bool(np.linalg.norm(ident.position) < 1e-9)
    True
    >>> bool(orientation_error(ident.orientation, [1, 0, 0, 0]) < 1e-9)
    True
    '''
    __slots__ = ('position', 'orientation')

    def __init__(self, position=(0.0, 0.0, 0.0), orientation=(1.0, 0.0, 0.0, 0.0)):
        position = np.asarray(position, dtype=np.float64).reshape(3)
        orientation = np.asarray(orientation, dtype=np.float64).reshape(4)
        norm = np.linalg.norm(orientation)
        if not np.isfinite(norm) or norm == 0.0:
            raise ValueError('pose orientation needs to be a non-zero finite quaternion')
        if not np.all(np.isfinite(position)):
            raise ValueError('pose position needs to be finite')
        self.position = position
        self.orientation = orientation / norm

    @classmethod
    def from_matrix(cls, rotation_matrix, position):
        return cls(position, _as_wxyz(Rotation.from_matrix(rotation_matrix)))

    @classmethod
    def from_rotvec(cls, rotvec, position=(0.0, 0.0, 0.0)):
        return cls(position, _as_wxyz(Rotation.from_rotvec(rotvec)))

    def rotation(self):
        return _as_rotation(self.orientation)

    def matrix(self):
        return self.rotation().as_matrix()

    def homogeneous(self):
        T = np.eye(4)
        T[:3, :3] = self.matrix()
        T[:3, 3] = self.position
        return T

    def compose(self, other):
        rot = self.rotation()
        return Pose(self.position + rot.apply(other.position),
                    _as_wxyz(rot * other.rotation()))

    def inverse(self):
        inv = self.rotation().inv()
        return Pose(-inv.apply(self.position), _as_wxyz(inv))

    def transform_point(self, points):
        return self.rotation().apply(points) + self.position

    def translated(self, offset):
        return Pose(self.position + np.asarray(offset, dtype=np.float64), self.orientation)

    def as_list(self):
        return [float(x) for x in self.position] + [float(x) for x in self.orientation]

    def __repr__(self):
        return 'Pose(position=%s, orientation=%s)' %(np.round(self.position, 4).tolist(),
                                                     np.round(self.orientation, 4).tolist())


class Aabb(object):
    '''axis-aligned bounding box

    Examples
    --------
    >>> box = Aabb([-0.1, -0.1, -0.1], [0.1, 0.1, 0.1])
    >>> box.center()
    array([0., 0., 0.])
    >>> box.contains([0.1, 0.0, 0.0])
    True
    >>> box.dilate(0.05).max_corner
    array([0.15, 0.15, 0.15])
    >>> Aabb([0, 0, 0], [-1, 1, 1])
    Traceback (most recent call last):
        ...
    ValueError: Aabb min_corner needs to be <= max_corner componentwise
    '''
    __slots__ = ('min_corner', 'max_corner')

    def __init__(self, min_corner, max_corner):
        self.min_corner = np.asarray(min_corner, dtype=np.float64).reshape(3)
        self.max_corner = np.asarray(max_corner, dtype=np.float64).reshape(3)
        if np.any(self.min_corner > self.max_corner):
            raise ValueError('Aabb min_corner needs to be <= max_corner componentwise')

    @classmethod
    def from_points(cls, points):
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return cls(points.min(axis=0), points.max(axis=0))

    @classmethod
    def from_center(cls, center, half_extents):
        center = np.asarray(center, dtype=np.float64)
        half_extents = np.asarray(half_extents, dtype=np.float64)
        return cls(center - half_extents, center + half_extents)

    def center(self):
        return 0.5 * (self.min_corner + self.max_corner)

    def half_extents(self):
        return 0.5 * (self.max_corner - self.min_corner)

    def contains(self, point, margin=0.0):
        point = np.asarray(point, dtype=np.float64)
        return bool(np.all(point >= self.min_corner - margin) and
                    np.all(point <= self.max_corner + margin))

    def contains_box(self, other, margin=0.0):
        return bool(np.all(other.min_corner >= self.min_corner - margin) and
                    np.all(other.max_corner <= self.max_corner + margin))

    def intersects(self, other, margin=0.0):
        return bool(np.all(self.min_corner - margin <= other.max_corner) and
                    np.all(other.min_corner <= self.max_corner + margin))

    def dilate(self, margin):
        return Aabb(self.min_corner - margin, self.max_corner + margin)

    def point_distance(self, point):
        point = np.asarray(point, dtype=np.float64)
        return float(np.linalg.norm(point - np.clip(point, self.min_corner, self.max_corner)))

    def as_dict(self):
        return {'min': self.min_corner.tolist(), 'max': self.max_corner.tolist()}

    def __repr__(self):
        return 'Aabb(%s, %s)' %(np.round(self.min_corner, 4).tolist(),
                                np.round(self.max_corner, 4).tolist())


@dataclass(eq=False)
class Joint:
    '''revolute joint: unit axis in the joint frame, fixed origin transform
    from the previous link frame, position limits (rad) and velocity limit (rad/s)'''
    axis: np.ndarray
    origin: Pose
    lower: float
    upper: float
    vel_limit: float
    _origin_matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.axis = np.asarray(self.axis, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(self.axis)
        if norm == 0.0:
            raise ValueError('joint axis needs to be non-zero')
        self.axis = self.axis / norm
        if not self.lower < self.upper:
            raise ValueError('joint limits need lower < upper, got [%s, %s]' %(self.lower, self.upper))
        if not self.vel_limit > 0:
            raise ValueError('joint velocity limit needs to be > 0, got %s' %self.vel_limit)
        self._origin_matrix = self.origin.matrix()


@dataclass(eq=False)
class CollisionSphere:
    '''collision sphere rigidly attached to a link (-1 is the base)'''
    link_index: int
    offset: np.ndarray
    radius: float

    def __post_init__(self):
        self.offset = np.asarray(self.offset, dtype=np.float64).reshape(3)
        if not self.radius > 0:
            raise ValueError('collision sphere radius needs to be > 0, got %s' %self.radius)


@dataclass(eq=False)
class ArmModel:
    '''serial kinematic chain with joint limits and collision spheres'''
    base_pose: Pose
    joints: list
    collision_spheres: list
    ee_offset: Pose
    name: str = 'arm'

    def __post_init__(self):
        if len(self.joints) == 0:
            raise ValueError('an arm needs at least one joint')
        for sphere in self.collision_spheres:
            if not -1 <= sphere.link_index < len(self.joints):
                raise ValueError('collision sphere link_index %i out of range for %i joints'
                                 %(sphere.link_index, len(self.joints)))
        self._ee_matrix = self.ee_offset.matrix()

    @property
    def n_joints(self):
        return len(self.joints)

    @property
    def lower(self):
        return np.array([j.lower for j in self.joints])

    @property
    def upper(self):
        return np.array([j.upper for j in self.joints])

    @property
    def vel_limits(self):
        return np.array([j.vel_limit for j in self.joints])

    @property
    def radii(self):
        return np.array([s.radius for s in self.collision_spheres])

    def with_extra_sphere(self, sphere):
        '''returns a copy of the arm carrying one more collision sphere'''
        return ArmModel(self.base_pose, self.joints, list(self.collision_spheres) + [sphere],
                        self.ee_offset, self.name)


@dataclass(eq=False)
class BiArmModel:
    '''two arms sharing one workspace box'''
    left: ArmModel
    right: ArmModel
    workspace: Aabb
    home: dict = field(default_factory=dict)

    def __post_init__(self):
        for arm in (self.left, self.right):
            if not self.workspace.contains(arm.base_pose.position, margin=1e-12):
                raise ValueError('base of arm "%s" lies outside the workspace box' %arm.name)

    def arm(self, arm_id):
        if arm_id in ('left', 'left-arm'):
            return self.left
        elif arm_id in ('right', 'right-arm'):
            return self.right
        raise LookupError('unknown arm id "%s", use "left-arm" or "right-arm"' %arm_id)

    @property
    def n_joints(self):
        return self.left.n_joints + self.right.n_joints

    def split(self, q):
        '''splits a combined joint vector into (q_left, q_right)'''
        q = np.asarray(q, dtype=np.float64)
        return q[..., :self.left.n_joints], q[..., self.left.n_joints:]

    def arm_slice(self, arm_id):
        if arm_id in ('left', 'left-arm'):
            return slice(0, self.left.n_joints)
        return slice(self.left.n_joints, self.n_joints)

    def home_configuration(self):
        n_l, n_r = self.left.n_joints, self.right.n_joints
        q_l = np.asarray(self.home.get('left', np.zeros(n_l)), dtype=np.float64)
        q_r = np.asarray(self.home.get('right', np.zeros(n_r)), dtype=np.float64)
        return np.concatenate([q_l, q_r])


def test_arm():
    '''returns the documented 2-DoF planar test arm

    Two revolute joints about Z with link lengths 0.5 m, base at the origin.
    Collision spheres: one at the link-0 origin (r=0.05) and one at the tool
    point (r=0.05).

    Examples
    --------
    >>> arm = test_arm()
    >>> arm.n_joints
    2
    '''
    joints = [Joint([0, 0, 1], Pose(), -np.pi, np.pi, 2.0),
              Joint([0, 0, 1], Pose([0.5, 0, 0]), -np.pi, np.pi, 2.0)]
    spheres = [CollisionSphere(0, [0, 0, 0], 0.05),
               CollisionSphere(1, [0.5, 0, 0], 0.05)]
    return ArmModel(Pose(), joints, spheres, Pose([0.5, 0, 0]), name='test')


def test_biarm():
    '''two planar test arms facing each other in the z=0 plane

    Bases sit at x = -1 (left) and x = +1 (right), the home configuration
    points both arms along +y.

    Examples
    --------
    >>> model = test_biarm()
    >>> forward_kinematics(model.left, [np.pi/2, 0]).position.round(9)
    array([-1.,  1.,  0.])
    '''
    arms = []
    for name, x in (('left-arm', -1.0), ('right-arm', 1.0)):
        arm = test_arm()
        arm.base_pose = Pose([x, 0.0, 0.0])
        arm.name = name
        arms.append(arm)
    home = {'left': np.array([np.pi / 2, 0.0]), 'right': np.array([np.pi / 2, 0.0])}
    return BiArmModel(arms[0], arms[1], Aabb([-2.5, -2.5, -0.5], [2.5, 2.5, 0.5]), home)


def _check_q(arm, q):
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    if len(q) != arm.n_joints:
        raise ValueError('dimension mismatch: arm "%s" has %i joints, got q of length %i'
                         %(arm.name, arm.n_joints, len(q)))
    return q


def _chain(arm, q):
    '''returns joint origins, world joint axes and link rotations'''
    n = arm.n_joints
    origins = np.empty((n, 3))
    axes = np.empty((n, 3))
    rotations = np.empty((n, 3, 3))
    local_axes = np.array([j.axis for j in arm.joints])
    joint_rots = Rotation.from_rotvec(local_axes * q[:, None]).as_matrix()

    R = arm.base_pose.matrix()
    p = arm.base_pose.position.copy()
    for i, joint in enumerate(arm.joints):
        p = p + R.dot(joint.origin.position)
        R = R.dot(joint._origin_matrix)
        axes[i] = R.dot(joint.axis)
        origins[i] = p
        R = R.dot(joint_rots[i])
        rotations[i] = R
    return origins, axes, rotations


def _link_frame(arm, origins, rotations, link_index):
    if link_index < 0:
        return arm.base_pose.position, arm.base_pose.matrix()
    return origins[link_index], rotations[link_index]


def _point_jacobian(origins, axes, point, link_index):
    n = len(origins)
    J = np.zeros((3, n))
    k = link_index + 1
    if k > 0:
        J[:, :k] = np.cross(axes[:k], point - origins[:k]).T
    return J


def forward_kinematics(arm, q):
    '''computes the end-effector pose

    Parameters
    ----------
    arm : ArmModel
        the kinematic chain

    q : 1d array or list
        joint positions in radians, one per joint

    Returns
    -------
    pose : Pose
        tool frame pose in the workspace frame

    Examples
    --------
    >>> arm = test_arm()
    >>> forward_kinematics(arm, [0, 0]).position.round(9)
    array([1., 0., 0.])
    >>> forward_kinematics(arm, [np.pi/2, 0]).position.round(9)
    array([0., 1., 0.])
    >>> forward_kinematics(arm, [np.pi/2, -np.pi/2]).position.round(9)
    array([0.5, 0.5, 0. ])

    A wrong number of joint values is rejected

    >>> forward_kinematics(arm, [0.0])
    Traceback (most recent call last):
        ...
    ValueError: dimension mismatch: arm "test" has 2 joints, got q of length 1
    '''
    q = _check_q(arm, q)
    origins, axes, rotations = _chain(arm, q)
    R = rotations[-1]
    return Pose.from_matrix(R.dot(arm._ee_matrix), origins[-1] + R.dot(arm.ee_offset.position))


def sphere_centers(arm, q):
    '''computes collision sphere centers in the workspace frame

    Returns
    -------
    spheres : list
        one (center, radius) tuple per collision sphere

    Examples
    --------
    >>> arm = test_arm()
    >>> [c.round(9).tolist() for c, r in sphere_centers(arm, [0, 0])]
    [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]

    Centers agree with a chain of homogeneous transforms

    >>> def rz(a, x):
    ...     T = np.eye(4)
    ...     T[:2, :2] = [[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]]
    ...     T[0, 3] = x
    ...     return T
    >>> q = [0.3, -1.1]
    >>> oracle = (rz(q[0], 0.0) @ rz(q[1], 0.5) @ [0.5, 0, 0, 1])[:3]
    >>> bool(np.allclose(sphere_centers(arm, q)[1][0], oracle, atol=1e-9))
    True
    '''
    q = _check_q(arm, q)
    origins, axes, rotations = _chain(arm, q)
    out = []
    for sphere in arm.collision_spheres:
        p, R = _link_frame(arm, origins, rotations, sphere.link_index)
        out.append((p + R.dot(sphere.offset), sphere.radius))
    return out


def ee_jacobian(arm, q):
    '''analytic geometric Jacobian of the end-effector

    Returns
    -------
    J : 6 x n array
        rows 0-2 map joint velocities to linear velocity of the tool point,
        rows 3-5 to angular velocity, both in the workspace frame.

    Examples
    --------
    >>> arm = test_arm()
    >>> J = ee_jacobian(arm, [0, 0])
    >>> float(J[1, 0])
    1.0

    Analytic and central finite difference Jacobians agree

    >>> q = np.array([0.4, 0.9])
    >>> h = 1e-6
    >>> fd = np.array([(forward_kinematics(arm, q + h*e).position -
    ...                 forward_kinematics(arm, q - h*e).position) / (2*h) for e in np.eye(2)]).T
    >>> bool(np.max(np.abs(ee_jacobian(arm, q)[:3] - fd)) < 1e-5)
    True

    For a single joint the angular part is the joint axis

    >>> single = ArmModel(Pose(), [Joint([0, 1, 0], Pose(), -1, 1, 1)], [], Pose([0.2, 0, 0]))
    >>> ee_jacobian(single, [0.3])[3:, 0]
    array([0., 1., 0.])
    '''
    q = _check_q(arm, q)
    origins, axes, rotations = _chain(arm, q)
    p_ee = origins[-1] + rotations[-1].dot(arm.ee_offset.position)
    J = np.zeros((6, arm.n_joints))
    J[:3] = _point_jacobian(origins, axes, p_ee, arm.n_joints - 1)
    J[3:] = axes.T
    return J


def sphere_point_jacobian(arm, q, sphere_index):
    '''Jacobian of a collision sphere center (3 x n)

    Examples
    --------
    >>> arm = test_arm()
    >>> base_arm = arm.with_extra_sphere(CollisionSphere(-1, [0.1, 0, 0], 0.05))
    >>> bool(np.all(sphere_point_jacobian(base_arm, [0.2, 0.3], 2) == 0))
    True

    A sphere on the tool point has the linear rows of the end-effector Jacobian

    >>> q = [0.7, -0.2]
    >>> bool(np.allclose(sphere_point_jacobian(arm, q, 1), ee_jacobian(arm, q)[:3]))
    True
    '''
    q = _check_q(arm, q)
    sphere = arm.collision_spheres[sphere_index]
    origins, axes, rotations = _chain(arm, q)
    p, R = _link_frame(arm, origins, rotations, sphere.link_index)
    return _point_jacobian(origins, axes, p + R.dot(sphere.offset), sphere.link_index)


def arm_kinematics(arm, q):
    '''computes everything the planner needs at one configuration

    Evaluates the chain once and returns a dict with the tool 'pose',
    'ee_jacobian' (6 x n), sphere 'centers' (S x 3), 'radii' (S,)
    and 'sphere_jacobians' (S x 3 x n).

    Examples
    --------
    >>> kin = arm_kinematics(test_arm(), [0.0, 0.0])
    >>> kin['centers'].shape, kin['sphere_jacobians'].shape
    ((2, 3), (2, 3, 2))
    '''
    q = _check_q(arm, q)
    origins, axes, rotations = _chain(arm, q)
    R = rotations[-1]
    p_ee = origins[-1] + R.dot(arm.ee_offset.position)
    J = np.zeros((6, arm.n_joints))
    J[:3] = _point_jacobian(origins, axes, p_ee, arm.n_joints - 1)
    J[3:] = axes.T

    n_s = len(arm.collision_spheres)
    centers = np.empty((n_s, 3))
    jacobians = np.empty((n_s, 3, arm.n_joints))
    for i, sphere in enumerate(arm.collision_spheres):
        p, Rl = _link_frame(arm, origins, rotations, sphere.link_index)
        centers[i] = p + Rl.dot(sphere.offset)
        jacobians[i] = _point_jacobian(origins, axes, centers[i], sphere.link_index)

    return {'pose': Pose.from_matrix(R.dot(arm._ee_matrix), p_ee),
            'ee_jacobian': J,
            'centers': centers,
            'radii': arm.radii,
            'sphere_jacobians': jacobians}


def signed_distance_sphere_aabb(center, radius, box):
    '''signed distance from a sphere surface to a box

    Positive values mean separation, negative values penetration.

    Examples
    --------
    >>> box = Aabb([-0.1]*3, [0.1]*3)
    >>> round(signed_distance_sphere_aabb([0.5, 0, 0], 0.1, box), 9)
    0.3
    >>> signed_distance_sphere_aabb([0, 0, 0], 0.1, box) < 0
    True
    >>> round(signed_distance_sphere_aabb([0.2, 0.2, 0.2], 0.05, box), 4)
    0.1232
    '''
    center = np.asarray(center, dtype=np.float64)
    nearest = np.clip(center, box.min_corner, box.max_corner)
    outside = np.linalg.norm(center - nearest)
    if outside > 0.0:
        return float(outside - radius)
    depth = np.min(np.concatenate([center - box.min_corner, box.max_corner - center]))
    return float(-depth - radius)


def sphere_aabb_gradient(center, box):
    '''gradient of signed_distance_sphere_aabb with respect to the center

    At non-smooth points (box faces, edges, corners and the medial set
    inside the box) the first candidate in x, y, z order is used.

    Examples
    --------
    >>> box = Aabb([-0.1]*3, [0.1]*3)
    >>> sphere_aabb_gradient([0.5, 0, 0], box)
    array([1., 0., 0.])
    >>> sphere_aabb_gradient([0.0, 0, 0], box)
    array([-1.,  0.,  0.])
    '''
    center = np.asarray(center, dtype=np.float64)
    diff = center - np.clip(center, box.min_corner, box.max_corner)
    norm = np.linalg.norm(diff)
    if norm > 0.0:
        return diff / norm
    depths = np.concatenate([center - box.min_corner, box.max_corner - center])
    k = int(np.argmin(depths))
    grad = np.zeros(3)
    grad[k % 3] = -1.0 if k < 3 else 1.0
    return grad


#outward face normals in the order of the stacked depths (lower faces first)
_FACE_NORMALS = np.array([[-1.0, 0, 0], [0, -1.0, 0], [0, 0, -1.0],
                          [1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]])


def sphere_aabb_distances(centers, radii, boxes):
    '''signed distances and gradients between S spheres and O boxes

    Vectorized version of signed_distance_sphere_aabb and
    sphere_aabb_gradient with the same tie rules.

    Returns
    -------
    distances : S x O array

    gradients : S x O x 3 array
        derivative of each distance with respect to the sphere center

    Examples
    --------
    >>> box = Aabb([-0.1]*3, [0.1]*3)
    >>> d, grad = sphere_aabb_distances([[0.5, 0, 0], [0.2, 0.2, 0.2]], [0.1, 0.05], [box])
    >>> d.round(4)
    array([[0.3   ],
           [0.1232]])
    '''
    centers = np.asarray(centers, dtype=np.float64).reshape(-1, 3)
    radii = np.asarray(radii, dtype=np.float64).reshape(-1)
    if len(boxes) == 0:
        return np.zeros((len(centers), 0)), np.zeros((len(centers), 0, 3))
    lows = np.array([b.min_corner for b in boxes])
    highs = np.array([b.max_corner for b in boxes])
    c = centers[:, None, :]
    diff = c - np.clip(c, lows[None], highs[None])
    outside = np.linalg.norm(diff, axis=2)
    depths = np.concatenate([c - lows[None], highs[None] - c], axis=2)
    face = np.argmin(depths, axis=2)
    depth = np.min(depths, axis=2)
    is_out = outside > 0.0
    dist = np.where(is_out, outside, -depth) - radii[:, None]
    safe = np.where(is_out, outside, 1.0)[..., None]
    grad = np.where(is_out[..., None], diff / safe, _FACE_NORMALS[face])
    return dist, grad


def distance_sphere_sphere(c1, r1, c2, r2):
    '''signed distance between two sphere surfaces

    Examples
    --------
    >>> round(distance_sphere_sphere([0, 0, 0], 0.1, [1, 0, 0], 0.1), 9)
    0.8
    >>> round(distance_sphere_sphere([0, 0, 0], 0.1, [0, 0, 0], 0.1), 9)
    -0.2
    '''
    return float(np.linalg.norm(np.asarray(c1, dtype=np.float64) -
                                np.asarray(c2, dtype=np.float64)) - r1 - r2)


def orientation_error(q_goal, q_actual):
    '''geodesic angle between two unit quaternions (rad)

    Examples
    --------
    >>> q = [np.cos(0.25), 0, 0, np.sin(0.25)]
    >>> round(orientation_error([1, 0, 0, 0], q), 9)
    0.5

    q and -q describe the same rotation

    >>> round(orientation_error(q, -np.asarray(q)), 9)
    0.0
    '''
    q_goal = np.asarray(q_goal, dtype=np.float64)
    q_actual = np.asarray(q_actual, dtype=np.float64)
    dot = abs(np.dot(q_goal / np.linalg.norm(q_goal), q_actual / np.linalg.norm(q_actual)))
    return float(2.0 * np.arccos(min(dot, 1.0)))


def rotation_error_vector(q_goal, q_actual):
    '''rotation vector (workspace frame) taking the actual to the goal orientation

    Its norm equals orientation_error(q_goal, q_actual).
    '''
    return (_as_rotation(q_goal) * _as_rotation(q_actual).inv()).as_rotvec()


def grasp_orientation(approach, closing_hint=(0.0, 1.0, 0.0), roll=0.0):
    '''builds a tool orientation from an approach direction

    The tool z-axis points along the approach direction, the tool y-axis
    (the line the fingers close along) is the component of closing_hint
    orthogonal to the approach, rotated by roll about the approach.

    Examples
    --------
    >>> q = grasp_orientation([0, 0, -1], closing_hint=[0, 1, 0])
    >>> R = Pose(orientation=q).matrix()
    >>> R[:, 2].round(9).tolist(), R[:, 1].round(9).tolist()
    ([0.0, 0.0, -1.0], [0.0, 1.0, 0.0])
    '''
    z = np.asarray(approach, dtype=np.float64)
    z = z / np.linalg.norm(z)
    hint = np.asarray(closing_hint, dtype=np.float64)
    y = hint - np.dot(hint, z) * z
    if np.linalg.norm(y) < 1e-6:
        #hint parallel to approach, pick any perpendicular
        fallback = np.array([1.0, 0.0, 0.0]) if abs(z[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        y = fallback - np.dot(fallback, z) * z
    y = y / np.linalg.norm(y)
    x = np.cross(y, z)
    R = np.column_stack([x, y, z])
    if roll != 0.0:
        R = Rotation.from_rotvec(z * roll).as_matrix().dot(R)
    return _as_wxyz(Rotation.from_matrix(R))


def _pose_from_dict(d):
    if d is None:
        return Pose()
    return Pose(d.get('position', [0, 0, 0]), d.get('orientation', [1, 0, 0, 0]))


def _pose_to_dict(pose):
    return {'position': pose.position.tolist(), 'orientation': pose.orientation.tolist()}


def arm_from_dict(d, name='arm'):
    '''builds an ArmModel from its JSON representation'''
    joints = [Joint(j['axis'], _pose_from_dict(j.get('origin_offset')), j['pos_limits'][0],
                    j['pos_limits'][1], j['vel_limit']) for j in d['joints']]
    spheres = [CollisionSphere(s['link_index'], s['local_offset'], s['radius'])
               for s in d.get('collision_spheres', [])]
    return ArmModel(_pose_from_dict(d['base_pose']), joints, spheres,
                    _pose_from_dict(d.get('ee_offset')), name=d.get('name', name))


def arm_to_dict(arm):
    return {'name': arm.name,
            'base_pose': _pose_to_dict(arm.base_pose),
            'joints': [{'axis': j.axis.tolist(),
                        'origin_offset': _pose_to_dict(j.origin),
                        'pos_limits': [j.lower, j.upper],
                        'vel_limit': j.vel_limit} for j in arm.joints],
            'collision_spheres': [{'link_index': s.link_index,
                                   'local_offset': s.offset.tolist(),
                                   'radius': s.radius} for s in arm.collision_spheres],
            'ee_offset': _pose_to_dict(arm.ee_offset)}


def biarm_from_dict(d):
    '''builds a BiArmModel from its JSON representation (schema_version 1)

    Examples
    --------
    >>> d = {'left': arm_to_dict(test_arm()), 'right': arm_to_dict(test_arm()),
    ...      'workspace': {'min': [-1, -1, -1], 'max': [1, 1, 1]}}
    >>> model = biarm_from_dict(d)
    >>> model.n_joints
    4
    '''
    workspace = Aabb(d['workspace']['min'], d['workspace']['max'])
    home = {k: np.asarray(v, dtype=np.float64) for k, v in d.get('home', {}).items()}
    return BiArmModel(arm_from_dict(d['left'], 'left-arm'), arm_from_dict(d['right'], 'right-arm'),
                      workspace, home)


def biarm_to_dict(model):
    return {'schema_version': 1,
            'workspace': model.workspace.as_dict(),
            'left': arm_to_dict(model.left),
            'right': arm_to_dict(model.right),
            'home': {k: np.asarray(v).tolist() for k, v in model.home.items()}}
