'''
grasp pose generation from object point clouds

Contains the mean-of-cloud heuristic, a small point cloud transformer
evaluated with numpy, the evolution-strategies trainer and the synthetic
grasp environment it is trained on.
'''

from dataclasses import dataclass
import time

import numpy as np

from .geometry import Pose, grasp_orientation
from .scene import SceneObject, PointCloud, box_shape, cylinder_shape, sample_point_cloud

__all__ = ['GraspObservation',
           'GraspAction',
           'make_observation',
           'heuristic_grasp',
           'PctWeights',
           'pct_descriptor',
           'init_weights',
           'zero_weights',
           'pct_forward',
           'EsConfig',
           'es_train',
           'grasp_objects',
           'score_grasp',
           'grasp_env_rollout',
           'GraspEnv',
           'random_policy_baseline']

OFFSET_RANGE = 0.05
ROLL_RANGE = np.pi / 2
DEFAULT_APPROACH = np.array([0.0, 0.0, -1.0])
GRASP_RADIUS = 0.025
APPROACH_TOLERANCE = np.pi / 4
ENV_POINTS = 128


@dataclass(eq=False)
class GraspObservation:
    '''mean-shifted object cloud, its pre-shift mean and major axis'''
    cloud: PointCloud
    cloud_mean: np.ndarray
    major_axis: np.ndarray


@dataclass(eq=False)
class GraspAction:
    '''grasp relative to the object cloud mean

    fingertip_offset is relative to the cloud mean (m), approach_dir is a unit
    vector in the workspace frame and roll_angle rotates the closing line
    about it (rad).
    '''
    fingertip_offset: np.ndarray
    approach_dir: np.ndarray
    roll_angle: float

    @classmethod
    def from_normalized(cls, a):
        '''de-normalizes a 7-vector in [-1, 1] into the configured ranges

        >>> act = GraspAction.from_normalized(np.zeros(7))
        >>> act.fingertip_offset.tolist(), act.approach_dir.tolist(), act.roll_angle
        ([0.0, 0.0, 0.0], [0.0, 0.0, -1.0], 0.0)
        '''
        a = np.clip(np.asarray(a, dtype=np.float64).reshape(7), -1.0, 1.0)
        approach = a[3:6]
        norm = np.linalg.norm(approach)
        approach = DEFAULT_APPROACH.copy() if norm < 1e-9 else approach / norm
        return cls(a[:3] * OFFSET_RANGE, approach, float(a[6] * ROLL_RANGE))

    def fingertip(self, obs):
        return obs.cloud_mean + self.fingertip_offset

    def grasp_pose(self, obs):
        '''tool pose of the grasp in the workspace frame'''
        return Pose(self.fingertip(obs), grasp_orientation(self.approach_dir, roll=self.roll_angle))


def make_observation(cloud):
    '''builds a grasp observation from a segmented object cloud

    Examples
    --------
    >>> pts = np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [4.0, 0.04, 0.0], [6.0, 0.0, 0.0]])
    >>> obs = make_observation(PointCloud(pts))
    >>> obs.cloud_mean.round(3).tolist()
    [3.0, 0.01, 0.0]
    >>> bool(obs.major_axis[0] > 0.99)
    True
    >>> bool(np.abs(obs.cloud.mean()).max() < 1e-9)
    True
    '''
    if not isinstance(cloud, PointCloud):
        cloud = PointCloud(cloud)
    mean = cloud.mean()
    shifted = cloud.points - mean
    if len(shifted) < 2:
        axis = np.array([1.0, 0.0, 0.0])
    else:
        cov = shifted.T.dot(shifted) / len(shifted)
        axis = np.linalg.eigh(cov)[1][:, -1]
        #sign convention: largest component positive
        if axis[np.argmax(np.abs(axis))] < 0:
            axis = -axis
        axis = axis / np.linalg.norm(axis)
    return GraspObservation(PointCloud(shifted), mean, axis)


def _base_closing(approach):
    return Pose(orientation=grasp_orientation(approach)).matrix()[:, 1]


def heuristic_grasp(obs, approach=DEFAULT_APPROACH):
    '''grasp at the cloud mean from a preset approach direction

    The closing line is turned perpendicular to the major axis. When the
    major axis is (nearly) parallel to the approach the roll stays at zero.

    Examples
    --------
    >>> from biarmpy.scene import SceneObject, box_shape, sample_point_cloud
    >>> stick = SceneObject('stick', Pose([0.1, 0.5, 0.02]), box_shape([0.2, 0.03, 0.03]))
    >>> obs = make_observation(sample_point_cloud(stick, 500, seed=1))
    >>> act = heuristic_grasp(obs, [0, 0, -1])
    >>> act.approach_dir.tolist(), act.fingertip_offset.tolist()
    ([0.0, 0.0, -1.0], [0.0, 0.0, 0.0])
    >>> closing = act.grasp_pose(obs).matrix()[:, 1]
    >>> '%.2f' %abs(closing[1])
    '1.00'

    Side approach for holding a container from the left

    >>> heuristic_grasp(obs, [1, 0, 0]).approach_dir.tolist()
    [1.0, 0.0, 0.0]
    '''
    approach = np.asarray(approach, dtype=np.float64)
    approach = approach / np.linalg.norm(approach)
    desired = np.cross(approach, obs.major_axis)
    roll = 0.0
    if np.linalg.norm(desired) > 1e-3:
        desired = desired / np.linalg.norm(desired)
        base = _base_closing(approach)
        roll = np.arctan2(np.dot(np.cross(base, desired), approach), np.dot(base, desired))
        #the closing line has no direction
        if roll > np.pi / 2:
            roll -= np.pi
        elif roll < -np.pi / 2:
            roll += np.pi
    return GraspAction(np.zeros(3), approach, float(roll))


def pct_descriptor(point_dim=3, width=32, embed=64, head=8, n_actions=7):
    '''ordered (name, shape) list of the transformer parameters'''
    desc = [('conv1_w', (point_dim, width)), ('conv1_b', (width,)),
            ('bn1_scale', (width,)), ('bn1_shift', (width,)),
            ('conv2_w', (width, width)), ('conv2_b', (width,)),
            ('bn2_scale', (width,)), ('bn2_shift', (width,)),
            ('cls_token', (width,))]
    for i in (1, 2):
        desc += [('attn%i_q' %i, (width, width)), ('attn%i_k' %i, (width, width)),
                 ('attn%i_v' %i, (width, width))]
    n_in = 2 * width
    for i in (1, 2):
        desc += [('block%i_w' %i, (n_in, embed)), ('block%i_b' %i, (embed,)),
                 ('block%i_scale' %i, (embed,)), ('block%i_shift' %i, (embed,))]
        n_in = embed
    desc += [('head1_w', (embed + 6, head)), ('head1_b', (head,)),
             ('head2_w', (head, head)), ('head2_b', (head,)),
             ('out_w', (head, n_actions)), ('out_b', (n_actions,))]
    return desc


class PctWeights(object):
    '''flat parameter vector plus the architecture descriptor

    >>> w = zero_weights()
    >>> w.n_params == sum(int(np.prod(s)) for _, s in w.descriptor)
    True
    '''

    def __init__(self, flat, descriptor=None):
        self.descriptor = pct_descriptor() if descriptor is None else [(n, tuple(s)) for n, s in descriptor]
        self.flat = np.asarray(flat, dtype=np.float64).reshape(-1)
        if len(self.flat) != self.n_params:
            raise ValueError('weights have %i parameters, architecture needs %i'
                             %(len(self.flat), self.n_params))

    @property
    def n_params(self):
        return int(sum(np.prod(shape) for _, shape in self.descriptor))

    def layers(self):
        out = {}
        start = 0
        for name, shape in self.descriptor:
            size = int(np.prod(shape))
            out[name] = self.flat[start:start + size].reshape(shape)
            start += size
        return out

    def with_flat(self, flat):
        return PctWeights(flat, self.descriptor)


def zero_weights(descriptor=None):
    descriptor = pct_descriptor() if descriptor is None else descriptor
    return PctWeights(np.zeros(int(sum(np.prod(s) for _, s in descriptor))), descriptor)


def init_weights(seed=0, descriptor=None):
    '''fan-in scaled Gaussian weights, unit norm scales and zero shifts'''
    rng = np.random.default_rng(seed)
    descriptor = pct_descriptor() if descriptor is None else descriptor
    parts = []
    for name, shape in descriptor:
        if name.endswith('_scale'):
            parts.append(np.ones(shape))
        elif name.endswith(('_b', '_shift')):
            parts.append(np.zeros(shape))
        elif name == 'cls_token':
            parts.append(rng.normal(0.0, 0.1, shape))
        else:
            parts.append(rng.normal(0.0, 1.0 / np.sqrt(shape[0]), shape))
    return PctWeights(np.concatenate([p.reshape(-1) for p in parts]), descriptor)


def _attention(x, Wq, Wk, Wv):
    q, k, v = x.dot(Wq), x.dot(Wk), x.dot(Wv)
    logits = q.dot(k.T) / np.sqrt(q.shape[1])
    logits -= logits.max(axis=1, keepdims=True)
    attn = np.exp(logits)
    attn /= attn.sum(axis=1, keepdims=True)
    return x + attn.dot(v)


def _leaky_relu(x, slope=0.2):
    return np.where(x > 0, x, slope * x)


def pct_forward(weights, obs, normalized=False):
    '''evaluates the point cloud transformer on an observation

    Per-point shared layers with stored normalization statistics, two
    self-attention layers over the points plus a prepended class token,
    two shared blocks on the concatenated attention outputs and a small
    tanh head fed with the class-token embedding, the cloud mean and the
    major axis.

    Parameters
    ----------
    weights : PctWeights
        network parameters

    obs : GraspObservation
        observation with at least one point

    normalized : bool
        if True, return the raw 7-vector in [-1, 1] instead of a GraspAction
        default : False

    Examples
    --------
    >>> from biarmpy.scene import SceneObject, cylinder_shape, sample_point_cloud
    >>> can = SceneObject('can', Pose([0.1, 0.5, 0.06]), cylinder_shape(0.033, 0.12))
    >>> obs = make_observation(sample_point_cloud(can, 64, seed=0))
    >>> act = pct_forward(zero_weights(), obs)
    >>> act.approach_dir.tolist(), act.roll_angle
    ([0.0, 0.0, -1.0], 0.0)

    Shuffling the points does not change the action

    >>> w = init_weights(seed=3)
    >>> a = pct_forward(w, obs, normalized=True)
    >>> perm = np.random.default_rng(1).permutation(64)
    >>> shuffled = GraspObservation(PointCloud(obs.cloud.points[perm]), obs.cloud_mean, obs.major_axis)
    >>> bool(np.abs(a - pct_forward(w, shuffled, normalized=True)).max() < 1e-6)
    True
    >>> bool(np.all(np.abs(a) <= 1.0))
    True
    '''
    if not np.all(np.isfinite(weights.flat)):
        raise ValueError('network weights contain non-finite values')
    pts = obs.cloud.points
    if not (np.all(np.isfinite(obs.cloud_mean)) and np.all(np.isfinite(obs.major_axis))):
        raise ValueError('observation contains non-finite values')
    p = weights.layers()

    h = np.maximum(p['bn1_scale'] * (pts.dot(p['conv1_w']) + p['conv1_b']) + p['bn1_shift'], 0.0)
    h = np.maximum(p['bn2_scale'] * (h.dot(p['conv2_w']) + p['conv2_b']) + p['bn2_shift'], 0.0)
    tokens = np.vstack([p['cls_token'][None, :], h])

    a1 = _attention(tokens, p['attn1_q'], p['attn1_k'], p['attn1_v'])
    a2 = _attention(a1, p['attn2_q'], p['attn2_k'], p['attn2_v'])
    #shared blocks act per token, only the class token is needed further on
    e = np.concatenate([a1[0], a2[0]])
    for i in (1, 2):
        e = _leaky_relu(p['block%i_scale' %i] * (e.dot(p['block%i_w' %i]) + p['block%i_b' %i]) +
                        p['block%i_shift' %i])

    z = np.concatenate([e, obs.cloud_mean, obs.major_axis])
    z = np.tanh(z.dot(p['head1_w']) + p['head1_b'])
    z = np.tanh(z.dot(p['head2_w']) + p['head2_b'])
    a = np.tanh(z.dot(p['out_w']) + p['out_b'])
    if normalized:
        return a
    return GraspAction.from_normalized(a)


@dataclass
class EsConfig:
    '''settings of the evolution-strategies trainer

    >>> EsConfig(tau=0.0)
    Traceback (most recent call last):
        ...
    ValueError: tau needs to be in (0, 1], got 0.0
    '''
    l: int = 50
    sigma: float = 0.02
    eta: float = 0.02
    tau: float = 0.3
    iters: int = 200
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.tau <= 1:
            raise ValueError('tau needs to be in (0, 1], got %s' %self.tau)
        if self.l < 2:
            raise ValueError('l needs to be >= 2, got %i' %self.l)
        if self.sigma <= 0 or self.eta <= 0:
            raise ValueError('sigma and eta need to be > 0')
        if self.iters < 0:
            raise ValueError('iters needs to be >= 0')

    @property
    def n_top(self):
        return int(np.ceil(self.tau * self.l))


def es_train(reward_fn, init_weights, cfg=None, log=None, verbose=False):
    '''blackbox evolution-strategies training with top-direction selection

    Every iteration samples l antithetic direction pairs, evaluates
    reward_fn(theta +- sigma * eps, seed), keeps the ceil(tau * l) directions
    with the best max(r+, r-) and steps along the gradient estimate
    sum((r+ - r-) / 2 * eps) / (sigma * k) of the kept directions, normalized
    by the std of the kept rewards. The normalized step does not shrink with
    the reward scale, its length is set by eta / sigma.

    Parameters
    ----------
    reward_fn : callable
        reward_fn(theta, seed) -> float, the seed is shared by both members
        of an antithetic pair

    init_weights : PctWeights or 1d array
        starting parameters

    cfg : EsConfig
        trainer settings, defaults to EsConfig()

    log : list or None
        receives one dict per iteration: iter, mean_reward, best_reward, wall_ms

    verbose : bool
        print progress every 10 iterations

    Returns
    -------
    weights : same type as init_weights
        trained parameters

    curve : 1d array
        mean reward of every iteration

    Examples
    --------
    >>> theta0 = np.ones(5) / np.sqrt(5)
    >>> theta, curve = es_train(lambda th, seed: -th.dot(th), theta0, EsConfig(iters=200, eta=0.0002))
    >>> bool(np.linalg.norm(theta) < 0.1), len(curve)
    (True, 200)

    Halving sigma doubles the step on a linear reward

    >>> lin = lambda th, seed: th.sum()
    >>> small, _ = es_train(lin, np.zeros(4), EsConfig(l=4, iters=1, sigma=0.01))
    >>> large, _ = es_train(lin, np.zeros(4), EsConfig(l=4, iters=1, sigma=0.02))
    >>> '%.4f' %(np.linalg.norm(small) / np.linalg.norm(large))
    '2.0000'
    >>> bool(small.sum() > 0)
    True
    >>> theta2, curve2 = es_train(lambda th, seed: -th.dot(th), theta0, EsConfig(iters=5))
    >>> bool(np.array_equal(curve2, es_train(lambda th, seed: -th.dot(th), theta0, EsConfig(iters=5))[1]))
    True
    '''
    cfg = EsConfig() if cfg is None else cfg
    is_pct = isinstance(init_weights, PctWeights)
    theta = (init_weights.flat if is_pct else np.asarray(init_weights, dtype=np.float64)).copy()
    rng = np.random.default_rng(cfg.seed)
    k = cfg.n_top
    curve = []

    for it in range(cfg.iters):
        t0 = time.perf_counter()
        eps = rng.standard_normal((cfg.l, len(theta)))
        seeds = rng.integers(0, 2 ** 31, size=cfg.l)
        #pairs are reduced in direction-index order
        r_plus = np.array([reward_fn(theta + cfg.sigma * eps[i], int(seeds[i])) for i in range(cfg.l)])
        r_minus = np.array([reward_fn(theta - cfg.sigma * eps[i], int(seeds[i])) for i in range(cfg.l)])

        order = np.argsort(-np.maximum(r_plus, r_minus), kind='stable')[:k]
        sigma_r = np.concatenate([r_plus[order], r_minus[order]]).std()
        step = ((r_plus[order] - r_minus[order]) / 2.0).dot(eps[order])
        theta = theta + cfg.eta / (cfg.sigma * k * (sigma_r + 1e-8)) * step

        rewards = np.concatenate([r_plus, r_minus])
        curve.append(rewards.mean())
        if log is not None:
            log.append({'iter': it, 'mean_reward': float(rewards.mean()),
                        'best_reward': float(rewards.max()),
                        'wall_ms': (time.perf_counter() - t0) * 1000.0})
        if verbose and it % 10 == 0: # pragma: no cover
            print('iter %i: mean reward %.3f, best %.3f' %(it, rewards.mean(), rewards.max()))

    curve = np.array(curve)
    if is_pct:
        return init_weights.with_flat(theta), curve
    return theta, curve


def grasp_objects():
    '''the five objects of the grasp environment'''
    return [{'name': 'can', 'shape': cylinder_shape(0.033, 0.12)},
            {'name': 'bottle', 'shape': cylinder_shape(0.04, 0.2)},
            {'name': 'eraser', 'shape': box_shape([0.12, 0.05, 0.03])},
            {'name': 'banana', 'shape': box_shape([0.18, 0.04, 0.04])},
            {'name': 'plushie', 'shape': box_shape([0.10, 0.08, 0.09])}]


def _object_axis(obj):
    '''median axis segment of an object: (center, unit direction, half length)'''
    R = obj.pose.matrix()
    if obj.shape['type'] == 'cylinder':
        return obj.pose.position, R[:, 2], obj.shape['height'] / 2.0
    ext = np.asarray(obj.shape['extents'], dtype=np.float64)
    i = int(np.argmax(ext))
    return obj.pose.position, R[:, i], ext[i] / 2.0


def score_grasp(obj, obs, action):
    '''binary grasp reward

    1 iff the fingertip lies within 2.5 cm of the object's median axis
    segment and the approach is within 45 degrees of a valid direction: from
    above for any object, from the side across the long axis for boxes and
    from any side for cylinders.

    Examples
    --------
    >>> can = SceneObject('can', Pose([0.0, 0.5, 0.06]), cylinder_shape(0.033, 0.12))
    >>> obs = GraspObservation(PointCloud([[0.0, 0.5, 0.06]]), np.array([0.0, 0.5, 0.06]),
    ...                        np.array([0.0, 0.0, 1.0]))
    >>> score_grasp(can, obs, GraspAction(np.zeros(3), DEFAULT_APPROACH, 0.0))
    1
    >>> score_grasp(can, obs, GraspAction(np.array([0.1, 0.0, 0.0]), DEFAULT_APPROACH, 0.0))
    0
    '''
    center, axis, half = _object_axis(obj)
    tip = action.fingertip(obs)
    s = np.clip(np.dot(tip - center, axis), -half, half)
    if np.linalg.norm(tip - (center + s * axis)) > GRASP_RADIUS:
        return 0
    approach = action.approach_dir
    if np.arccos(np.clip(np.dot(approach, DEFAULT_APPROACH), -1.0, 1.0)) <= APPROACH_TOLERANCE:
        return 1
    if approach[2] > np.sin(APPROACH_TOLERANCE):
        return 0
    if obj.shape['type'] == 'cylinder':
        return 1
    #within 45 degrees of the plane across the long axis
    return int(abs(np.dot(approach, axis)) <= np.sin(APPROACH_TOLERANCE))


def _episode(object_id, seed):
    rng = np.random.default_rng(seed)
    catalog = grasp_objects()
    if object_id is None:
        object_id = int(rng.integers(0, len(catalog)))
    entry = catalog[object_id % len(catalog)]
    upright = SceneObject(entry['name'], Pose(), entry['shape'])
    z = upright.bounding_box().max_corner[2]
    pose = Pose.from_rotvec([0.0, 0.0, rng.uniform(0.0, np.pi)],
                            [rng.uniform(-0.3, 0.3), rng.uniform(0.4, 0.6), z])
    obj = SceneObject(entry['name'], pose, entry['shape'])
    cloud = sample_point_cloud(obj, ENV_POINTS, seed=int(rng.integers(0, 2 ** 31)))
    return obj, make_observation(cloud), rng


def grasp_env_rollout(weights, object_id=None, seed=0):
    '''one synthetic grasp episode, returns a reward of 0 or 1

    Parameters
    ----------
    weights : PctWeights
        policy parameters

    object_id : int or None
        index into grasp_objects(), sampled from the seed when None

    seed : int
        episode seed, fixes object pose and point sampling

    Examples
    --------
    >>> r = grasp_env_rollout(zero_weights(), object_id=0, seed=4)
    >>> r in (0, 1), r == grasp_env_rollout(zero_weights(), object_id=0, seed=4)
    (True, True)
    '''
    obj, obs, _ = _episode(object_id, seed)
    return score_grasp(obj, obs, pct_forward(weights, obs))


class GraspEnv(object):
    '''reward function for es_train: mean reward over a batch of episodes

    Episodes cycle through the five objects, so every batch of five sees
    each of them once.
    '''

    def __init__(self, n_episodes=10, descriptor=None):
        self.n_episodes = n_episodes
        self.descriptor = pct_descriptor() if descriptor is None else descriptor

    def __call__(self, theta, seed):
        weights = PctWeights(theta, self.descriptor)
        rng = np.random.default_rng(seed)
        seeds = rng.integers(0, 2 ** 31, size=self.n_episodes)
        return float(np.mean([grasp_env_rollout(weights, i, int(s)) for i, s in enumerate(seeds)]))

    def evaluate(self, weights, n_episodes=200, seed=12345):
        rng = np.random.default_rng(seed)
        seeds = rng.integers(0, 2 ** 31, size=n_episodes)
        return float(np.mean([grasp_env_rollout(weights, i, int(s)) for i, s in enumerate(seeds)]))


def random_policy_baseline(n_episodes=1000, seed=0):
    '''success rate of uniformly random normalized actions

    >>> 0.0 <= random_policy_baseline(50, seed=1) <= 1.0
    True
    '''
    rng = np.random.default_rng(seed)
    rewards = []
    for i in range(n_episodes):
        obj, obs, ep_rng = _episode(i, int(rng.integers(0, 2 ** 31)))
        action = GraspAction.from_normalized(ep_rng.uniform(-1.0, 1.0, 7))
        rewards.append(score_grasp(obj, obs, action))
    return float(np.mean(rewards))
