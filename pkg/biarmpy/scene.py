'''
Scene representation, synthetic point clouds, detection and task generation

The perception stand-in works on 3D boxes: a caption is looked up against
the object names, attributes and taught part labels of a scene, the
resulting box crops the scene point cloud.
'''

from dataclasses import dataclass, field, replace
import warnings

import numpy as np

from .exceptions import SegmentationEmpty, PlacementError, BadSceneWarning, ConfigError
from .geometry import Pose, Aabb

__all__ = ['SceneObject',
           'Scene',
           'PointCloud',
           'Detection',
           'NotFound',
           'box_shape',
           'cylinder_shape',
           'point_set_shape',
           'default_workspace',
           'default_regions',
           'table_obstacle',
           'sorting_catalog',
           'make_scene',
           'sample_point_cloud',
           'scene_cloud',
           'detect',
           'segment_cloud',
           'find_object',
           'region_of',
           'get_state',
           'get_visual_state',
           'update_obstacles',
           'teach_part',
           'generate_sorting_tasks',
           'generate_bottle_tasks',
           'generate_trash_tasks',
           'SORTING_GROUPS',
           'scene_from_dict',
           'scene_to_dict']


#grouping phrase used in instructions -> attribute carried by the objects
SORTING_GROUPS = {'cans': 'can',
                  'blocks': 'block',
                  'soft objects': 'soft',
                  'metal objects': 'metallic',
                  'red objects': 'red'}

#table area objects are spawned on (x, y ranges)
TABLE_AREA = ((-0.55, 0.55), (0.3, 0.7))


def box_shape(extents):
    '''box primitive with full side lengths (m)'''
    return {'type': 'box', 'extents': np.asarray(extents, dtype=np.float64).reshape(3)}


def cylinder_shape(radius, height):
    '''cylinder primitive, axis along the local z-axis, centered on the pose'''
    return {'type': 'cylinder', 'radius': float(radius), 'height': float(height)}


def point_set_shape(points):
    return {'type': 'point_set', 'points': np.asarray(points, dtype=np.float64).reshape(-1, 3)}


def _shape_local_box(shape):
    kind = shape['type']
    if kind == 'box':
        half = shape['extents'] / 2.0
        return -half, half
    elif kind == 'cylinder':
        half = np.array([shape['radius'], shape['radius'], shape['height'] / 2.0])
        return -half, half
    elif kind == 'point_set':
        if len(shape['points']) == 0:
            raise ValueError('point_set shape has no points')
        return shape['points'].min(axis=0), shape['points'].max(axis=0)
    raise ValueError('unknown shape type "%s", use box, cylinder or point_set' %kind)


def _shape_height(shape):
    lo, hi = _shape_local_box(shape)
    return float(hi[2] - lo[2])


def _yaw_pose(x, y, z, yaw):
    return Pose([x, y, z], [np.cos(yaw / 2.0), 0.0, 0.0, np.sin(yaw / 2.0)])


@dataclass(eq=False)
class SceneObject:
    '''labeled object on the table

    Examples
    --------
    >>> can = SceneObject('coke can', Pose([0, 0.5, 0.06]), cylinder_shape(0.033, 0.12),
    ...                   {'can', 'red'})
    >>> can.bounding_box().max_corner.round(3)
    array([0.033, 0.533, 0.12 ])

    Part boxes need to lie in the bounding box dilated by 1 cm

    >>> SceneObject('coke can', Pose([0, 0.5, 0.06]), cylinder_shape(0.033, 0.12), {'can'},
    ...             {'tab': Aabb([0, 0.5, 0.2], [0.01, 0.51, 0.21])})
    Traceback (most recent call last):
        ...
    ValueError: part "tab" of object "coke can" lies outside the object bounding box
    '''
    name: str
    pose: Pose
    shape: dict
    attributes: frozenset = frozenset()
    part_labels: dict = field(default_factory=dict)

    def __post_init__(self):
        self.attributes = frozenset(self.attributes)
        if any(a != a.lower() for a in self.attributes):
            raise ValueError('attributes of object "%s" need to be lowercase' %self.name)
        bbox = self.bounding_box().dilate(0.01)
        for part, box in self.part_labels.items():
            if not bbox.contains_box(box, margin=1e-9):
                raise ValueError('part "%s" of object "%s" lies outside the object bounding box'
                                 %(part, self.name))

    def bounding_box(self):
        '''axis-aligned bounding box of the posed shape in the workspace frame'''
        if self.shape['type'] == 'point_set':
            _shape_local_box(self.shape)
            return Aabb.from_points(self.pose.transform_point(self.shape['points']))
        if self.shape['type'] == 'cylinder':
            #exact box of a rotated cylinder
            axis = self.pose.matrix()[:, 2]
            r, half_h = self.shape['radius'], self.shape['height'] / 2.0
            half = np.abs(axis) * half_h + r * np.sqrt(np.clip(1.0 - axis ** 2, 0.0, 1.0))
            return Aabb.from_center(self.pose.position, half)
        lo, hi = _shape_local_box(self.shape)
        corners = np.array([[x, y, z] for x in (lo[0], hi[0])
                            for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
        return Aabb.from_points(self.pose.transform_point(corners))

    @property
    def height(self):
        return _shape_height(self.shape)

    def moved_to(self, pose):
        '''returns a copy at a new pose, part boxes move along'''
        delta = pose.position - self.pose.position
        parts = {k: Aabb(b.min_corner + delta, b.max_corner + delta)
                 for k, b in self.part_labels.items()}
        if np.allclose(pose.orientation, self.pose.orientation):
            return replace(self, pose=pose, part_labels=parts)
        #rotated parts cannot stay axis-aligned, keep them inside the new bounding box
        moved = replace(self, pose=pose, part_labels={})
        bbox = moved.bounding_box()
        moved.part_labels = {k: Aabb(np.clip(b.min_corner, bbox.min_corner, bbox.max_corner),
                                     np.clip(b.max_corner, bbox.min_corner, bbox.max_corner))
                             for k, b in parts.items()}
        return moved


@dataclass(eq=False)
class Scene:
    '''objects, static obstacles, workspace box and named regions

    Scenes are treated as values: the helpers return modified copies.
    '''
    objects: list
    obstacles: list
    workspace: Aabb
    regions: dict
    rng_seed: int = 0

    def __post_init__(self):
        for name, box in self.regions.items():
            if not self.workspace.contains_box(box, margin=1e-9):
                raise ValueError('region "%s" is not contained in the workspace' %name)
        for obj in self.objects:
            if not self.workspace.contains(obj.pose.position, margin=1e-9):
                raise ValueError('object "%s" lies outside the workspace' %obj.name)

    def names(self):
        return [obj.name for obj in self.objects]

    def object(self, name):
        for obj in self.objects:
            if obj.name == name:
                return obj
        raise LookupError('no object named "%s" in scene, available are: %s'
                          %(name, ', '.join(sorted(self.names()))))

    def has_object(self, name):
        return any(obj.name == name for obj in self.objects)

    def with_object(self, obj):
        '''returns a copy with obj added, or replacing the object of the same name'''
        objects = [o for o in self.objects if o.name != obj.name] + [obj]
        return replace(self, objects=objects)

    def without_object(self, name):
        return replace(self, objects=[o for o in self.objects if o.name != name])

    def moved_object(self, name, pose):
        return self.with_object(self.object(name).moved_to(pose))


class PointCloud(object):
    '''N x 3 array of points (m)

    >>> PointCloud(np.zeros((0, 3)))
    Traceback (most recent call last):
        ...
    ValueError: a point cloud needs at least one point
    '''
    __slots__ = ('points',)

    def __init__(self, points):
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 3:
            raise ValueError('point cloud needs to be an N x 3 array, got shape %s'
                             %(points.shape,))
        if len(points) == 0:
            raise ValueError('a point cloud needs at least one point')
        if not np.all(np.isfinite(points)):
            raise ValueError('point cloud contains non-finite coordinates')
        self.points = points

    def __len__(self):
        return len(self.points)

    def mean(self):
        return self.points.mean(axis=0)


@dataclass(eq=False)
class Detection:
    caption: str
    box: Aabb
    confidence: float
    object_name: str
    part_name: str = None
    ambiguous: bool = False
    found = True


@dataclass(eq=False)
class NotFound:
    caption: str
    found = False


def default_workspace():
    return Aabb([-0.9, -0.3, 0.0], [0.9, 1.0, 1.0])


def default_regions():
    '''destination areas at both table sides

    Examples
    --------
    >>> sorted(default_regions().keys())
    ['left side', 'right side']
    '''
    return {'left side': Aabb([-0.65, 0.25, 0.0], [-0.3, 0.75, 0.25]),
            'right side': Aabb([0.3, 0.25, 0.0], [0.65, 0.75, 0.25])}


def table_obstacle():
    '''slab below the table top'''
    return Aabb([-0.9, -0.3, -0.05], [0.9, 1.0, 0.0])


def sorting_catalog():
    '''returns the built-in tabletop object catalog

    Returns
    -------
    catalog : list
        list of dicts with keys 'name', 'shape' and 'attributes'

    Examples
    --------
    >>> catalog = sorting_catalog()
    >>> len(catalog)
    16
    >>> knife = [c for c in catalog if c['name'] == 'red knife'][0]
    >>> sorted(knife['attributes'])
    ['metallic', 'red', 'sharp', 'utensil']
    '''
    return [{'name': 'coke can', 'shape': cylinder_shape(0.033, 0.12),
             'attributes': {'can', 'red', 'metallic'}},
            {'name': 'sprite can', 'shape': cylinder_shape(0.033, 0.12),
             'attributes': {'can', 'green', 'metallic'}},
            {'name': 'soup can', 'shape': cylinder_shape(0.035, 0.10),
             'attributes': {'can', 'metallic'}},
            {'name': 'red block', 'shape': box_shape([0.05, 0.05, 0.05]),
             'attributes': {'block', 'red'}},
            {'name': 'yellow block', 'shape': box_shape([0.05, 0.05, 0.05]),
             'attributes': {'block', 'yellow'}},
            {'name': 'green block', 'shape': box_shape([0.05, 0.05, 0.05]),
             'attributes': {'block', 'green'}},
            {'name': 'blue block', 'shape': box_shape([0.05, 0.05, 0.05]),
             'attributes': {'block', 'blue'}},
            {'name': 'purple plushie', 'shape': box_shape([0.08, 0.06, 0.07]),
             'attributes': {'soft', 'purple', 'toy'}},
            {'name': 'octopus plushie', 'shape': cylinder_shape(0.045, 0.07),
             'attributes': {'soft', 'pink', 'toy'}},
            {'name': 'banana', 'shape': box_shape([0.16, 0.04, 0.035]),
             'attributes': {'fruit', 'yellow'}},
            {'name': 'apple', 'shape': cylinder_shape(0.04, 0.07),
             'attributes': {'fruit', 'red'}},
            {'name': 'sponge', 'shape': box_shape([0.09, 0.06, 0.03]),
             'attributes': {'soft', 'yellow'}},
            {'name': 'metal spoon', 'shape': box_shape([0.15, 0.03, 0.015]),
             'attributes': {'metallic', 'utensil'}},
            {'name': 'red knife', 'shape': box_shape([0.18, 0.025, 0.015]),
             'attributes': {'metallic', 'sharp', 'red', 'utensil'}},
            {'name': 'chalkboard eraser', 'shape': box_shape([0.12, 0.05, 0.03]),
             'attributes': {'eraser'}},
            {'name': 'tennis ball', 'shape': cylinder_shape(0.033, 0.066),
             'attributes': {'ball', 'green'}}]


def make_scene(objects=(), obstacles=None, regions=None, workspace=None, rng_seed=0):
    '''builds a desk scene, filling in the default workspace, table and regions'''
    return Scene(list(objects),
                 [table_obstacle()] if obstacles is None else list(obstacles),
                 default_workspace() if workspace is None else workspace,
                 default_regions() if regions is None else dict(regions),
                 int(rng_seed))


def sample_point_cloud(obj, n_points, seed=None):
    '''samples points uniformly on the surface of an object

    Parameters
    ----------
    obj : SceneObject
        the object to sample

    n_points : int
        number of points, needs to be >= 1

    seed : int or None
        seed for the random generator, identical seeds give identical clouds

    Returns
    -------
    cloud : PointCloud
        points in the workspace frame

    Examples
    --------
    >>> unit = SceneObject('unit box', Pose(), box_shape([1, 1, 1]))
    >>> cloud = sample_point_cloud(unit, 10000, seed=1)
    >>> '%.9f' %np.abs(cloud.points).max()
    '0.500000000'

    >>> can = SceneObject('can', Pose(), cylinder_shape(0.05, 0.2))
    >>> cloud = sample_point_cloud(can, 10000, seed=2)
    >>> bool(np.linalg.norm(cloud.mean()) < 0.002)
    True
    >>> bool(np.array_equal(cloud.points, sample_point_cloud(can, 10000, seed=2).points))
    True
    '''
    if n_points < 1:
        raise ValueError('n_points needs to be >= 1, got %i' %n_points)
    rng = np.random.default_rng(seed)
    shape = obj.shape
    kind = shape['type']

    if kind == 'box':
        ext = shape['extents']
        areas = np.array([ext[1] * ext[2], ext[0] * ext[2], ext[0] * ext[1]]).repeat(2)
        face = rng.choice(6, size=n_points, p=areas / areas.sum())
        pts = (rng.random((n_points, 3)) - 0.5) * ext
        axis = face // 2
        sign = np.where(face % 2 == 0, -1.0, 1.0)
        pts[np.arange(n_points), axis] = sign * ext[axis] / 2.0
    elif kind == 'cylinder':
        r, h = shape['radius'], shape['height']
        areas = np.array([2 * np.pi * r * h, np.pi * r ** 2, np.pi * r ** 2])
        part = rng.choice(3, size=n_points, p=areas / areas.sum())
        angle = rng.random(n_points) * 2 * np.pi
        #caps: sqrt for area-uniform radius
        radius = np.where(part == 0, r, r * np.sqrt(rng.random(n_points)))
        z = np.where(part == 0, (rng.random(n_points) - 0.5) * h,
                     np.where(part == 1, h / 2.0, -h / 2.0))
        pts = np.column_stack([radius * np.cos(angle), radius * np.sin(angle), z])
    elif kind == 'point_set':
        if len(shape['points']) == 0:
            raise ValueError('cannot sample from an empty point_set shape')
        pts = shape['points'][rng.integers(0, len(shape['points']), size=n_points)]
    else:
        raise ValueError('unknown shape type "%s", use box, cylinder or point_set' %kind)

    return PointCloud(obj.pose.transform_point(pts))


def scene_cloud(scene, n_per_object=256, seed=0):
    '''point cloud of the whole scene, one sampled cloud per object'''
    if len(scene.objects) == 0:
        raise SegmentationEmpty('scene has no objects to sample')
    clouds = [sample_point_cloud(obj, n_per_object, seed=seed + i).points
              for i, obj in enumerate(scene.objects)]
    return PointCloud(np.vstack(clouds))


def _candidates(scene, caption, exact):
    caption_l = caption.strip().lower()
    out = []

    def match(label):
        if exact:
            return label == caption
        label = label.lower()
        return caption_l in label or label in caption_l

    for obj in scene.objects:
        if match(obj.name):
            out.append((obj, None, obj.bounding_box()))
            continue
        parts = [(p, b) for p, b in sorted(obj.part_labels.items()) if match(p)]
        if parts:
            out.append((obj, parts[0][0], parts[0][1]))
        elif any(match(a) for a in sorted(obj.attributes)):
            out.append((obj, None, obj.bounding_box()))
    return out


def detect(scene, caption, noise=None, seed=None):
    '''looks up the box of an object or object part from a caption

    Captions are matched against object names, taught part labels and
    attributes, exact matches first and case-insensitive substring matches
    second. Several matches are resolved by the smallest distance to the
    workspace center and flagged as ambiguous.

    Parameters
    ----------
    scene : Scene
        the scene to search

    caption : str
        text description, e.g. 'coke can' or 'push pedal'

    noise : dict or None
        detection noise with keys 'p_miss' and 'p_confuse', None for ground truth

    seed : int or None
        seed for the noise draw

    Returns
    -------
    detection : Detection or NotFound

    Examples
    --------
    >>> can = SceneObject('coke can', Pose([0.1, 0.5, 0.06]), cylinder_shape(0.033, 0.12), {'can'})
    >>> scene = make_scene([can])
    >>> det = detect(scene, 'coke can')
    >>> det.object_name, det.box.center().round(3)
    ('coke can', array([0.1 , 0.5 , 0.06]))
    >>> detect(scene, 'coke can', noise={'p_miss': 1.0, 'p_confuse': 0.0}).found
    False
    >>> detect(scene, 'toaster').found
    False
    '''
    if not caption or not caption.strip():
        raise ValueError('caption needs to be a non-empty string')

    found = _candidates(scene, caption, exact=True)
    confidence = 1.0
    if not found:
        found = _candidates(scene, caption, exact=False)
        confidence = 0.8

    noise = noise or {}
    p_miss, p_confuse = noise.get('p_miss', 0.0), noise.get('p_confuse', 0.0)
    rng = np.random.default_rng(seed)
    draw = rng.random() if (p_miss > 0 or p_confuse > 0) else 1.0

    if not found or draw < p_miss:
        return NotFound(caption)

    center = scene.workspace.center()
    found.sort(key=lambda c: (np.linalg.norm(c[2].center() - center), c[0].name))
    obj, part, box = found[0]
    ambiguous = len(found) > 1

    if draw < p_miss + p_confuse:
        others = [o for o in scene.objects if o.name != obj.name]
        if others:
            obj = others[int(rng.integers(0, len(others)))]
            part, box = None, obj.bounding_box()
            confidence *= 0.5

    limits = scene.workspace.dilate(0.05)
    box = Aabb(np.clip(box.min_corner, limits.min_corner, limits.max_corner),
               np.clip(box.max_corner, limits.min_corner, limits.max_corner))
    return Detection(caption, box, confidence, obj.name, part, ambiguous)


def segment_cloud(full_cloud, box, margin=0.0):
    '''crops the points inside a box dilated by margin

    Examples
    --------
    >>> cloud = PointCloud([[0, 0, 0], [1, 1, 1], [0.5, -0.2, 0.1]])
    >>> segment_cloud(cloud, Aabb([0, -1, 0], [0.6, 1, 1])).points
    array([[ 0. ,  0. ,  0. ],
           [ 0.5, -0.2,  0.1]])
    >>> segment_cloud(cloud, Aabb([5, 5, 5], [6, 6, 6]))
    Traceback (most recent call last):
        ...
    biarmpy.exceptions.SegmentationEmpty: no points inside the detection box
    '''
    if margin < 0:
        raise ValueError('margin needs to be >= 0, got %s' %margin)
    pts = full_cloud.points
    lo, hi = box.min_corner - margin, box.max_corner + margin
    mask = np.all((pts >= lo) & (pts <= hi), axis=1)
    if not np.any(mask):
        raise SegmentationEmpty('no points inside the detection box')
    return PointCloud(pts[mask])


def find_object(scene, caption, noise=None, seed=0, n_points=256, margin=0.01):
    '''detects an object and segments its point cloud

    Returns
    -------
    result : tuple
        (Detection, PointCloud) or (NotFound, None) when the caption is not
        detected or the crop is empty.

    Examples
    --------
    >>> block = SceneObject('red block', Pose([0.0, 0.5, 0.025]), box_shape([0.05]*3), {'red'})
    >>> det, cloud = find_object(make_scene([block]), 'red block')
    >>> det.object_name, len(cloud)
    ('red block', 256)
    '''
    det = detect(scene, caption, noise, seed)
    if not det.found:
        return det, None
    try:
        cloud = segment_cloud(scene_cloud(scene, n_points, seed), det.box, margin)
    except SegmentationEmpty:
        return NotFound(caption), None
    return det, cloud


def region_of(scene, position):
    '''name of the region containing position, 'center' if none does

    Positions inside several regions go to the region with the nearest
    center, remaining ties to the alphabetically first name.

    Examples
    --------
    >>> regions = {'a': Aabb([0, 0, 0], [1, 1, 1]), 'b': Aabb([1, 0, 0], [3, 1, 1])}
    >>> scene = make_scene(regions=regions, workspace=Aabb([-1, -1, -1], [4, 4, 4]))
    >>> region_of(scene, [1.0, 0.5, 0.5])
    'a'
    >>> region_of(scene, [-0.5, 0.5, 0.5])
    'center'
    '''
    position = np.asarray(position, dtype=np.float64)
    inside = [(np.linalg.norm(box.center() - position), name)
              for name, box in scene.regions.items() if box.contains(position)]
    if not inside:
        return 'center'
    return min(inside)[1]


def _format_state(mapping):
    return '\n'.join('%s: %s' %(name, mapping[name]) for name in sorted(mapping))


def get_state(scene):
    '''serializes the scene as sorted 'object name: region' lines

    Examples
    --------
    >>> get_state(make_scene())
    ''
    >>> can = SceneObject('coke can', Pose([-0.5, 0.5, 0.06]), cylinder_shape(0.033, 0.12))
    >>> get_state(make_scene([can]))
    'coke can: left side'
    '''
    return _format_state({obj.name: region_of(scene, obj.pose.position)
                          for obj in scene.objects})


def get_visual_state(scene, noise=None, seed=0):
    '''state text as seen through detection

    Each object is looked up by name; missed objects are left out and
    confused detections report the region of the box that was returned.

    Examples
    --------
    >>> can = SceneObject('coke can', Pose([0.5, 0.5, 0.06]), cylinder_shape(0.033, 0.12))
    >>> get_visual_state(make_scene([can]))
    'coke can: right side'
    '''
    mapping = {}
    for i, obj in enumerate(sorted(scene.objects, key=lambda o: o.name)):
        det = detect(scene, obj.name, noise, seed=None if seed is None else seed + i)
        if det.found:
            mapping[obj.name] = region_of(scene, det.box.center())
    return _format_state(mapping)


def update_obstacles(scene, exclude=()):
    '''planning obstacles: static obstacles plus object boxes not excluded

    Examples
    --------
    >>> can = SceneObject('coke can', Pose([0.5, 0.5, 0.06]), cylinder_shape(0.033, 0.12))
    >>> len(update_obstacles(make_scene([can]))), len(update_obstacles(make_scene([can]), ['coke can']))
    (2, 1)
    '''
    exclude = set(exclude)
    return list(scene.obstacles) + [obj.bounding_box() for obj in scene.objects
                                    if obj.name not in exclude]


def teach_part(scene, object_name, part_name, box):
    '''returns a scene in which object_name carries a labeled part box

    Examples
    --------
    >>> can = SceneObject('trash can', Pose([0, 0.55, 0.15]), cylinder_shape(0.1, 0.3))
    >>> scene = teach_part(make_scene([can]), 'trash can', 'lid', Aabb([-0.1, 0.45, 0.28], [0.1, 0.65, 0.3]))
    >>> detect(scene, 'lid').part_name
    'lid'
    '''
    obj = scene.object(object_name)
    parts = dict(obj.part_labels)
    parts[part_name.lower()] = box
    return scene.with_object(replace(obj, part_labels=parts))


def _place_objects(entries, rng, existing=(), area=TABLE_AREA, min_dist=0.08, gap=0.02,
                   max_tries=1000):
    placed = list(existing)
    for entry in entries:
        height = _shape_height(entry['shape'])
        for _ in range(max_tries):
            x = rng.uniform(*area[0])
            y = rng.uniform(*area[1])
            yaw = rng.uniform(-np.pi, np.pi)
            candidate = SceneObject(entry['name'], _yaw_pose(x, y, height / 2.0, yaw),
                                    entry['shape'], entry['attributes'],
                                    entry.get('part_labels', {}))
            box = candidate.bounding_box()
            if all(np.linalg.norm(candidate.pose.position[:2] - o.pose.position[:2]) >= min_dist
                   and not box.intersects(o.bounding_box(), margin=gap) for o in placed):
                placed.append(candidate)
                break
        else:
            raise PlacementError('could not place "%s" after %i samples' %(entry['name'], max_tries))
    return placed[len(existing):]


def generate_sorting_tasks(n_tasks, seed=0):
    '''procedurally generates tabletop sorting tasks

    Every task holds 10-15 catalog objects placed collision-free and an
    instruction to move one attribute group to one table side.

    Returns
    -------
    tasks : list
        list of (scene, instruction, expected) tuples, expected being the
        frozenset of object names carrying the grouping attribute

    Examples
    --------
    >>> tasks = generate_sorting_tasks(3, seed=0)
    >>> len(tasks), all(len(t[2]) > 0 for t in tasks)
    (3, True)
    >>> tasks[0][1] == generate_sorting_tasks(3, seed=0)[0][1]
    True
    >>> all(10 <= len(t[0].objects) <= 15 for t in tasks)
    True
    '''
    if n_tasks < 1:
        raise ValueError('n_tasks needs to be >= 1, got %i' %n_tasks)
    rng = np.random.default_rng(seed)
    catalog = sorting_catalog()
    groups = sorted(SORTING_GROUPS.keys())
    tasks = []
    for i in range(n_tasks):
        k = int(rng.integers(10, 16))
        chosen = [catalog[j] for j in sorted(rng.choice(len(catalog), size=k, replace=False))]
        objects = _place_objects(chosen, rng)
        available = [g for g in groups
                     if any(SORTING_GROUPS[g] in o.attributes for o in objects)]
        group = available[int(rng.integers(0, len(available)))]
        side = ('left', 'right')[int(rng.integers(0, 2))]
        expected = frozenset(o.name for o in objects if SORTING_GROUPS[group] in o.attributes)
        scene = make_scene(objects, rng_seed=int(rng.integers(0, 2 ** 31)))
        tasks.append((scene, 'Move the %s to the %s side' %(group, side), expected))
    return tasks


def bottle_object(position, radius=0.04, height=0.2):
    '''bottle with a taught 'cap' part at its top'''
    x, y = position[0], position[1]
    cap = Aabb([x - radius * 0.6, y - radius * 0.6, height - 0.025],
               [x + radius * 0.6, y + radius * 0.6, height])
    return SceneObject('bottle', Pose([x, y, height / 2.0]), cylinder_shape(radius, height),
                       {'bottle', 'container'}, {'cap': cap})


def trash_can_object(position, radius=0.1, height=0.3):
    '''pedal trash can with taught 'lid' and 'push pedal' parts

    The pedal sticks out 6 cm in front of the can at floor level, facing the
    robots (-y).
    '''
    x, y = position[0], position[1]
    lid = Aabb([x - radius, y - radius, height - 0.02], [x + radius, y + radius, height])
    pedal = Aabb([x - 0.04, y - radius - 0.06, 0.0], [x + 0.04, y - radius, 0.03])
    return SceneObject('trash can', Pose([x, y, height / 2.0]), cylinder_shape(radius, height),
                       {'trash can', 'container'}, {'lid': lid, 'push pedal': pedal})


def _garbage_catalog():
    return [{'name': 'crumpled paper', 'shape': box_shape([0.05, 0.05, 0.045]),
             'attributes': {'trash', 'paper'}},
            {'name': 'paper cup', 'shape': cylinder_shape(0.035, 0.09),
             'attributes': {'trash', 'paper'}},
            {'name': 'empty chip bag', 'shape': box_shape([0.12, 0.08, 0.03]),
             'attributes': {'trash', 'soft'}}]


def generate_bottle_tasks(n_tasks, seed=0):
    '''procedurally generates bottle opening tasks

    Bottles vary in radius (3.5-4.5 cm), height (18-22 cm) and position,
    0-2 catalog distractors are placed around them.

    Examples
    --------
    >>> tasks = generate_bottle_tasks(2, seed=3)
    >>> [t[1] for t in tasks]
    ['Open the bottle', 'Open the bottle']
    >>> 'cap' in tasks[0][0].object('bottle').part_labels
    True
    '''
    if n_tasks < 1:
        raise ValueError('n_tasks needs to be >= 1, got %i' %n_tasks)
    rng = np.random.default_rng(seed)
    catalog = [c for c in sorting_catalog() if 'sharp' not in c['attributes']]
    tasks = []
    for _ in range(n_tasks):
        bottle = bottle_object([rng.uniform(0.0, 0.1), rng.uniform(0.45, 0.55)],
                               rng.uniform(0.035, 0.045), rng.uniform(0.18, 0.22))
        k = int(rng.integers(0, 3))
        chosen = [catalog[j] for j in rng.choice(len(catalog), size=k, replace=False)]
        #distractors stay off the bottle's working area
        distractors = _place_objects(chosen, rng, existing=[bottle], min_dist=0.2)
        scene = make_scene([bottle] + distractors, rng_seed=int(rng.integers(0, 2 ** 31)))
        tasks.append((scene, 'Open the bottle', frozenset(['bottle'])))
    return tasks


def generate_trash_tasks(n_tasks, seed=0):
    '''procedurally generates trash disposal tasks

    A pedal trash can at a randomized location, 1-2 garbage items and
    1-2 distractors.

    Examples
    --------
    >>> tasks = generate_trash_tasks(2, seed=5)
    >>> all(t[0].has_object('trash can') for t in tasks)
    True
    >>> all(1 <= len(t[2]) <= 2 for t in tasks)
    True
    '''
    if n_tasks < 1:
        raise ValueError('n_tasks needs to be >= 1, got %i' %n_tasks)
    rng = np.random.default_rng(seed)
    catalog = [c for c in sorting_catalog() if 'sharp' not in c['attributes']]
    garbage = _garbage_catalog()
    tasks = []
    for _ in range(n_tasks):
        can = trash_can_object([rng.uniform(-0.05, 0.05), rng.uniform(0.5, 0.6)])
        items = [garbage[j] for j in rng.choice(len(garbage), size=int(rng.integers(1, 3)),
                                                replace=False)]
        others = [catalog[j] for j in rng.choice(len(catalog), size=int(rng.integers(1, 3)),
                                                 replace=False)]
        #keep clear of the can and its pedal
        placed = _place_objects(items + others, rng, existing=[can], min_dist=0.08,
                                area=((-0.55, -0.2), (0.3, 0.7)))
        scene = make_scene([can] + placed, rng_seed=int(rng.integers(0, 2 ** 31)))
        expected = frozenset(o.name for o in placed if 'trash' in o.attributes)
        tasks.append((scene, 'Throw away the trash', expected))
    return tasks


def _box_from_dict(d):
    return Aabb(d['min'], d['max'])


def _shape_from_dict(d):
    kind = d.get('type')
    if kind == 'box':
        return box_shape(d['extents'])
    elif kind == 'cylinder':
        return cylinder_shape(d['radius'], d['height'])
    elif kind == 'point_set':
        return point_set_shape(d['points'])
    raise ConfigError('unknown shape type "%s" in scene file' %kind)


def _shape_to_dict(shape):
    out = {'type': shape['type']}
    for k, v in shape.items():
        if k != 'type':
            out[k] = v.tolist() if isinstance(v, np.ndarray) else v
    return out


def scene_from_dict(d):
    '''builds a Scene from its JSON representation (schema_version 1)

    Attribute and part names that are not lowercase are repaired
    with a BadSceneWarning.

    Examples
    --------
    >>> d = {'schema_version': 1, 'objects': [{'name': 'apple',
    ...      'pose': {'position': [0, 0.5, 0.035]},
    ...      'shape': {'type': 'cylinder', 'radius': 0.04, 'height': 0.07},
    ...      'attributes': ['fruit', 'red']}]}
    >>> get_state(scene_from_dict(d))
    'apple: center'
    '''
    version = d.get('schema_version', 1)
    if version != 1:
        raise ConfigError('unsupported scene schema_version %s, expected 1' %version)
    objects = []
    for o in d.get('objects', []):
        attributes = list(o.get('attributes', []))
        parts = {k: _box_from_dict(v) for k, v in o.get('parts', {}).items()}
        if any(a != a.lower() for a in attributes) or any(k != k.lower() for k in parts):
            warnings.warn('attributes and part labels of "%s" were lowercased' %o['name'],
                          BadSceneWarning)
            attributes = [a.lower() for a in attributes]
            parts = {k.lower(): v for k, v in parts.items()}
        pose = o.get('pose', {})
        objects.append(SceneObject(o['name'], Pose(pose.get('position', [0, 0, 0]),
                                                   pose.get('orientation', [1, 0, 0, 0])),
                                   _shape_from_dict(o['shape']), attributes, parts))
    obstacles = [_box_from_dict(b) for b in d['obstacles']] if 'obstacles' in d else None
    regions = {k: _box_from_dict(v) for k, v in d['regions'].items()} if 'regions' in d else None
    workspace = _box_from_dict(d['workspace']) if 'workspace' in d else None
    return make_scene(objects, obstacles, regions, workspace, d.get('seed', 0))


def scene_to_dict(scene):
    return {'schema_version': 1,
            'workspace': scene.workspace.as_dict(),
            'obstacles': [b.as_dict() for b in scene.obstacles],
            'regions': {k: v.as_dict() for k, v in scene.regions.items()},
            'objects': [{'name': o.name,
                         'pose': {'position': o.pose.position.tolist(),
                                  'orientation': o.pose.orientation.tolist()},
                         'shape': _shape_to_dict(o.shape),
                         'attributes': sorted(o.attributes),
                         'parts': {k: v.as_dict() for k, v in o.part_labels.items()}}
                        for o in scene.objects],
            'seed': scene.rng_seed}
