'''
Functions for loading and saving robot, solver and scene files, plans,
traces, reports and network weights
'''

import csv
import json
import os

import numpy as np

from . import config
from .exceptions import ConfigError, IncorrectFileType
from .geometry import biarm_from_dict, biarm_to_dict
from .grasping import PctWeights
from .scene import scene_from_dict, scene_to_dict
from .trajopt import TrajOptConfig

__all__ = ['data_path',
           'load_json',
           'write_json',
           'dumps_json',
           'write_jsonl',
           'write_csv',
           'load_robot_config',
           'save_robot_config',
           'load_solver_config',
           'load_scene',
           'save_scene',
           'load_example_scene',
           'load_plan_text',
           'load_exemplars',
           'save_trace',
           'save_weights',
           'load_weights',
           'validate_report']

SCHEMA_VERSION = 1

#shipped example scenes and their default plans
EXAMPLES = {'sorting': ('scene_sorting.json', 'plan_red_objects.robot'),
            'bottle': ('scene_bottle.json', 'plan_bottle.robot'),
            'trash': ('scene_trash.json', 'plan_trash.robot')}


def data_path(name):
    '''absolute path of a file shipped in the package data directory

    >>> os.path.isfile(data_path('robot_desk.json'))
    True
    '''
    return os.path.join(os.path.dirname(os.path.abspath(__file__)), 'data', name)


def _extension(filename):
    return os.path.splitext(filename)[1].lower().lstrip('.')


def _check_extension(filename, allowed):
    if _extension(filename) not in allowed:
        raise IncorrectFileType('unknown file format ".%s" for "%s", expected one of: %s'
                                %(_extension(filename), filename, ', '.join(allowed)))


def _to_builtin(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, (set, frozenset, tuple)):
        return sorted(obj) if isinstance(obj, (set, frozenset)) else list(obj)
    raise TypeError('cannot serialize object of type %s' %type(obj).__name__)


def load_json(filename):
    '''load a JSON document

    Parameters
    ----------
    filename : str
        path to a .json file

    Returns
    -------
    out : dict or list
        the parsed document

    Examples
    --------
    >>> d = load_json(data_path('solver_default.json'))
    >>> d['schema_version']
    1

    Other extensions are refused

    >>> load_json('plan.robot')
    Traceback (most recent call last):
        ...
    biarmpy.exceptions.IncorrectFileType: unknown file format ".robot" for "plan.robot", expected one of: json
    '''
    _check_extension(filename, ['json'])
    with open(filename, 'r', encoding='utf-8') as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as error:
            raise ConfigError('file "%s" is not valid JSON: %s' %(filename, error))


def write_json(obj, filename):
    '''writes obj as indented JSON, numpy values are converted'''
    _check_extension(filename, ['json'])
    with open(filename, 'w', encoding='utf-8') as f:
        json.dump(obj, f, indent=2, default=_to_builtin)
        f.write('\n')


def dumps_json(obj):
    '''obj as indented JSON text, numpy values are converted

    >>> print(dumps_json({'n': np.int64(3), 'q': np.zeros(2)}))
    {
      "n": 3,
      "q": [
        0.0,
        0.0
      ]
    }
    '''
    return json.dumps(obj, indent=2, default=_to_builtin)


def write_jsonl(rows, filename):
    '''writes one JSON document per line (training logs, event streams)'''
    _check_extension(filename, ['jsonl'])
    with open(filename, 'w', encoding='utf-8') as f:
        for row in rows:
            f.write(json.dumps(row, default=_to_builtin) + '\n')


def write_csv(rows, filename, columns=None):
    '''writes a list of dicts as CSV with a header line

    Parameters
    ----------
    rows : list of dict
        one dict per row

    filename : str
        path to a .csv file

    columns : list or None
        column order, defaults to the keys of the first row
    '''
    _check_extension(filename, ['csv'])
    rows = list(rows)
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    with open(filename, 'w', newline='', encoding='utf-8') as f:
        writer = csv.DictWriter(f, fieldnames=columns, extrasaction='ignore')
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _check_version(d, filename):
    version = d.get('schema_version')
    if version != SCHEMA_VERSION:
        raise ConfigError('unsupported schema_version %s in "%s", expected %i'
                          %(version, filename, SCHEMA_VERSION))


def load_robot_config(filename=None, apply_gains=True):
    '''load the robot model

    Parameters
    ----------
    filename : str or None
        path to a robot JSON file, None loads the shipped desk robot

    apply_gains : bool
        if True, gain profiles defined in the file replace the ones in
        biarmpy.config
        default : True

    Returns
    -------
    model : BiArmModel
        the bimanual robot model, home configuration included

    Examples
    --------
    >>> model = load_robot_config()
    >>> model.left.n_joints, model.right.n_joints
    (6, 6)
    >>> model.home_configuration().shape
    (12,)
    '''
    filename = data_path('robot_desk.json') if filename is None else filename
    d = load_json(filename)
    _check_version(d, filename)
    try:
        model = biarm_from_dict(d)
    except KeyError as error:
        raise ConfigError('robot file "%s" misses the key %s' %(filename, error))
    if apply_gains and 'gain_profiles' in d:
        config.gain_profiles.update({k.lower(): float(v) for k, v in d['gain_profiles'].items()})
    return model


def save_robot_config(model, filename):
    '''writes the robot model and the current gain profiles

    >>> import tempfile
    >>> model = load_robot_config()
    >>> fname = os.path.join(tempfile.mkdtemp(), 'robot.json')
    >>> save_robot_config(model, fname)
    >>> again = load_robot_config(fname)
    >>> np.allclose(again.home_configuration(), model.home_configuration())
    True
    '''
    write_json(dict(biarm_to_dict(model), gain_profiles=dict(config.gain_profiles)), filename)


def load_solver_config(filename=None):
    '''load planner and controller settings

    The 'trajopt' section overrides the planner defaults, the 'control'
    section sets control_dt, joint_inertia and torque_limit in biarmpy.config.

    Returns
    -------
    cfg : TrajOptConfig
        planner settings

    Examples
    --------
    >>> cfg = load_solver_config()
    >>> cfg.horizon, cfg.eps_p
    (10, 0.005)
    '''
    filename = data_path('solver_default.json') if filename is None else filename
    d = load_json(filename)
    _check_version(d, filename)
    for key, value in d.get('control', {}).items():
        if key not in ('control_dt', 'joint_inertia', 'torque_limit'):
            raise ConfigError('unknown control setting "%s" in "%s"' %(key, filename))
        setattr(config, key, float(value))
    try:
        return TrajOptConfig.from_config(**d.get('trajopt', {}))
    except TypeError as error:
        raise ConfigError('bad trajopt section in "%s": %s' %(filename, error))


def load_scene(filename):
    '''load a scene file

    Examples
    --------
    >>> scene = load_scene(data_path('scene_sorting.json'))
    >>> sorted(scene.names())[:2]
    ['blue block', 'coke can']
    '''
    return scene_from_dict(load_json(filename))


def save_scene(scene, filename):
    write_json(scene_to_dict(scene), filename)


def load_example_scene(example='sorting'):
    '''load one of the shipped example scenes and its plan text

    Parameters
    ----------
    example : str
        'sorting', 'bottle' or 'trash'

    Returns
    -------
    scene : Scene
        the example scene

    plan_text : str
        robot program solving the example

    Examples
    --------
    >>> scene, text = load_example_scene('bottle')
    >>> 'cap' in scene.object('bottle').part_labels
    True
    >>> text.splitlines()[-1]
    "robot.unscrew_cap('bottle', 'cap', 6)"
    '''
    try:
        scene_file, plan_file = EXAMPLES[example]
    except KeyError:
        raise LookupError('unknown example "%s", available are: %s'
                          %(example, ', '.join(sorted(EXAMPLES))))
    return load_scene(data_path(scene_file)), load_plan_text(data_path(plan_file))


def load_plan_text(filename):
    '''reads a robot program (.robot or .txt)'''
    _check_extension(filename, ['robot', 'txt'])
    with open(filename, 'r', encoding='utf-8') as f:
        return f.read()


def load_exemplars(filename=None):
    '''load planner context exemplars

    Returns
    -------
    exemplars : list of dict
        entries with keys 'instruction', 'state' and 'plan_text'

    Examples
    --------
    >>> ex = load_exemplars()
    >>> ex[0]['instruction']
    'Put the red objects on the right side'
    '''
    filename = data_path('exemplars.json') if filename is None else filename
    d = load_json(filename)
    entries = d['exemplars'] if isinstance(d, dict) else d
    for i, entry in enumerate(entries):
        for key in ('instruction', 'state', 'plan_text'):
            if key not in entry:
                raise ConfigError('exemplar %i in "%s" misses the key "%s"' %(i, filename, key))
    return entries


def save_trace(trace, filename, decimate=10):
    '''writes a tracking trace as CSV, one row per kept control step

    Columns are t, then q_desired, q_actual, torque and external_torque
    per joint. Only every decimate-th sample is written.
    '''
    _check_extension(filename, ['csv'])
    arrays = trace.as_arrays()
    if len(arrays['t']) == 0:
        with open(filename, 'w', encoding='utf-8') as f:
            f.write('t\n')
        return
    n = arrays['q_desired'].shape[1]
    header = ['t']
    blocks = [arrays['t'][:, None]]
    for key in ('q_desired', 'q_actual', 'torque', 'external_torque'):
        header += ['%s_%i' %(key, j) for j in range(n)]
        blocks.append(arrays[key])
    table = np.hstack(blocks)[::max(1, int(decimate))]
    np.savetxt(filename, table, delimiter=',', header=','.join(header), comments='', fmt='%.6g')


def save_weights(weights, filename):
    '''writes grasp network weights

    The parameters go to filename (.bin, little-endian float32), the
    architecture descriptor to a JSON header next to it (.json).
    '''
    _check_extension(filename, ['bin'])
    weights.flat.astype('<f4').tofile(filename)
    header = {'schema_version': SCHEMA_VERSION,
              'dtype': 'float32-le',
              'n_params': weights.n_params,
              'descriptor': [[name, list(shape)] for name, shape in weights.descriptor]}
    write_json(header, os.path.splitext(filename)[0] + '.json')


def load_weights(filename):
    '''reads weights written by save_weights

    Examples
    --------
    >>> import tempfile
    >>> from biarmpy.grasping import init_weights
    >>> w = init_weights(seed=3)
    >>> path = os.path.join(tempfile.mkdtemp(), 'pct.bin')
    >>> save_weights(w, path)
    >>> w2 = load_weights(path)
    >>> w2.n_params == w.n_params, bool(np.allclose(w2.flat, w.flat, atol=1e-6))
    (True, True)
    '''
    _check_extension(filename, ['bin'])
    header = load_json(os.path.splitext(filename)[0] + '.json')
    _check_version(header, filename)
    flat = np.fromfile(filename, dtype='<f4').astype(np.float64)
    if len(flat) != header['n_params']:
        raise ConfigError('weights file "%s" holds %i values, header says %i'
                          %(filename, len(flat), header['n_params']))
    return PctWeights(flat, header['descriptor'])


_TYPES = {'object': dict, 'array': list, 'string': str, 'integer': int,
          'number': (int, float), 'boolean': bool, 'null': type(None)}


def validate_report(report, schema=None, path='report'):
    '''checks a run report against the shipped report schema

    Supports the 'type', 'required', 'properties', 'items' and 'enum'
    keywords, which is all the shipped schema uses.

    Returns
    -------
    errors : list of str
        empty if the report is valid

    Examples
    --------
    >>> validate_report({'schema_version': 1})[:1]
    ['report: missing key "command"']
    '''
    if schema is None:
        schema = load_json(data_path('report_schema.json'))
    errors = []
    kind = schema.get('type')
    if kind is not None:
        kinds = kind if isinstance(kind, list) else [kind]
        ok = any(isinstance(report, _TYPES[k]) and not (k in ('integer', 'number')
                                                       and isinstance(report, bool))
                 for k in kinds)
        if not ok:
            return ['%s: expected %s, got %s' %(path, '/'.join(kinds), type(report).__name__)]
    if 'enum' in schema and report not in schema['enum']:
        errors.append('%s: %r not in %s' %(path, report, schema['enum']))
    if isinstance(report, dict):
        for key in schema.get('required', []):
            if key not in report:
                errors.append('%s: missing key "%s"' %(path, key))
        for key, sub in schema.get('properties', {}).items():
            if key in report:
                errors += validate_report(report[key], sub, '%s.%s' %(path, key))
    if isinstance(report, list) and 'items' in schema:
        for i, item in enumerate(report):
            errors += validate_report(item, schema['items'], '%s[%i]' %(path, i))
    return errors
