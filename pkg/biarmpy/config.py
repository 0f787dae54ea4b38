'''
config file for biarmpy

Module-level settings shared by the planner, the simulator and the skills.
They are (re)set by init(), which runs once on import. Change them by
assigning to the module attributes, e.g. ``bp.config.eps_p = 0.002``.
'''

import numpy as np

__all__ = ['init',
           'get_gains',
           'get_noise_profile',
           'trajopt_defaults']


def init(): # pragma: no cover
    #planner defaults
    global horizon
    horizon = 10
    global plan_dt
    plan_dt = 0.1
    global max_meta_steps
    max_meta_steps = 10
    global eps_p
    eps_p = 0.005
    global eps_r
    eps_r = 0.05
    global sqp_max_iters
    sqp_max_iters = 12
    global qp_tolerance
    qp_tolerance = 1e-4
    global trust_region
    trust_region = 0.15
    global collision_margin
    collision_margin = 0.005
    global goal_weights
    goal_weights = {'goal_p': 100.0, 'goal_r': 10.0, 'effort': 0.1}

    #control defaults
    global control_dt
    control_dt = 0.002
    global joint_inertia
    joint_inertia = 0.5
    global torque_limit
    torque_limit = 150.0
    global gain_profiles
    gain_profiles = {'stiff': 1000.0, 'default': 400.0, 'compliant': 100.0}

    #skill constants
    global pregrasp_offset
    pregrasp_offset = 0.10
    global lift_height
    lift_height = 0.15
    global handover_clearance
    handover_clearance = 0.06
    global palm_offset
    palm_offset = 0.025
    global place_hover
    place_hover = 0.10
    global attach_radius
    attach_radius = 0.02
    global pedal_force_threshold
    pedal_force_threshold = 5.0
    global pedal_depth
    pedal_depth = 0.01
    global twist_threshold
    twist_threshold = 3 * np.pi
    global release_factor
    release_factor = 0.2
    global max_plan_violation
    max_plan_violation = 1e-3

    #perception
    global noise_profiles
    noise_profiles = {'none': {'p_miss': 0.0, 'p_confuse': 0.0},
                      'noisy': {'p_miss': 0.05, 'p_confuse': 0.06}}


def get_gains(profile, n_joints=6):
    '''returns compliance gains for a named profile

    Function that looks up the stiffness of a named gain profile and
    returns per-joint stiffness and critically damped damping,
    kd = 2 * sqrt(kp * I), with I the configured joint inertia.

    Parameters
    ----------
    profile : str or float
        name of the profile ('stiff', 'default', 'compliant') or a stiffness
        value in N*m/rad for a custom profile.

    n_joints : int
        number of joints to return gains for.
        default : 6

    Returns
    -------
    gains : dict
        dictionary with keys 'kp', 'kd' (arrays of length n_joints)
        and 'profile_name'.

    Examples
    --------
    >>> import biarmpy as bp
    >>> g = bp.config.get_gains('default', n_joints=2)
    >>> g['kp']
    array([400., 400.])
    >>> '%.3f' %g['kd'][0]
    '28.284'

    Custom stiffness values are accepted as well

    >>> g = bp.config.get_gains(50.0, n_joints=1)
    >>> g['profile_name']
    'custom'
    '''
    if isinstance(profile, str):
        try:
            kp = gain_profiles[profile.lower()]
        except KeyError:
            raise LookupError('unknown gain profile "%s", available are: %s'
                              %(profile, ', '.join(sorted(gain_profiles.keys()))))
        name = profile.lower()
    else:
        kp = float(profile)
        name = 'custom'

    if kp < 0:
        raise ValueError('stiffness needs to be >= 0, got %s' %kp)

    kp = np.full(n_joints, kp)
    kd = 2.0 * np.sqrt(kp * joint_inertia)
    return {'kp': kp, 'kd': kd, 'profile_name': name}


def get_noise_profile(name):
    '''returns detection noise probabilities

    Parameters
    ----------
    name : str
        'none' (ground truth perception) or 'noisy' (miss and confusion
        rates approximating the reported perception failure rate).

    Returns
    -------
    profile : dict
        dictionary with keys 'p_miss' and 'p_confuse'

    Examples
    --------
    >>> import biarmpy as bp
    >>> bp.config.get_noise_profile('noisy')
    {'p_miss': 0.05, 'p_confuse': 0.06}
    '''
    try:
        return dict(noise_profiles[name.lower()])
    except KeyError:
        raise LookupError('unknown noise profile "%s", available are: %s'
                          %(name, ', '.join(sorted(noise_profiles.keys()))))


def trajopt_defaults():
    '''returns the current planner settings as a dict

    Examples
    --------
    >>> import biarmpy as bp
    >>> d = bp.config.trajopt_defaults()
    >>> d['horizon'], d['dt'], d['max_meta_steps']
    (10, 0.1, 10)
    '''
    return {'horizon': horizon,
            'dt': plan_dt,
            'max_meta_steps': max_meta_steps,
            'eps_p': eps_p,
            'eps_r': eps_r,
            'sqp_max_iters': sqp_max_iters,
            'qp_tolerance': qp_tolerance,
            'trust_region': trust_region,
            'collision_margin': collision_margin,
            'weights': dict(goal_weights)}
