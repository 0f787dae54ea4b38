'''
Functions that help visualize results
'''

import matplotlib.pyplot as plt
from matplotlib.patches import Rectangle, Circle
import numpy as np

from .geometry import forward_kinematics

__all__ = ['plot_trace',
           'plot_plan',
           'plot_scene',
           'plot_training_curve',
           'report']


def plot_trace(trace, joints=None, show=True, figsize=None,
               title='Joint tracking'): # pragma: no cover
    '''plots desired and actual joint positions and the applied torques

    Parameters
    ----------
    trace : TrackingTrace
        trace recorded by a Simulation

    joints : list or None
        joint indices to plot, all if None

    show : bool
        when False, function will return a plot object rather than display the results.
        default : True

    figsize: tuple
        Set dimensions of image in inches like in matplotlib. figsize=(x, y)
        default: None => (6.4, 4.8)

    title : string
        title for the plot.

    Returns
    -------
    out : matplotlib plot object
        only returned if show == False.

    Examples
    --------
    >>> from biarmpy.control import Simulation
    >>> from biarmpy.geometry import test_biarm
    >>> from biarmpy.scene import make_scene
    >>> model = test_biarm()
    >>> sim = Simulation(model, make_scene(regions={}, workspace=model.workspace))
    >>> q = model.home_configuration()
    >>> _ = sim.execute(np.vstack([q, q + 0.05]), 0.1)
    >>> fig = plot_trace(sim.trace, joints=[0, 1], show=False)
    '''
    arrays = trace.as_arrays()
    t = arrays['t']
    joints = range(arrays['q_desired'].shape[1]) if joints is None else joints

    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=figsize)
    ax1.set_title(title)
    for j in joints:
        line, = ax1.plot(t, arrays['q_desired'][:, j], linestyle='--', label='q%i desired' %j)
        ax1.plot(t, arrays['q_actual'][:, j], color=line.get_color(), label='q%i actual' %j)
        ax2.plot(t, arrays['torque'][:, j], color=line.get_color(), label='tau%i' %j)
    ax1.set_ylabel('Joint position (rad)')
    ax2.set_ylabel('Torque (N*m)')
    ax2.set_xlabel('Time (s)')

    #mark events
    for event in trace.events:
        if event['event'] in ('attached', 'dropped', 'dropped_in', 'cap_removed', 'lid_opened'):
            ax1.axvline(event['t'], color='gray', alpha=0.4)
    ax1.legend(loc=4, framealpha=0.6, fontsize='small')

    if show:
        fig.show()
    else:
        return fig


def plot_plan(result, dt, show=True, figsize=None, title='Planned joint trajectory'): # pragma: no cover
    '''plots the knots of a plan, meta-step boundaries as vertical lines

    Parameters
    ----------
    result : PlanResult
        result of trajopt.plan

    dt : float
        knot spacing in seconds

    show : bool
        when False, function will return a plot object rather than display the results.
        default : True
    '''
    q = result.q_traj()
    t = np.arange(len(q)) * dt

    fig, ax = plt.subplots(figsize=figsize)
    ax.set_title('%s (%s)' %(title, result.status))
    for j in range(q.shape[1]):
        ax.plot(t, q[:, j], label='q%i' %j)
    boundary = 0
    for ms in result.meta_steps[:-1]:
        boundary += len(ms.qdot_traj)
        ax.axvline(boundary * dt, color='gray', alpha=0.5)
    ax.set_xlabel('Time (s)')
    ax.set_ylabel('Joint position (rad)')
    ax.legend(loc=4, framealpha=0.6, fontsize='small', ncol=2)

    if show:
        fig.show()
    else:
        return fig


def plot_scene(scene, model=None, q=None, show=True, figsize=(6, 6),
               title='Scene (top view)'): # pragma: no cover
    '''top view of regions, object boxes and, if given, the tool points

    Parameters
    ----------
    scene : Scene
        scene to draw

    model : BiArmModel or None
        robot model, needed to draw the arms

    q : 1d array or None
        configuration of both arms, the home configuration if None

    show : bool
        when False, function will return a plot object rather than display the results.
        default : True

    Examples
    --------
    >>> from biarmpy.datautils import load_example_scene
    >>> scene, _ = load_example_scene('sorting')
    >>> fig = plot_scene(scene, show=False)
    '''
    fig, ax = plt.subplots(figsize=figsize)
    ax.set_title(title)

    for name, box in sorted(scene.regions.items()):
        lo, hi = box.min_corner, box.max_corner
        ax.add_patch(Rectangle(lo[:2], hi[0] - lo[0], hi[1] - lo[1], facecolor='green', alpha=0.1))
        ax.text(box.center()[0], hi[1], name, ha='center', va='bottom', fontsize='small')

    for obj in scene.objects:
        box = obj.bounding_box()
        lo, hi = box.min_corner, box.max_corner
        color = 'red' if 'sharp' in obj.attributes else 'steelblue'
        ax.add_patch(Rectangle(lo[:2], hi[0] - lo[0], hi[1] - lo[1], facecolor=color, alpha=0.5))
        ax.text(obj.pose.position[0], obj.pose.position[1], obj.name, ha='center',
                va='center', fontsize='x-small')

    if model is not None:
        q = model.home_configuration() if q is None else q
        for arm_id, q_arm in zip(('left', 'right'), model.split(q)):
            arm = model.arm(arm_id)
            base = arm.base_pose.position
            tool = forward_kinematics(arm, q_arm).position
            ax.plot([base[0], tool[0]], [base[1], tool[1]], color='black', alpha=0.6)
            ax.add_patch(Circle(tool[:2], 0.015, color='black'))

    ws = scene.workspace
    ax.set_xlim(ws.min_corner[0], ws.max_corner[0])
    ax.set_ylim(ws.min_corner[1], ws.max_corner[1])
    ax.set_aspect('equal')
    ax.set_xlabel('x (m)')
    ax.set_ylabel('y (m)')

    if show:
        fig.show()
    else:
        return fig


def plot_training_curve(curve, baseline=None, window=10, show=True, figsize=None,
                        title='Grasp network training'): # pragma: no cover
    '''plots mean reward per iteration and its moving average

    Parameters
    ----------
    curve : 1d array or list
        mean reward of every iteration

    baseline : float or None
        random policy success rate, drawn as a horizontal line

    window : int
        moving average window in iterations
        default : 10
    '''
    curve = np.asarray(curve, dtype=np.float64)
    fig, ax = plt.subplots(figsize=figsize)
    ax.set_title(title)
    ax.plot(curve, alpha=0.4, label='mean reward')
    if len(curve) >= window:
        smooth = np.convolve(curve, np.ones(window) / window, mode='valid')
        ax.plot(np.arange(window - 1, len(curve)), smooth, label='%i-iteration mean' %window)
    if baseline is not None:
        ax.axhline(baseline, color='gray', linestyle='--', label='random policy')
    ax.set_xlabel('Iteration')
    ax.set_ylabel('Reward')
    ax.legend(loc=4, framealpha=0.6)

    if show:
        fig.show()
    else:
        return fig


def report(run_report, outfile=None, csvfile=False):
    '''Print a run report in a readable format

    By default prints to stdout, but writes to file if passed a file name
    to outfile. Uses a simple tabular format by default, or CSV format if
    csvfile is True.

    Examples
    --------
    >>> rep = {'outcomes': [{'index': 0, 'command': 'say', 'status': 'Success',
    ...                      'detail': 'hello'}],
    ...        'counts': {'Success': 1},
    ...        'timings': {'plan': 0.001, 'perceive': 0.0, 'grasp': 0.0, 'solve': 0.0, 'sim': 0.0},
    ...        'success': True}
    >>> report(rep)
    #   Command         Status              Detail
    0   say             Success             hello
    <BLANKLINE>
    Status              Count
    Success             1
    <BLANKLINE>
    Module              Time (s)
    plan                0.001
    perceive            0.000
    grasp               0.000
    solve               0.000
    sim                 0.000
    <BLANKLINE>
    all statements succeeded
    '''
    if csvfile:
        row_fmt, pair_fmt, time_fmt = '{},{},{},{}\n', '{},{}\n', '{},{:.6f}\n'
    else:
        row_fmt, pair_fmt, time_fmt = '{:<3} {:<15} {:<19} {}\n', '{:<19} {}\n', '{:<19} {:.3f}\n'

    out_str = row_fmt.format('#', 'Command', 'Status', 'Detail')
    for o in run_report['outcomes']:
        out_str += row_fmt.format(o['index'], o['command'], o['status'],
                                  o['detail'].replace('\n', ' '))

    out_str += '\n' + pair_fmt.format('Status', 'Count')
    for status, n in sorted(run_report['counts'].items()):
        out_str += pair_fmt.format(status, n)

    out_str += '\n' + pair_fmt.format('Module', 'Time (s)')
    for module, seconds in run_report['timings'].items():
        out_str += time_fmt.format(module, seconds)

    if run_report['success']:
        out_str += '\nall statements succeeded'
    else:
        failed = len(run_report['outcomes']) - run_report['counts'].get('Success', 0)
        out_str += '\n%i of %i statements failed' %(failed, len(run_report['outcomes']))

    if outfile is None:
        print(out_str)
    else:
        with open(outfile, 'w') as outfh:
            outfh.write(out_str)
