'''
main module for biarmpy.
'''

import os
import time

import numpy as np

from . import config
from .datautils import load_robot_config, load_solver_config, load_scene, save_scene, \
    load_example_scene, load_plan_text, load_exemplars, load_weights, save_weights, \
    save_trace, write_json, write_jsonl, write_csv, validate_report, SCHEMA_VERSION
from .geometry import Pose, forward_kinematics, ee_jacobian
from .scene import make_scene, detect, find_object, get_state, get_visual_state, region_of, \
    sample_point_cloud, teach_part, update_obstacles, generate_sorting_tasks, \
    generate_bottle_tasks, generate_trash_tasks
from .trajopt import TrajOptConfig, TrajOptProblem, plan, check_solution
from .control import Simulation
from .grasping import EsConfig, GraspEnv, make_observation, pct_forward, \
    init_weights, zero_weights, es_train, random_policy_baseline
from .skills import SkillContext, SUCCESS, pick, pick_and_place, unscrew_cap, discard_trash, say
from .robolang import PickAndPlace, Say, PlannerInput, REFUSAL, parse, print_ast, interpret, \
    template_plan, match_exemplar, outcome_counts
from .visualizeutils import plot_trace, plot_plan, plot_scene, plot_training_curve, report

config.init() #initialize global conf vars

__all__ = ['load_robot_config',
           'load_solver_config',
           'load_scene',
           'save_scene',
           'load_example_scene',
           'load_plan_text',
           'load_exemplars',
           'load_weights',
           'save_weights',
           'Pose',
           'forward_kinematics',
           'ee_jacobian',
           'make_scene',
           'detect',
           'find_object',
           'get_state',
           'get_visual_state',
           'teach_part',
           'update_obstacles',
           'generate_sorting_tasks',
           'generate_bottle_tasks',
           'generate_trash_tasks',
           'TrajOptConfig',
           'TrajOptProblem',
           'plan',
           'check_solution',
           'Simulation',
           'SkillContext',
           'pick_and_place',
           'unscrew_cap',
           'discard_trash',
           'say',
           'PlannerInput',
           'parse',
           'print_ast',
           'interpret',
           'template_plan',
           'plot_trace',
           'plot_plan',
           'plot_scene',
           'plot_training_curve',
           'report',
           'make_context',
           'run_scenario',
           'save_run',
           'benchmark_sorting',
           'bench_latency',
           'train_grasp',
           'demo',
           'validate_report',
           'LATENCY_COLUMNS',
           'run_tests']

#one column per pipeline stage, in execution order
LATENCY_COLUMNS = ['planner', 'vlm_pc', 'pct', 'sqp', 'motion']


def _noise(noise):
    if noise is None or isinstance(noise, dict):
        return noise
    if noise.lower() == 'none':
        return None
    return config.get_noise_profile(noise)


def _weights(weights):
    if isinstance(weights, str):
        return zero_weights() if weights == 'default' else load_weights(weights)
    return weights


def make_context(scene, seed=0, noise='none', model=None, cfg=None, weights='default',
                 faults=None, account_held_object=False, gains='default'):
    '''builds a skill context on the shipped desk robot

    Parameters
    ----------
    scene : Scene
        scene to run in

    seed : int
        seed of detection noise and injected faults
        default : 0

    noise : str or dict
        detection noise profile name ('none', 'noisy') or probabilities
        default : 'none'

    model : BiArmModel or None
        robot model, the shipped desk robot if None

    cfg : TrajOptConfig or None
        planner settings, the module configuration if None

    weights : PctWeights, str or None
        grasp network: 'default' for the untrained network shipped with the
        package, a path to saved weights, or None for the heuristic grasp only
        default : 'default'

    faults : dict or None
        fault injection, see SkillContext

    account_held_object : bool
        plan transports with the carried object as collision geometry
        default : False

    gains : str
        gain profile of both arms
        default : 'default'

    Returns
    -------
    ctx : SkillContext

    Examples
    --------
    >>> ctx = make_context(make_scene(), seed=3, noise='noisy')
    >>> ctx.noise
    {'p_miss': 0.05, 'p_confuse': 0.06}
    >>> make_context(make_scene()).noise is None
    True
    >>> make_context(make_scene()).weights is not None
    True

    A grasp falls back from the network to the heuristic, then to the other arm

    >>> from biarmpy.scene import SceneObject, box_shape
    >>> from biarmpy.skills import pick
    >>> far = SceneObject('far block', Pose([0.45, 0.45, 0.02]), box_shape([0.04, 0.04, 0.04]), {'block'})
    >>> ctx = make_context(make_scene([far]))
    >>> out = pick(ctx, 'left-arm', 'far block')
    >>> [(e['arm'], e['detail']) for e in ctx.events
    ...  if e['event'] in ('grasp_attempt', 'switch_arm')][:4]
    [('left', 'pct'), ('left', 'heuristic'), ('right', 'far block'), ('right', 'pct')]
    >>> out.status, out.arm
    ('Success', 'right')
    '''
    model = load_robot_config() if model is None else model
    return SkillContext(model, scene, cfg=cfg, noise=_noise(noise), seed=seed,
                        weights=_weights(weights),
                        account_held_object=account_held_object, faults=faults, gains=gains)


def _run_report(command, seed, scene_name, instruction, source, ast, commands, outcomes, ctx,
                plan_time):
    timings = {'plan': plan_time}
    timings.update(ctx.timings)
    rows = [{'index': i,
             'command': name,
             'status': out.status,
             'detail': out.detail,
             'arm': out.arm,
             'object': out.object_name,
             'trace_ref': [int(out.trace_ref[0]), int(out.trace_ref[1])]}
            for i, (name, out) in enumerate(zip(commands, outcomes))]
    return {'schema_version': SCHEMA_VERSION,
            'command': command,
            'seed': int(seed),
            'scene': scene_name,
            'instruction': instruction,
            'plan_source': source,
            'plan_text': print_ast(ast),
            'outcomes': rows,
            'counts': outcome_counts(outcomes),
            'timings': timings,
            'utterances': list(ctx.utterances),
            'success': all(o.success for o in outcomes)}


def run_scenario(scene, plan_text=None, instruction=None, seed=0, noise='none', exemplars=None,
                 model=None, cfg=None, weights='default', faults=None, account_held_object=False,
                 scene_name=None, verbose=False):
    '''plans (or parses) and runs a robot program in a scene

    Exactly one of plan_text and instruction is needed. An instruction goes
    through the template planner, with the scene state as seen by detection
    and the exemplars as context.

    Parameters
    ----------
    scene : Scene
        scene to run in

    plan_text : str or None
        robot program, parsed as is

    instruction : str or None
        natural language instruction for the template planner

    seed : int
        seed of detection noise and injected faults
        default : 0

    noise : str or dict
        detection noise profile
        default : 'none'

    exemplars : list or None
        planner context exemplars, the shipped ones if None

    model, cfg, weights, faults, account_held_object :
        see make_context

    scene_name : str or None
        scene label written to the report

    verbose : bool
        print one line per statement
        default : False

    Returns
    -------
    report : dict
        run report, valid against the shipped report schema

    ctx : SkillContext
        the context after the run, holding trace and final scene

    Examples
    --------
    >>> rep, ctx = run_scenario(make_scene(), plan_text="robot.say('hello')")
    >>> rep['success'], rep['counts'], ctx.utterances
    (True, {'Success': 1}, ['hello'])
    >>> validate_report(rep)
    []

    The shipped red-objects program sorts both red objects and refuses the knife

    >>> scene, plan_text = load_example_scene('sorting')
    >>> rep, ctx = run_scenario(scene, plan_text)
    >>> rep['counts']
    {'Success': 3}
    >>> [region_of(ctx.scene, ctx.scene.object(n).pose.position) for n in ('coke can', 'small red block')]
    ['right side', 'right side']

    An instruction the planner does not understand results in a refusal

    >>> rep, _ = run_scenario(make_scene(), instruction='Dance for me')
    >>> rep['plan_source'], rep['utterances']
    ('template', ["Sorry, I don't understand."])
    '''
    if (plan_text is None) == (instruction is None):
        raise ValueError('pass either plan_text or instruction')
    ctx = make_context(scene, seed, noise, model, cfg, weights, faults, account_held_object)

    t0 = time.perf_counter()
    if plan_text is not None:
        ast = parse(plan_text)
        source = 'file'
    else:
        context = load_exemplars() if exemplars is None else exemplars
        state = get_visual_state(scene, ctx.noise, seed)
        planner_input = PlannerInput(instruction, state, context)
        source = 'exemplar' if match_exemplar(planner_input) is not None else 'template'
        ast = template_plan(planner_input, scene)
    plan_time = time.perf_counter() - t0

    outcomes = interpret(ast, ctx, verbose=verbose)
    rep = _run_report('run', seed, scene_name, instruction, source, ast,
                      [s.name for s in ast.statements], outcomes, ctx, plan_time)
    return rep, ctx


def save_run(rep, ctx, out_dir, decimate=10):
    '''writes report.json, trace.csv, events.json and the final scene to out_dir

    Returns
    -------
    paths : dict
        written file per kind
    '''
    if not os.path.isdir(out_dir):
        os.makedirs(out_dir)
    paths = {'report': os.path.join(out_dir, 'report.json'),
             'trace': os.path.join(out_dir, 'trace.csv'),
             'events': os.path.join(out_dir, 'events.json'),
             'scene': os.path.join(out_dir, 'final_scene.json')}
    write_json(rep, paths['report'])
    save_trace(ctx.sim.trace, paths['trace'], decimate)
    write_json(ctx.events, paths['events'])
    save_scene(ctx.scene, paths['scene'])
    return paths


def _task_status(outcomes):
    '''first failure class of a task, Success if there is none'''
    for o in outcomes:
        if not o.success:
            return o.status
    return SUCCESS


def _planned_objects(ast, names):
    picked = {s.object_name for s in ast.statements if isinstance(s, PickAndPlace)}
    refused = {n for n in names for s in ast.statements
               if isinstance(s, Say) and s.message == REFUSAL %n}
    return picked | refused


def benchmark_sorting(n_tasks=30, seed=0, noise='none', faults=None, account_held_object=False,
                      model=None, cfg=None, weights='default', verbose=False):
    '''runs procedurally generated sorting tasks and tallies their outcomes

    A task counts as a success when every statement of its program succeeds,
    otherwise it is counted under the first failure class it ran into. The
    plan counts as correct when it picks or refuses exactly the group
    members that are not already on the target side.

    Parameters
    ----------
    n_tasks : int
        number of tasks
        default : 30

    seed : int
        seed of task generation, noise and faults
        default : 0

    noise : str or dict
        detection noise profile
        default : 'none'

    faults : dict or None
        fault injection, e.g. {'handover_drop': 0.2, 'low_lift': True}

    account_held_object : bool
        plan transports with the carried object as collision geometry
        default : False

    model, cfg, weights :
        see make_context

    verbose : bool
        print one line per task
        default : False

    Returns
    -------
    table : dict
        'n_tasks', 'planning_correct', 'counts' (tasks per class), 'rows'
        (one dict per task) and 'wall_s'
    '''
    model = load_robot_config() if model is None else model
    t0 = time.perf_counter()
    tasks = generate_sorting_tasks(n_tasks, seed)
    counts = {}
    rows = []
    correct = 0
    for i, (scene, instruction, expected) in enumerate(tasks):
        ctx = make_context(scene, seed * 1000 + i, noise, model, cfg, weights, faults,
                           account_held_object)
        ast = template_plan(PlannerInput(instruction, get_state(scene)), scene)
        target = '%s side' %instruction.rsplit(' ', 2)[-2]
        todo = {n for n in expected if region_of(scene, scene.object(n).pose.position) != target}
        plan_ok = _planned_objects(ast, expected) == todo
        correct += int(plan_ok)
        outcomes = interpret(ast, ctx)
        status = _task_status(outcomes)
        counts[status] = counts.get(status, 0) + 1
        rows.append({'task': i,
                     'instruction': instruction,
                     'n_objects': len(scene.objects),
                     'n_statements': len(ast),
                     'plan_correct': plan_ok,
                     'status': status,
                     'statement_counts': outcome_counts(outcomes)})
        if verbose: # pragma: no cover
            print('task %i: %s -> %s' %(i, instruction, status))
    return {'n_tasks': n_tasks,
            'planning_correct': correct,
            'counts': counts,
            'rows': rows,
            'wall_s': time.perf_counter() - t0}


def _latency_run(model, cfg, weights, seed):
    scene, _ = load_example_scene('sorting')
    row = {}

    t0 = time.perf_counter()
    template_plan(PlannerInput('Put the red objects on the right side', get_state(scene)), scene)
    row['planner'] = time.perf_counter() - t0

    t0 = time.perf_counter()
    find_object(scene, 'coke can', None, seed, n_points=1024)
    row['vlm_pc'] = time.perf_counter() - t0

    obs = make_observation(sample_point_cloud(scene.object('coke can'), 1024, seed))
    t0 = time.perf_counter()
    pct_forward(weights, obs)
    row['pct'] = time.perf_counter() - t0

    #pre-grasp and grasp approaches plus the lift
    ctx = make_context(scene, seed, 'none', model, cfg)
    out = pick(ctx, 'right', 'coke can')
    row['sqp'] = ctx.timings['solve']
    row['motion'] = ctx.timings['sim']
    row['knots'] = ctx.planned_knots
    row['status'] = out.status
    return row


def bench_latency(reps=30, seed=0, model=None, cfg=None, weights=None, verbose=False):
    '''times every pipeline stage on the shipped sorting scene

    Columns are template planning, detection with segmentation, one grasp
    network forward pass on 1024 points, the SQP solves of a pick (pre-grasp
    approach, grasp approach and lift) and the simulated motion of that
    pick. One warm-up run is made first and not counted.

    Returns
    -------
    result : dict
        'rows' (seconds per column and run, plus planned knots and pick
        status) and 'mean' (seconds per column)
    '''
    if reps < 1:
        raise ValueError('reps needs to be >= 1, got %i' %reps)
    model = load_robot_config() if model is None else model
    weights = init_weights(seed) if weights is None else weights
    _latency_run(model, cfg, weights, seed)
    rows = []
    for i in range(reps):
        rows.append(_latency_run(model, cfg, weights, seed + i + 1))
        if verbose: # pragma: no cover
            print('run %i: %s' %(i, ', '.join('%s %.3fs' %(c, rows[-1][c]) for c in LATENCY_COLUMNS)))
    mean = {c: float(np.mean([r[c] for r in rows])) for c in LATENCY_COLUMNS}
    return {'rows': rows, 'mean': mean}


def train_grasp(iters=200, l=50, sigma=0.02, eta=0.02, tau=0.3, n_episodes=10, seed=0,
                eval_episodes=200, out_dir=None, verbose=False):
    '''trains the grasp network with evolution strategies

    Parameters
    ----------
    iters, l, sigma, eta, tau : see EsConfig

    n_episodes : int
        episodes per reward evaluation
        default : 10

    seed : int
        seed of initial weights and training
        default : 0

    eval_episodes : int
        episodes of the final evaluation and of the random baseline
        default : 200

    out_dir : str or None
        if given, writes pct.bin (+ header), curve.csv and train_log.jsonl

    verbose : bool
        print training progress
        default : False

    Returns
    -------
    weights : PctWeights
        trained weights

    summary : dict
        'curve', 'final_reward', 'baseline' and 'wall_s'

    Examples
    --------
    >>> w, summary = train_grasp(iters=2, l=2, n_episodes=2, eval_episodes=5)
    >>> len(summary['curve']), 0.0 <= summary['final_reward'] <= 1.0
    (2, True)
    '''
    t0 = time.perf_counter()
    env = GraspEnv(n_episodes)
    log = []
    cfg = EsConfig(l=l, sigma=sigma, eta=eta, tau=tau, iters=iters, seed=seed)
    weights, curve = es_train(env, init_weights(seed), cfg, log, verbose)
    summary = {'curve': [float(c) for c in curve],
               'final_reward': env.evaluate(weights, eval_episodes),
               'baseline': random_policy_baseline(eval_episodes, seed),
               'wall_s': time.perf_counter() - t0}
    if out_dir is not None:
        if not os.path.isdir(out_dir):
            os.makedirs(out_dir)
        save_weights(weights, os.path.join(out_dir, 'pct.bin'))
        write_csv([{'iter': i, 'mean_reward': c} for i, c in enumerate(summary['curve'])],
                  os.path.join(out_dir, 'curve.csv'))
        write_jsonl(log, os.path.join(out_dir, 'train_log.jsonl'))
    return weights, summary


def demo(name, seed=0, n_twists=None, gains=None, model=None, cfg=None, verbose=False):
    '''runs the shipped bottle or trash scenario end-to-end

    Parameters
    ----------
    name : str
        'bottle' or 'trash'

    n_twists : int or None
        twists for the bottle, the shipped program's count if None

    gains : str or None
        bottle: gain profile of the holding arm, trash: of the pushing arm

    model, cfg :
        see make_context

    Returns
    -------
    report : dict
        run report with an extra 'demo' entry: 'cap_detached' for the
        bottle, 'disposed' (items inside the can) for the trash

    ctx : SkillContext
        context after the run
    '''
    if name not in ('bottle', 'trash'):
        raise LookupError('unknown demo "%s", available are: bottle, trash' %name)
    scene, plan_text = load_example_scene(name)
    ast = parse(plan_text)
    stmt = ast.statements[0]
    if name == 'bottle':
        ctx = make_context(scene, seed, model=model, cfg=cfg)
        t0 = time.perf_counter()
        twists = stmt.n_twists if n_twists is None else n_twists
        out = unscrew_cap(ctx, stmt.container, stmt.cap, twists,
                          hold_gains='compliant' if gains is None else gains)
        container = ctx.scene.object(stmt.container)
        extra = {'cap_detached': 'cap' not in container.part_labels, 'n_twists': twists}
        outcomes = [out]
    else:
        ctx = make_context(scene, seed, model=model, cfg=cfg)
        t0 = time.perf_counter()
        outcomes = discard_trash(ctx, stmt.push_arm, stmt.place_arm, stmt.lid, stmt.pedal,
                                 list(stmt.items), 'stiff' if gains is None else gains)
        can = ctx.scene.object('trash can').bounding_box()
        extra = {'disposed': sum(bool(can.contains(ctx.scene.object(i).pose.position))
                                 for i in stmt.items),
                 'items': len(stmt.items)}
    if verbose: # pragma: no cover
        print('%s demo: %s in %.1f s' %(name, ', '.join(o.status for o in outcomes),
                                       time.perf_counter() - t0))
    rep = _run_report('demo', seed, name, None, 'file', ast, [stmt.name] * len(outcomes),
                      outcomes, ctx, 0.0)
    rep['demo'] = extra
    return rep, ctx


def run_tests(verbose=0):
    '''
    function to run doctest on all of biarmpy
    '''

    from . import config, exceptions, geometry, scene, qpsolver, trajopt, control, grasping, \
        skills, robolang, datautils, acceptance, visualizeutils, cli
    import doctest

    modules = [('config', config),
               ('exceptions', exceptions),
               ('geometry', geometry),
               ('scene', scene),
               ('qpsolver', qpsolver),
               ('trajopt', trajopt),
               ('control', control),
               ('grasping', grasping),
               ('skills', skills),
               ('robolang', robolang),
               ('datautils', datautils),
               ('acceptance suites', acceptance),
               ('visualization utils', visualizeutils),
               ('command line interface', cli)]

    succeeded = 0
    for name, module in modules:
        print('testing %s' %name)
        results = doctest.testmod(module, verbose=verbose)
        if results.failed == 0: # pragma: no cover
            print('success!')
            succeeded += 1

    print('testing main processing pipeline')
    from . import biarmpy as bptester
    results = doctest.testmod(bptester, verbose=verbose)
    if results.failed == 0: # pragma: no cover
        print('success!')
        succeeded += 1

    if succeeded == len(modules) + 1: # pragma: no cover
        print('all tests passed, ready to go!')
    else:
        print('some tests failed...')
