'''
command line interface

    python -m biarmpy run --example sorting
    python -m biarmpy run scene.json --instruction "Move the metal objects to the left side"
    python -m biarmpy benchmark-sorting --n 30 --noise noisy --handover-drop 0.1
    python -m biarmpy bench-latency --reps 30 --out-dir out
    python -m biarmpy train-grasp --iters 200 --out-dir out
    python -m biarmpy demo bottle
    python -m biarmpy parse plan.robot
    python -m biarmpy acceptance telescoping

Exit codes: 0 success, 1 a statement or task failed, 2 the robot program
does not parse, 3 an input file or setting is invalid.
'''

import argparse
import os
import sys

from . import acceptance
from .biarmpy import run_scenario, save_run, benchmark_sorting, bench_latency, \
    train_grasp, demo, LATENCY_COLUMNS
from .datautils import load_robot_config, load_solver_config, load_scene, load_example_scene, \
    load_plan_text, load_exemplars, write_json, write_csv, dumps_json, \
    EXAMPLES
from .exceptions import ParseError, ConfigError, IncorrectFileType
from .robolang import parse, print_ast
from .visualizeutils import report

__all__ = ['build_parser',
           'main',
           'SUITES']

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_PARSE = 2
EXIT_INPUT = 3

#full acceptance sizes are the suite defaults
SUITES = {'qp': lambda args: acceptance.qp_oracle_suite(seed=args.seed),
          'jacobian': lambda args: acceptance.jacobian_suite(seed=args.seed),
          'telescoping': lambda args: acceptance.telescoping_suite(seed=args.seed,
                                                                   verbose=args.verbose),
          'compliance': lambda args: acceptance.compliance_suite(),
          'handover': lambda args: acceptance.handover_torque_suite(),
          'tracking': lambda args: acceptance.tracking_suite(seed=args.seed),
          'attachment': lambda args: acceptance.attachment_suite(seed=args.seed),
          'pct': lambda args: acceptance.pct_property_suite(seed=args.seed),
          'es': lambda args: acceptance.es_suite(verbose=args.verbose),
          'dsl': lambda args: acceptance.dsl_suite(seed=args.seed),
          'safety': lambda args: acceptance.safety_suite(seed=args.seed),
          'sorting': lambda args: acceptance.sorting_suite(seed=args.seed, verbose=args.verbose)}


def _common(parser):
    parser.add_argument('--seed', type=int, default=0, help='seed of every random draw')
    parser.add_argument('--config', default=None,
                        help='solver settings (JSON), the shipped defaults if omitted')
    parser.add_argument('--robot', default=None,
                        help='robot model (JSON), the shipped desk robot if omitted')
    parser.add_argument('--noise', default='none', help='detection noise profile: none, noisy')
    parser.add_argument('--out-dir', default=None, help='directory for reports and traces')
    parser.add_argument('--json', action='store_true', help='print the result as JSON')
    parser.add_argument('--verbose', action='store_true', help='print progress')


def build_parser():
    '''argument parser of all subcommands

    >>> args = build_parser().parse_args(['run', '--example', 'bottle', '--seed', '4'])
    >>> args.command, args.example, args.seed, args.noise
    ('run', 'bottle', 4, 'none')
    >>> build_parser().parse_args(['demo', 'trash']).name
    'trash'
    '''
    parser = argparse.ArgumentParser(prog='biarmpy',
                                     description='bimanual desk robot planning and simulation')
    sub = parser.add_subparsers(dest='command')
    sub.required = True

    run = sub.add_parser('run', help='run a robot program or an instruction in a scene')
    run.add_argument('scene', nargs='?', default=None, help='scene file (JSON)')
    run.add_argument('--example', choices=sorted(EXAMPLES), default=None,
                     help='shipped example scene, with its program unless --instruction is given')
    run.add_argument('--plan', default=None, help='robot program file (.robot)')
    run.add_argument('--instruction', default=None, help='instruction for the template planner')
    run.add_argument('--exemplars', default=None, help='planner context exemplars (JSON)')
    run.add_argument('--weights', default='default',
                     help='grasp network weights (.bin), "default" for the shipped network, "none" for the heuristic grasp')
    run.add_argument('--account-held-object', action='store_true',
                     help='plan transports with the carried object as collision geometry')
    _common(run)
    run.set_defaults(func=cmd_run)

    bench = sub.add_parser('benchmark-sorting', help='procedural sorting benchmark')
    bench.add_argument('--n', type=int, default=30, help='number of tasks')
    bench.add_argument('--handover-drop', type=float, default=0.0,
                       help='probability of dropping the object at a handover')
    bench.add_argument('--low-lift', action='store_true',
                       help='lift only 1 cm after grasping')
    bench.add_argument('--account-held-object', action='store_true',
                       help='plan transports with the carried object as collision geometry')
    _common(bench)
    bench.set_defaults(func=cmd_benchmark_sorting)

    latency = sub.add_parser('bench-latency', help='time every pipeline stage')
    latency.add_argument('--reps', type=int, default=30, help='timed runs after the warm-up')
    _common(latency)
    latency.set_defaults(func=cmd_bench_latency)

    train = sub.add_parser('train-grasp', help='train the grasp network')
    train.add_argument('--iters', type=int, default=200)
    train.add_argument('--l', type=int, default=50, help='direction pairs per iteration')
    train.add_argument('--sigma', type=float, default=0.02)
    train.add_argument('--eta', type=float, default=0.02)
    train.add_argument('--tau', type=float, default=0.3, help='fraction of kept directions')
    train.add_argument('--episodes', type=int, default=10, help='episodes per evaluation')
    _common(train)
    train.set_defaults(func=cmd_train_grasp)

    dem = sub.add_parser('demo', help='run the shipped bottle or trash scenario')
    dem.add_argument('name', choices=['bottle', 'trash'])
    dem.add_argument('--n-twists', type=int, default=None)
    dem.add_argument('--gains', default=None,
                     help='gain profile of the holding (bottle) or pushing (trash) arm')
    _common(dem)
    dem.set_defaults(func=cmd_demo)

    check = sub.add_parser('parse', help='syntax check of a robot program')
    check.add_argument('plan', help='robot program file (.robot)')
    _common(check)
    check.set_defaults(func=cmd_parse)

    suites = sub.add_parser('acceptance', help='run property suites at full size')
    suites.add_argument('suite', choices=sorted(SUITES) + ['all'])
    _common(suites)
    suites.set_defaults(func=cmd_acceptance)
    return parser


def _setup(args):
    '''applies --config and --robot, returns (model, cfg)'''
    cfg = load_solver_config(args.config)
    model = load_robot_config(args.robot)
    return model, cfg


def _out_dir(args):
    if args.out_dir is not None and not os.path.isdir(args.out_dir):
        os.makedirs(args.out_dir)
    return args.out_dir


def _emit(args, result, text=None):
    if args.json or text is None:
        print(dumps_json(result))
    else:
        print(text)


def cmd_run(args):
    model, cfg = _setup(args)
    if (args.scene is None) == (args.example is None):
        raise ConfigError('pass either a scene file or --example')
    if args.example is not None:
        scene, plan_text = load_example_scene(args.example)
        scene_name = args.example
    else:
        scene, plan_text = load_scene(args.scene), None
        scene_name = args.scene
    if args.plan is not None:
        plan_text = load_plan_text(args.plan)
    if args.instruction is not None:
        plan_text = None
    elif plan_text is None:
        raise ConfigError('pass a program with --plan or an --instruction')
    exemplars = load_exemplars(args.exemplars)
    weights = None if args.weights.lower() == 'none' else args.weights

    rep, ctx = run_scenario(scene, plan_text, args.instruction, args.seed, args.noise, exemplars,
                            model, cfg, weights, account_held_object=args.account_held_object,
                            scene_name=scene_name, verbose=args.verbose)
    if _out_dir(args) is not None:
        save_run(rep, ctx, args.out_dir)
    if args.json:
        print(dumps_json(rep))
    else:
        report(rep)
    return EXIT_OK if rep['success'] else EXIT_FAILED


def cmd_benchmark_sorting(args):
    model, cfg = _setup(args)
    faults = {'handover_drop': args.handover_drop, 'low_lift': args.low_lift}
    table = benchmark_sorting(args.n, args.seed, args.noise, faults, args.account_held_object,
                              model, cfg, verbose=args.verbose)
    if _out_dir(args) is not None:
        write_json(table, os.path.join(args.out_dir, 'benchmark_sorting.json'))
        write_csv(table['rows'], os.path.join(args.out_dir, 'benchmark_sorting.csv'),
                  ['task', 'instruction', 'n_objects', 'n_statements', 'plan_correct', 'status'])
    lines = ['%-20s %i' %(status, n) for status, n in sorted(table['counts'].items())]
    text = '\n'.join(['tasks                %i' %table['n_tasks'],
                      'plans correct        %i' %table['planning_correct']] + lines)
    _emit(args, table, text)
    return EXIT_OK if table['counts'].get('Success', 0) == table['n_tasks'] else EXIT_FAILED


def cmd_bench_latency(args):
    model, cfg = _setup(args)
    result = bench_latency(args.reps, args.seed, model, cfg, verbose=args.verbose)
    if _out_dir(args) is not None:
        write_csv(result['rows'], os.path.join(args.out_dir, 'latency.csv'),
                  LATENCY_COLUMNS + ['knots', 'status'])
    text = '\n'.join('%-8s %.4f s' %(c, result['mean'][c]) for c in LATENCY_COLUMNS)
    _emit(args, result['mean'], text)
    return EXIT_OK


def cmd_train_grasp(args):
    _, summary = train_grasp(args.iters, args.l, args.sigma, args.eta, args.tau, args.episodes,
                             args.seed, out_dir=_out_dir(args), verbose=args.verbose)
    text = 'final reward %.3f, random baseline %.3f' %(summary['final_reward'], summary['baseline'])
    _emit(args, summary, text)
    return EXIT_OK


def cmd_demo(args):
    model, cfg = _setup(args)
    rep, ctx = demo(args.name, args.seed, args.n_twists, args.gains, model, cfg, args.verbose)
    if _out_dir(args) is not None:
        save_run(rep, ctx, args.out_dir)
    if args.json:
        print(dumps_json(rep))
    else:
        report(rep)
    return EXIT_OK if rep['success'] else EXIT_FAILED


def cmd_parse(args):
    '''prints the normalized program

    >>> from biarmpy.datautils import data_path
    >>> main(['parse', data_path('plan_bottle.robot')])
    robot.unscrew_cap('bottle', 'cap', 6)
    0
    >>> import tempfile
    >>> bad = os.path.join(tempfile.mkdtemp(), 'bad.robot')
    >>> with open(bad, 'w') as f:
    ...     _ = f.write("robot.fly('away')")
    >>> main(['parse', bad])
    2
    '''
    ast = parse(load_plan_text(args.plan))
    _emit(args, {'statements': len(ast), 'plan_text': print_ast(ast)}, print_ast(ast).rstrip('\n'))
    return EXIT_OK


def cmd_acceptance(args):
    names = sorted(SUITES) if args.suite == 'all' else [args.suite]
    results = {}
    for name in names:
        if args.verbose: # pragma: no cover
            print('running %s' %name)
        results[name] = SUITES[name](args)
    if _out_dir(args) is not None:
        write_json(results, os.path.join(args.out_dir, 'acceptance.json'))
    _emit(args, results)
    return EXIT_OK


def main(argv=None):
    '''runs a subcommand, returns the exit code'''
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as error:
        print('parse error: %s' %error, file=sys.stderr)
        return EXIT_PARSE
    except (OSError, ConfigError, IncorrectFileType, LookupError, ValueError) as error:
        print('error: %s' %error, file=sys.stderr)
        return EXIT_INPUT
