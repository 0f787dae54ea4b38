'''
robot command language: parser, printer, interpreter and template planner

Programs are straight-line calls on the ``robot`` object, one per line:

    # Put the red objects on the right side
    robot.pick_and_place('coke can', 'right side')
    robot.say('Sorry, not moving red knife
    since its dangerous.')

Arguments are single-quoted strings (escapes \\' and \\\\, may span lines),
positive integers and bracketed string lists.
'''

from dataclasses import dataclass, field
import re

import numpy as np

from .exceptions import ParseError, SkillPreconditionError
from .scene import SORTING_GROUPS, region_of
from .trajopt import arm_key
from .skills import SUCCESS, INFEASIBLE, pick_and_place, unscrew_cap, \
    discard_trash, say, go_home

__all__ = ['PickAndPlace',
           'UnscrewCap',
           'DiscardTrash',
           'Say',
           'PlanAst',
           'PlannerInput',
           'parse',
           'print_ast',
           'interpret',
           'template_plan',
           'match_exemplar',
           'safety_filter',
           'group_attribute',
           'outcome_counts',
           'COMMANDS',
           'ARM_IDS']

ARM_IDS = ('left-arm', 'right-arm')
REFUSAL = 'Sorry, not moving %s \nsince its dangerous.'
NOT_UNDERSTOOD = "Sorry, I don't understand."
DEFAULT_TWISTS = 6


def _check_text(value, what):
    if not isinstance(value, str) or not value:
        raise ValueError('%s needs to be a non-empty string, got %r' %(what, value))


@dataclass
class PickAndPlace:
    object_name: str
    region: str
    span: tuple = field(default=None, compare=False, repr=False)
    name = 'pick_and_place'

    def __post_init__(self):
        _check_text(self.object_name, 'object')
        _check_text(self.region, 'region')

    def args(self):
        return (self.object_name, self.region)


@dataclass
class UnscrewCap:
    container: str
    cap: str
    n_twists: int
    span: tuple = field(default=None, compare=False, repr=False)
    name = 'unscrew_cap'

    def __post_init__(self):
        _check_text(self.container, 'container')
        _check_text(self.cap, 'cap')
        if int(self.n_twists) < 1:
            raise ValueError('n_twists needs to be >= 1, got %s' %self.n_twists)
        self.n_twists = int(self.n_twists)

    def args(self):
        return (self.container, self.cap, self.n_twists)


@dataclass
class DiscardTrash:
    push_arm: str
    place_arm: str
    lid: str
    pedal: str
    items: tuple
    span: tuple = field(default=None, compare=False, repr=False)
    name = 'discard_trash'

    def __post_init__(self):
        for arm in (self.push_arm, self.place_arm):
            if arm not in ARM_IDS:
                raise ValueError('arm id needs to be "left-arm" or "right-arm", got %r' %arm)
        _check_text(self.lid, 'lid')
        _check_text(self.pedal, 'pedal')
        self.items = tuple(self.items)
        if not self.items:
            raise ValueError('discard_trash needs at least one item')
        for item in self.items:
            _check_text(item, 'item')

    def args(self):
        return (self.push_arm, self.place_arm, self.lid, self.pedal, list(self.items))


@dataclass
class Say:
    message: str
    span: tuple = field(default=None, compare=False, repr=False)
    name = 'say'

    def __post_init__(self):
        _check_text(self.message, 'message')

    def args(self):
        return (self.message,)


#command name -> (node class, argument kinds)
COMMANDS = {'pick_and_place': (PickAndPlace, ('str', 'str')),
            'unscrew_cap': (UnscrewCap, ('str', 'str', 'int')),
            'discard_trash': (DiscardTrash, ('arm', 'arm', 'str', 'str', 'list')),
            'say': (Say, ('str',))}


@dataclass
class PlanAst:
    '''ordered statements of a robot program'''
    statements: list = field(default_factory=list)

    def __len__(self):
        return len(self.statements)


@dataclass(eq=False)
class PlannerInput:
    '''instruction, textual scene state and (instruction, state, plan_text) exemplars'''
    instruction: str
    state: str = ''
    context: list = field(default_factory=list)

    def __post_init__(self):
        if not self.instruction or not self.instruction.strip():
            raise ValueError('instruction needs to be a non-empty string')


class _Cursor(object):
    '''read position in the source with 1-based line and column'''

    def __init__(self, text):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def peek(self):
        return self.text[self.pos] if self.pos < len(self.text) else ''

    def advance(self):
        if self.pos >= len(self.text):
            return
        if self.text[self.pos] == '\n':
            self.line += 1
            self.col = 1
        else:
            self.col += 1
        self.pos += 1

    def error(self, expected, found=None):
        return ParseError(self.line, self.col, expected, _describe(self.peek()) if found is None else found)


def _describe(ch):
    if ch == '':
        return 'end of input'
    if ch == '\n':
        return 'end of line'
    return repr(ch)


def _skip_spaces(cur, newlines=False):
    while cur.peek() in (' ', '\t', '\r') or (newlines and cur.peek() == '\n'):
        cur.advance()


def _skip_blank(cur):
    #blank lines and comment lines between statements
    while True:
        _skip_spaces(cur, newlines=True)
        if cur.peek() != '#':
            return
        while cur.peek() not in ('\n', ''):
            cur.advance()


def _expect(cur, ch):
    if cur.peek() != ch:
        raise cur.error(repr(ch))
    cur.advance()


def _identifier(cur):
    at = (cur.line, cur.col)
    chars = []
    while cur.peek() != '' and (cur.peek().isalnum() or cur.peek() == '_') and cur.peek().isascii():
        chars.append(cur.peek())
        cur.advance()
    if not chars:
        raise cur.error('identifier')
    return ''.join(chars), at


def _string(cur):
    at = (cur.line, cur.col)
    cur.advance()
    chars = []
    while True:
        ch = cur.peek()
        if ch == '':
            raise cur.error('closing quote')
        if ch == '\\':
            cur.advance()
            if cur.peek() not in ("'", '\\'):
                raise cur.error("escape \\' or \\\\")
            chars.append(cur.peek())
        elif ch == "'":
            cur.advance()
            break
        else:
            chars.append(ch)
        cur.advance()
    if not chars:
        raise ParseError(at[0], at[1], 'non-empty string', "''")
    return ''.join(chars)


def _integer(cur):
    at = (cur.line, cur.col)
    digits = []
    while cur.peek() != '' and cur.peek() in '0123456789':
        digits.append(cur.peek())
        cur.advance()
    if len(digits) > 9:
        raise ParseError(at[0], at[1], 'integer below 10**9', ''.join(digits[:12]) + '...')
    return int(''.join(digits))


def _string_list(cur):
    at = (cur.line, cur.col)
    cur.advance()
    items = []
    _skip_spaces(cur, newlines=True)
    if cur.peek() == ']':
        raise ParseError(at[0], at[1], 'non-empty list', '[]')
    while True:
        if cur.peek() != "'":
            raise cur.error('string')
        items.append(_string(cur))
        _skip_spaces(cur, newlines=True)
        if cur.peek() == ']':
            cur.advance()
            return items
        _expect(cur, ',')
        _skip_spaces(cur, newlines=True)


def _argument(cur):
    at = (cur.line, cur.col)
    ch = cur.peek()
    if ch == "'":
        return 'str', _string(cur), at
    if ch != '' and ch in '0123456789':
        return 'int', _integer(cur), at
    if ch == '[':
        return 'list', _string_list(cur), at
    raise cur.error('argument')


def _check_kind(kind, want, value, at):
    if want == 'arm':
        if kind != 'str' or value not in ARM_IDS:
            raise ParseError(at[0], at[1], "'left-arm' or 'right-arm'", repr(value))
    elif want == 'int':
        if kind != 'int' or value < 1:
            raise ParseError(at[0], at[1], 'integer >= 1', repr(value))
    elif kind != want:
        raise ParseError(at[0], at[1], {'str': 'string', 'list': 'list of strings'}[want],
                         repr(value))


def _statement(cur):
    word, at = _identifier(cur)
    if word != 'robot':
        raise ParseError(at[0], at[1], "'robot'", repr(word))
    _skip_spaces(cur)
    _expect(cur, '.')
    _skip_spaces(cur)
    name, name_at = _identifier(cur)
    if name not in COMMANDS:
        raise ParseError(name_at[0], name_at[1], 'command (%s)' %', '.join(sorted(COMMANDS)),
                         repr(name))
    node, kinds = COMMANDS[name]
    _skip_spaces(cur)
    _expect(cur, '(')
    _skip_spaces(cur, newlines=True)
    args = []
    if cur.peek() != ')':
        while True:
            args.append(_argument(cur))
            _skip_spaces(cur, newlines=True)
            if cur.peek() != ',':
                break
            cur.advance()
            _skip_spaces(cur, newlines=True)
    _expect(cur, ')')
    if len(args) != len(kinds):
        raise ParseError(name_at[0], name_at[1], '%i arguments to %s' %(len(kinds), name),
                         '%i' %len(args))
    for (kind, value, arg_at), want in zip(args, kinds):
        _check_kind(kind, want, value, arg_at)
    return node(*[value for _, value, _ in args], span=at)


def _end_of_statement(cur):
    _skip_spaces(cur)
    if cur.peek() == '#':
        while cur.peek() not in ('\n', ''):
            cur.advance()
    if cur.peek() not in ('\n', ''):
        raise cur.error('end of line')


def parse(source):
    '''parses a robot program

    Parameters
    ----------
    source : str or bytes
        program text, bytes need to be UTF-8

    Returns
    -------
    ast : PlanAst
        the parsed statements, each carrying its (line, col) span

    Examples
    --------
    >>> ast = parse("robot.pick_and_place('coke can', 'right side')\\n"
    ...             "robot.say('Sorry, not moving red knife \\nsince its dangerous.')")
    >>> ast.statements[0]
    PickAndPlace(object_name='coke can', region='right side')
    >>> ast.statements[1].message
    'Sorry, not moving red knife \\nsince its dangerous.'
    >>> ast.statements[1].span
    (2, 1)

    Lists, integers and comments

    >>> parse("# bottle\\nrobot.unscrew_cap('bottle', 'cap', 6)  # six twists").statements
    [UnscrewCap(container='bottle', cap='cap', n_twists=6)]
    >>> parse("robot.discard_trash('right-arm', 'left-arm', 'lid', 'push pedal',\\n"
    ...       "                    ['paper cup', 'crumpled paper'])").statements[0].items
    ('paper cup', 'crumpled paper')

    Errors carry line and column

    >>> parse("robot.fly('up')")
    Traceback (most recent call last):
        ...
    biarmpy.exceptions.ParseError: line 1, col 7: expected command (discard_trash, pick_and_place, say, unscrew_cap) but found 'fly'
    >>> parse("robot.say('it\\\\'s', 2)")
    Traceback (most recent call last):
        ...
    biarmpy.exceptions.ParseError: line 1, col 7: expected 1 arguments to say but found 2
    >>> parse("robot.unscrew_cap('bottle', 'cap', 0)")
    Traceback (most recent call last):
        ...
    biarmpy.exceptions.ParseError: line 1, col 36: expected integer >= 1 but found 0
    '''
    if isinstance(source, (bytes, bytearray)):
        try:
            source = bytes(source).decode('utf-8')
        except UnicodeDecodeError as error:
            raise ParseError(1, 1, 'UTF-8 text', 'invalid byte at offset %i' %error.start)
    cur = _Cursor(source)
    statements = []
    while True:
        _skip_blank(cur)
        if cur.peek() == '':
            break
        statements.append(_statement(cur))
        _end_of_statement(cur)
    return PlanAst(statements)


def _quote(text):
    return "'" + text.replace('\\', '\\\\').replace("'", "\\'") + "'"


def _format_arg(value):
    if isinstance(value, int):
        return '%i' %value
    if isinstance(value, (list, tuple)):
        return '[' + ', '.join(_quote(v) for v in value) + ']'
    return _quote(value)


def _format_statement(stmt):
    return 'robot.%s(%s)\n' %(stmt.name, ', '.join(_format_arg(a) for a in stmt.args()))


def print_ast(ast):
    '''canonical program text of an AST, parse(print_ast(ast)) == ast

    Examples
    --------
    >>> print_ast(PlanAst())
    ''
    >>> print_ast(PlanAst([Say("Sorry, I don't understand.")]))
    "robot.say('Sorry, I don\\\\'t understand.')\\n"
    >>> ast = PlanAst([DiscardTrash('left-arm', 'right-arm', 'lid', 'pedal', ['a\\\\b'])])
    >>> parse(print_ast(ast)) == ast
    True
    '''
    return ''.join(_format_statement(stmt) for stmt in ast.statements)


def _recover(ctx):
    '''releases whatever is held and returns home, False if that fails'''
    for arm in ('left', 'right'):
        if ctx.holding(arm) is not None:
            ctx.sim.set_gripper(arm, False)
            ctx.log('release', arm, 'recovery')
    if np.allclose(ctx.q, ctx.model.home_configuration(), atol=1e-2):
        return True
    return go_home(ctx).success


def _run(stmt, ctx):
    if isinstance(stmt, PickAndPlace):
        return pick_and_place(ctx, stmt.object_name, stmt.region)
    if isinstance(stmt, UnscrewCap):
        return unscrew_cap(ctx, stmt.container, stmt.cap, stmt.n_twists)
    if isinstance(stmt, Say):
        return say(ctx, stmt.message)
    start = len(ctx.events)
    items = discard_trash(ctx, stmt.push_arm, stmt.place_arm, stmt.lid, stmt.pedal,
                          list(stmt.items))
    failed = [o for o in items if not o.success]
    detail = '%i/%i items disposed' %(len(items) - len(failed), len(items))
    if failed:
        detail += '; ' + '; '.join('%s: %s' %(o.object_name, o.detail) for o in failed)
    return ctx.outcome(start, failed[0].status if failed else SUCCESS, detail,
                       arm_key(stmt.place_arm), None)


def interpret(ast, ctx, verbose=False):
    '''executes a program statement by statement

    Failures of a statement are recorded and execution continues; when the
    robot cannot be brought back home afterwards the remaining statements
    are not run and recorded as Infeasible.

    Parameters
    ----------
    ast : PlanAst
        program to run

    ctx : SkillContext
        robot, scene and planner settings

    verbose : bool
        print one line per statement
        default : False

    Returns
    -------
    outcomes : list of SkillOutcome
        one per statement, in statement order

    Examples
    --------
    >>> from biarmpy.geometry import test_biarm
    >>> from biarmpy.scene import make_scene
    >>> from biarmpy.skills import SkillContext
    >>> ctx = SkillContext(test_biarm(), make_scene(regions={}, workspace=test_biarm().workspace))
    >>> ast = parse("robot.pick_and_place('coke can', 'right side')\\nrobot.say('done')")
    >>> [o.status for o in interpret(ast, ctx)]
    ['PerceptionFailure', 'Success']
    >>> ctx.utterances
    ['done']
    '''
    outcomes = []
    aborted = None
    for i, stmt in enumerate(ast.statements):
        start = len(ctx.events)
        if aborted is not None:
            outcomes.append(ctx.outcome(start, INFEASIBLE, 'not run, %s' %aborted))
            continue
        ctx.log('statement', None, _format_statement(stmt).strip())
        try:
            out = _run(stmt, ctx)
        except SkillPreconditionError as error:
            out = ctx.outcome(start, INFEASIBLE, str(error))
            aborted = str(error)
        outcomes.append(out)
        if verbose: # pragma: no cover
            print('%i: %s -> %s %s' %(i + 1, stmt.name, out.status, out.detail))
        if not out.success and not isinstance(stmt, Say) and aborted is None:
            if not _recover(ctx):
                aborted = 'robot could not return home'
    return outcomes


_SORT_PATTERN = re.compile(r'^(?:move|put|place|bring) (?:all )?the (?P<group>.+?) '
                           r'(?:to|on|onto|in|into) the (?P<side>left|right) side$')
_OPEN_WORDS = ('open', 'unscrew', 'uncap')
_TRASH_WORDS = ('trash', 'garbage', 'rubbish', 'throw away', 'discard')


def _normalize(instruction):
    return ' '.join(instruction.lower().strip().rstrip('.!').split())


def group_attribute(group):
    '''object attribute an instruction group phrase refers to

    >>> group_attribute('metal objects'), group_attribute('blue objects'), group_attribute('cans')
    ('metallic', 'blue', 'can')
    '''
    if group in SORTING_GROUPS:
        return SORTING_GROUPS[group]
    if group.endswith(' objects'):
        return group[:-len(' objects')]
    if group.endswith('s'):
        return group[:-1]
    return group


def _is_sharp(scene, name):
    return scene.has_object(name) and 'sharp' in scene.object(name).attributes


def _sorting_plan(scene, group, side):
    region = '%s side' %side
    if region not in scene.regions:
        return [Say(NOT_UNDERSTOOD)]
    attribute = group_attribute(group)
    matching = sorted(o.name for o in scene.objects
                      if attribute in o.attributes or o.name == group)
    if not matching:
        return [Say('Sorry, I could not find any %s.' %group)]
    todo = [n for n in matching if region_of(scene, scene.object(n).pose.position) != region]
    if not todo:
        return [Say('Nothing to do, the %s are already on the %s.' %(group, region))]
    statements = [PickAndPlace(n, region) for n in todo if not _is_sharp(scene, n)]
    statements += [Say(REFUSAL %n) for n in todo if _is_sharp(scene, n)]
    return statements


def _open_plan(scene):
    containers = sorted(o.name for o in scene.objects if 'cap' in o.part_labels)
    if not containers:
        return [Say('Sorry, I could not find anything to open.')]
    return [UnscrewCap(containers[0], 'cap', DEFAULT_TWISTS)]


def _trash_plan(scene):
    cans = sorted(o.name for o in scene.objects
                  if 'lid' in o.part_labels and 'push pedal' in o.part_labels)
    items = sorted(o.name for o in scene.objects if 'trash' in o.attributes)
    if not cans or not items:
        return [Say('Sorry, I could not find any trash to throw away.')]
    mean_x = np.mean([scene.object(n).pose.position[0] for n in items])
    place_arm, push_arm = ('left-arm', 'right-arm') if mean_x <= 0 else ('right-arm', 'left-arm')
    return [DiscardTrash(push_arm, place_arm, 'lid', 'push pedal', items)]


def safety_filter(ast, scene):
    '''rewrites every pick of a sharp object into a refusal

    Examples
    --------
    >>> from biarmpy.scene import make_scene, SceneObject, box_shape
    >>> from biarmpy.geometry import Pose
    >>> knife = SceneObject('knife', Pose([0, 0.5, 0.01]), box_shape([0.18, 0.02, 0.02]), {'sharp'})
    >>> safety_filter(PlanAst([PickAndPlace('knife', 'left side')]), make_scene([knife])).statements
    [Say(message='Sorry, not moving knife \\nsince its dangerous.')]
    '''
    statements = []
    for stmt in ast.statements:
        if isinstance(stmt, PickAndPlace) and _is_sharp(scene, stmt.object_name):
            statements.append(Say(REFUSAL %stmt.object_name, span=stmt.span))
        elif isinstance(stmt, DiscardTrash) and any(_is_sharp(scene, i) for i in stmt.items):
            safe = [i for i in stmt.items if not _is_sharp(scene, i)]
            if safe:
                statements.append(DiscardTrash(stmt.push_arm, stmt.place_arm, stmt.lid,
                                               stmt.pedal, safe, span=stmt.span))
            statements += [Say(REFUSAL %i) for i in stmt.items if _is_sharp(scene, i)]
        else:
            statements.append(stmt)
    return PlanAst(statements)


def match_exemplar(planner_input):
    '''exemplar with the same instruction and state, None if there is none

    Instructions are compared case and whitespace insensitive.

    Examples
    --------
    >>> from biarmpy.datautils import load_example_scene, load_exemplars
    >>> from biarmpy.scene import get_state
    >>> scene, _ = load_example_scene('bottle')
    >>> match_exemplar(PlannerInput('open the  bottle.', get_state(scene), load_exemplars()))['plan_text']
    "robot.unscrew_cap('bottle', 'cap', 6)\\n"
    >>> match_exemplar(PlannerInput('open the bottle', '', load_exemplars())) is None
    True
    '''
    instruction = _normalize(planner_input.instruction)
    for exemplar in planner_input.context:
        if (_normalize(exemplar['instruction']) == instruction
                and exemplar['state'].strip() == planner_input.state.strip()):
            return exemplar
    return None


def template_plan(planner_input, scene):
    '''rule-based planner producing a robot program for an instruction

    An exemplar with the same instruction and state is reused verbatim.
    Otherwise sorting instructions ("Move the X to the Y side", "Put the X
    on the Y side") produce one pick_and_place per matching object not yet
    in the target region, opening instructions an unscrew_cap of the capped
    container and trash instructions a discard_trash of all trash items.
    Sharp objects are never picked, the plan says so instead.

    Parameters
    ----------
    planner_input : PlannerInput
        instruction, state text and exemplars

    scene : Scene
        scene the instruction refers to

    Returns
    -------
    ast : PlanAst
        the generated program

    Examples
    --------
    >>> from biarmpy.datautils import load_example_scene
    >>> scene, text = load_example_scene('sorting')
    >>> ast = template_plan(PlannerInput('Put the red objects on the right side'), scene)
    >>> ast == parse(text)
    True
    >>> print_ast(ast).splitlines()[:2]
    ["robot.pick_and_place('coke can', 'right side')", "robot.pick_and_place('small red block', 'right side')"]
    >>> template_plan(PlannerInput('Move the metal objects to the left side'), scene).statements[0]
    PickAndPlace(object_name='coke can', region='left side')
    >>> template_plan(PlannerInput('Dance'), scene).statements
    [Say(message="Sorry, I don't understand.")]
    '''
    exemplar = match_exemplar(planner_input)
    if exemplar is not None:
        return safety_filter(parse(exemplar['plan_text']), scene)

    instruction = _normalize(planner_input.instruction)
    match = _SORT_PATTERN.match(instruction)
    if match:
        statements = _sorting_plan(scene, match.group('group'), match.group('side'))
    elif any(w in instruction for w in _OPEN_WORDS):
        statements = _open_plan(scene)
    elif any(w in instruction for w in _TRASH_WORDS):
        statements = _trash_plan(scene)
    else:
        statements = [Say(NOT_UNDERSTOOD)]
    return safety_filter(PlanAst(statements), scene)


def outcome_counts(outcomes):
    '''number of outcomes per status'''
    counts = {}
    for o in outcomes:
        counts[o.status] = counts.get(o.status, 0) + 1
    return counts
