'''
Custom exceptions and warnings for biarmpy
'''

__all__ = ['ParseError',
           'SegmentationEmpty',
           'PlacementError',
           'SkillPreconditionError',
           'ConfigError',
           'JointLimitWarning',
           'QPConvergenceWarning',
           'TorqueLimitWarning',
           'BadSceneWarning',
           'IncorrectFileType']


class ParseError(Exception):
    '''
    error raised when a robot program does not follow the command grammar.

    Carries the 1-based line and column of the offending token, what the
    parser expected there and what it found instead.

    >>> err = ParseError(2, 7, "'('", "'x'")
    >>> str(err)
    "line 2, col 7: expected '(' but found 'x'"
    >>> (err.line, err.col)
    (2, 7)
    '''
    def __init__(self, line, col, expected, found):
        self.line = line
        self.col = col
        self.expected = expected
        self.found = found
        super(ParseError, self).__init__('line %i, col %i: expected %s but found %s'
                                         %(line, col, expected, found))


class SegmentationEmpty(Exception):
    '''
    error raised when cropping a point cloud with a detection box leaves
    no points. Skills map this onto a perception failure.
    '''


class PlacementError(RuntimeError):
    '''
    error raised when the procedural scene generators fail to find
    a collision-free placement within the rejection sampling budget.
    '''


class SkillPreconditionError(RuntimeError):
    '''
    error raised when a skill is called in a state it does not accept,
    for example placing with an empty gripper.
    '''


class ConfigError(ValueError):
    '''
    error raised when a configuration file is malformed or carries
    an unsupported schema_version.
    '''


class JointLimitWarning(UserWarning):
    '''
    warning class to raise when an initial configuration lies marginally
    outside the joint limits and has been projected back onto them.
    '''


class QPConvergenceWarning(UserWarning):
    '''
    warning class to raise when the operator-splitting QP solver
    reaches its iteration limit without meeting the requested tolerance.
    '''


class TorqueLimitWarning(UserWarning):
    '''
    warning class to raise when the compliant controller commands torques
    above the configured limit. Torque limits are logged only, never enforced.
    '''


class BadSceneWarning(UserWarning):
    '''
    warning class to raise when scene contents had to be repaired on load,
    e.g. attribute strings that were not lowercase.
    '''


class IncorrectFileType(UserWarning):
    '''
    warning class to raise when incorrect file type or incorrectly
    formatted file is provided to data loader
    '''
