'''
Exceptions raised by relkac
'''


class RelKacError(Exception):
    '''Base class for every error raised on purpose by this package.'''


class DomainError(RelKacError, ValueError):
    '''An argument lies outside the domain of a closed-form expression.'''


class QuadratureError(RelKacError, RuntimeError):
    '''Adaptive quadrature did not converge within its budget.'''


class SamplerError(RelKacError, RuntimeError):
    '''A rejection sampler hit its iteration cap.'''


class GridContractError(RelKacError, ValueError):
    '''A path functional needed a time that is missing from the inner grid.'''


class GridCapError(RelKacError, ValueError):
    '''A grid operator would exceed the configured matrix dimension.'''


class BoundaryMassError(RelKacError, ValueError):
    '''A test function carries too much mass next to the periodic boundary.'''


class EigenSolverError(RelKacError, RuntimeError):
    '''Hermitian eigendecomposition failed.'''


class ConfigError(RelKacError, ValueError):
    '''An experiment file or override is invalid.'''
