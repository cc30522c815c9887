class FracvisError(Exception):
    """Base class of all errors raised by fracvis"""


class InvalidParameters(FracvisError, ValueError):
    """Raised when percolation parameters are not valid"""

    def __init__(self, parameters, reason):

        super().__init__(f"{parameters} are not valid parameters: {reason}")

        self.parameters = parameters


class LevelOutOfRange(FracvisError, IndexError):
    """Raised when a level is outside of the available range"""

    def __init__(self, level, lowest, highest):

        msg = f"level {level} is not in [{lowest}, {highest}]"
        super().__init__(msg)

        self.level = level


class OutsideDomain(FracvisError, ValueError):
    """Raised when a geometric or numeric argument is outside of the domain
    of an operation
    """

    def __init__(self, value, reason):

        super().__init__(f"{value} is outside of the domain: {reason}")

        self.value = value


class CertificationFailure(FracvisError):
    """Raised when a witness ray does not first hit its marked square or
    when a square seen by the ray-cast oracle is not marked
    """

    def __init__(self, square, first_hit=None, reason=None):

        if reason is None:
            reason = f"its witness ray first hits {first_hit}"
        super().__init__(f"{square} is not certified: {reason}")

        self.square = square
        self.first_hit = first_hit


class InvalidConfig(FracvisError, ValueError):
    """Raised when an experiment configuration is not valid"""

    def __init__(self, key, reason):

        super().__init__(f"'{key}' is not a valid configuration: {reason}")

        self.key = key


class MalformedFile(FracvisError, ValueError):
    """Raised when a tree, cover or configuration file cannot be read"""

    def __init__(self, path, reason):

        super().__init__(f"{path} is malformed: {reason}")

        self.path = path


class UsageError(FracvisError):
    """Raised when the command line is not used properly"""

    def __init__(self, message):

        super().__init__(message)
