__all__ = (
    "BnkfError",
    "GeometryError",
    "CovarianceError",
    "SingularMatrixError",
    "FilterError",
    "ModelError",
    "TrainingDivergedError",
    "DatasetError",
    "SchemaError",
    "ConfigError",
    "MissingArtifactError",
    "PropertyCheckFailure",
)


class BnkfError(Exception):
    """
    The base exception type for every error raised by this package.

    Command-line entry points catch it and map it onto an exit code,
    see :func:`bnkf.cli.main`.
    """
    pass


class GeometryError(BnkfError):
    """Raised when the sensor-to-target line of sight is undefined."""
    def __init__(self, position, sensor):
        self.position = position
        self.sensor = sensor
        super().__init__(
            'Target position {} coincides with the sensor at {}; '
            'the direction is undefined.'.format(list(position), list(sensor))
        )


class CovarianceError(BnkfError):
    """Raised when a covariance matrix stays non-PSD after jitter repair."""
    def __init__(self, name, min_eigenvalue=None, message=None):
        self.name = name
        self.min_eigenvalue = min_eigenvalue
        if message is None:
            message = 'Covariance <{}> is not positive semi-definite'.format(name)
            if min_eigenvalue is not None:
                message += ' (smallest eigenvalue {:.3e})'.format(min_eigenvalue)
        super().__init__(message)


class SingularMatrixError(CovarianceError):
    """
    Raised when a matrix that must be inverted (innovation covariance,
    estimate covariance) is numerically singular.

    ## Attributes

    `condition`: `float` (2-norm condition number estimate)
    """
    def __init__(self, name, condition):
        self.condition = condition
        super().__init__(
            name,
            message='Matrix <{}> is singular (condition number {:.3e})'.format(name, condition)
        )


class FilterError(BnkfError):
    pass


class ModelError(BnkfError):
    pass


class TrainingDivergedError(ModelError):
    """Raised when the training loss stops being finite."""
    def __init__(self, epoch, step, loss, breakdown=None):
        self.epoch = epoch
        self.step = step
        self.loss = loss
        self.breakdown = breakdown or {}
        terms = ", ".join("{}={:.6g}".format(k, v) for k, v in self.breakdown.items())
        message = 'Training diverged at epoch {}, step {}: loss={}'.format(epoch, step, loss)
        if terms:
            message = '{} ({})'.format(message, terms)
        super().__init__(message)


class DatasetError(BnkfError):
    pass


class SchemaError(DatasetError):
    """Raised when a CSV file does not match its documented header."""
    def __init__(self, path, column, problem):
        self.path = path
        self.column = column
        self.problem = problem
        super().__init__("{}: column '{}' {}".format(path, column, problem))


class ConfigError(BnkfError):
    pass


class MissingArtifactError(BnkfError):
    def __init__(self, missing):
        self.missing = list(missing)
        listed = "\n  ".join(str(m) for m in self.missing)
        super().__init__('{} required artifact(s) missing:\n  {}'.format(len(self.missing), listed))


class PropertyCheckFailure(BnkfError):
    def __init__(self, failed):
        self.failed = list(failed)
        names = ", ".join(self.failed)
        super().__init__('Property check(s) failed: {}'.format(names))
