class InvalidPayload(ValueError):
    pass


class InvalidGenerator(ValueError):
    pass


class InvalidConfig(ValueError):
    pass


class NumericalFailure(ArithmeticError):
    """Activity detection hit an ill-conditioned covariance or a vanishing
    Sherman-Morrison denominator."""
