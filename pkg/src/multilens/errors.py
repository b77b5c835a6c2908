"""Exception types shared by the package.

``InputError`` marks invalid inputs (bad files, violated preconditions);
the command line maps it to exit status 2. ``RegistrationError`` marks a
computation that cannot produce a result from otherwise valid inputs and
maps to exit status 3.
"""


class InputError(ValueError):
    pass


class RegistrationError(RuntimeError):
    pass
