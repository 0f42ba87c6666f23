"""Exception hierarchy shared by servers, wallets and readers."""


class DHPError(Exception):
    """Base class; ``kind`` is the wire name used in error envelopes."""

    @property
    def kind(self) -> str:
        return type(self).__name__


class AuthError(DHPError):
    pass


class PolicyError(DHPError):
    pass


class SessionError(DHPError):
    pass


class IntegrityError(DHPError):
    """Reconstructed data does not hash to the stored digest."""


class ProtocolError(DHPError):
    """Malformed, out-of-order or otherwise invalid protocol input."""


class UnknownUser(ProtocolError):
    pass


class TransportError(DHPError):
    """A peer could not be reached or returned garbage."""


class RoundFailed(DHPError):
    """One or more servers rejected a protocol round.

    ``errors`` maps server index to the exception that server raised.
    """

    def __init__(self, errors: dict[int, DHPError]):
        self.errors = errors
        detail = ", ".join(f"server {i}: {e.kind}({e})" for i, e in sorted(errors.items()))
        super().__init__(detail)

    def kinds(self) -> set[str]:
        return {e.kind for e in self.errors.values()}


ERROR_TYPES: dict[str, type[DHPError]] = {
    cls.__name__: cls
    for cls in (DHPError, AuthError, PolicyError, SessionError, IntegrityError,
                ProtocolError, UnknownUser, TransportError)
}
