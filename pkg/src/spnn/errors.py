"""Exception hierarchy shared by all spnn modules."""


class SpnnError(Exception):
    """Base class for every error raised by this package."""


# -- fixed point / ring ------------------------------------------------------

class RangeError(SpnnError):
    """A real value falls outside the representable fixed-point range."""


# -- secret sharing ----------------------------------------------------------

class PartyMismatch(SpnnError):
    """Shares presented for reconstruction belong to the same party."""


class DimensionMismatch(SpnnError):
    """Matrix operands have incompatible shapes."""


class TripleReuse(SpnnError):
    """A Beaver triple was offered to a second multiplication."""


class TripleShapeMismatch(SpnnError):
    """A Beaver triple does not fit the requested matrix product."""


class TripleExhausted(SpnnError):
    """No unconsumed triple is available for the current step."""


class ChannelClosed(SpnnError):
    """The pairwise channel was closed mid-protocol."""


# -- Paillier ----------------------------------------------------------------

class PlaintextOutOfRange(SpnnError):
    """Plaintext is negative or not below the public modulus."""


class KeyMismatch(SpnnError):
    """Ciphertexts under different public keys were combined."""


class MalformedCiphertext(SpnnError):
    """Ciphertext fails the basic validity checks (range / gcd)."""


# -- neural ------------------------------------------------------------------

class StaleCache(SpnnError):
    """Backward pass received a cache from a mismatched forward pass."""


class DegenerateLabels(SpnnError):
    """AUC requested without both a positive and a negative label."""


# -- protocol ----------------------------------------------------------------

class InvalidSpec(SpnnError):
    """Network / split specification cannot be realised."""


class RowCountMismatch(SpnnError):
    """Client mini-batches disagree on the number of rows."""


class SequenceViolation(SpnnError):
    """A protocol message arrived out of step order."""


class ShapeMismatch(SpnnError):
    """A protocol payload has an unexpected shape."""


# -- transport ---------------------------------------------------------------

class FrameCorrupt(SpnnError):
    """Wire frame failed magic / length validation."""


class FrameTooLarge(SpnnError):
    """Payload exceeds the framing limit."""


class LinkClosed(SpnnError):
    """Simulated link no longer accepts traffic."""


class ConnectRefused(SpnnError):
    """TCP peer not reachable."""


class HandshakeTimeout(SpnnError):
    """Session handshake did not complete in time."""


class PeerClosed(SpnnError):
    """TCP peer closed the connection mid-stream."""


# -- harness -----------------------------------------------------------------

class ParseError(SpnnError):
    """CSV ingestion failed; message carries row/column location."""


class EmptyDataset(SpnnError):
    """Ingestion produced zero usable rows."""


class DegenerateProperty(SpnnError):
    """Attack target column is constant, no median split exists."""
