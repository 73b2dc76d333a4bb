"""Label alphabet and transcription helpers.

The blank symbol always occupies index 0; real symbols occupy indices
1..n_symbols.  Transcriptions are tuples of symbol indices and never
contain the blank.
"""

from dataclasses import dataclass, field

from .errors import InvalidLabel

BLANK = 0


@dataclass(frozen=True)
class LabelAlphabet:
    """Ordered set of output symbols, blank excluded."""

    symbols: tuple = field(default_factory=tuple)

    def __post_init__(self):
        syms = tuple(self.symbols)
        object.__setattr__(self, "symbols", syms)
        if len(set(syms)) != len(syms):
            raise InvalidLabel("alphabet symbols must be unique")

    @property
    def n_symbols(self):
        return len(self.symbols)

    @property
    def n_outputs(self):
        """Output dimension of any model over this alphabet (symbols + blank)."""
        return len(self.symbols) + 1

    def encode(self, text):
        """Map a string of symbols to a transcription (tuple of indices)."""
        idx = {s: i + 1 for i, s in enumerate(self.symbols)}
        try:
            return tuple(idx[ch] for ch in text)
        except KeyError as exc:
            raise InvalidLabel(f"unknown symbol {exc.args[0]!r}") from None

    def decode(self, labels):
        """Map a transcription back to a string."""
        validate_transcription(labels, self.n_symbols)
        return "".join(self.symbols[i - 1] for i in labels)


def validate_transcription(labels, n_symbols):
    """Check every index lies in [1, n_symbols]; blank never appears."""
    for i in labels:
        if not (1 <= int(i) <= n_symbols):
            raise InvalidLabel(
                f"label index {i} outside [1, {n_symbols}] (blank is reserved)"
            )
    return tuple(int(i) for i in labels)


DEFAULT_ALPHABET = LabelAlphabet(tuple("abcde"))
