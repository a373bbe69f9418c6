"""Exception types raised across gazeqc."""


class GazeQCError(Exception):
    pass


class ParseError(GazeQCError):
    """The input cannot be turned into a Recording at all."""


class EmptyInput(ParseError):
    pass


class NoRecordingBlock(ParseError):
    pass


class MalformedSample(ValueError):
    pass


class MalformedValidation(ValueError):
    pass


class UnknownModel(ValueError):
    pass


class ZeroRate(GazeQCError):
    pass


class EmptyWindow(GazeQCError, ValueError):
    pass


class LayoutError(GazeQCError, ValueError):
    """Base class for invalid AOI layouts."""


class MissingHeader(LayoutError):
    pass


class MalformedRow(LayoutError):
    def __init__(self, line_no: int, reason: str = ''):
        self.line_no = line_no
        super().__init__(f'malformed AOI row at line {line_no}' + (f': {reason}' if reason else ''))


class OverlappingBoxes(LayoutError):
    def __init__(self, pair: tuple[int, int]):
        self.pair = pair
        super().__init__(f'word boxes {pair[0]} and {pair[1]} overlap')


class DegenerateBox(LayoutError):
    def __init__(self, word_index: int):
        self.word_index = word_index
        super().__init__(f'word {word_index} has an empty or inverted box')


class EmptyLayout(LayoutError):
    pass


class UnknownFormat(GazeQCError, ValueError):
    pass
