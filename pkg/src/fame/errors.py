"""Exception hierarchy shared by the parsers, scorers and the service."""


class FameError(Exception):
    """Base class for every error raised by this package."""


class FormatError(FameError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LabelError(FormatError):
    pass


class DuplicateIdError(FameError, ValueError):
    def __init__(self, pair_id, line=None):
        self.pair_id = pair_id
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"duplicate pair id {pair_id!r}{where}")


class DegenerateLabelsError(FameError, ValueError):
    pass


class CoverageError(FameError, KeyError):
    """Scores are missing for ids that must be evaluated.

    ``missing`` maps a configuration name (or ``None`` for a single file)
    to the list of uncovered ids.
    """

    def __init__(self, missing):
        self.missing = dict(missing)
        parts = []
        for config, ids in self.missing.items():
            head = ", ".join(repr(i) for i in ids[:5])
            more = f" (+{len(ids) - 5} more)" if len(ids) > 5 else ""
            prefix = f"{config}: " if config is not None else ""
            parts.append(f"{prefix}no score for {head}{more}")
        super().__init__("; ".join(parts))

    def __str__(self):
        return self.args[0]


class ArityError(FameError, ValueError):
    pass


class ArchiveError(FameError):
    pass


class MissingFilesError(ArchiveError):
    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__("missing submission file(s): " + ", ".join(self.missing))


class ShapeError(FameError, ValueError):
    pass


class ScoringError(FameError, ValueError):
    pass


class DegenerateBatchError(FameError, ValueError):
    pass
