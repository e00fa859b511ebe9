"""Error categories shared by the library and mapped to CLI exit codes."""


class DcpkitError(Exception):
    """Base error. ``exit_code`` is what the CLI returns, ``code`` what it prints."""

    exit_code = 1
    code = "error"


class ConfigError(DcpkitError):
    exit_code = 2
    code = "config_error"


class InputError(DcpkitError):
    exit_code = 3
    code = "input_error"


class NumericError(DcpkitError):
    exit_code = 4
    code = "numeric_error"


class DimensionError(ConfigError):
    """Requested or supplied dimensions are inconsistent."""

    code = "dimension_error"


class MissingInputsError(InputError):
    """One or more input files do not exist; all of them are listed."""

    code = "missing_inputs"

    def __init__(self, missing: list[str]):
        self.missing = list(missing)
        preview = ", ".join(self.missing[:10])
        more = f" (+{len(self.missing) - 10} more)" if len(self.missing) > 10 else ""
        super().__init__(f"{len(self.missing)} missing input file(s): {preview}{more}")
