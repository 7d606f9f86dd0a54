"""Python bindings for the fakeaudio detector toolkit."""

from ._core import (
    ConfigError,
    Error,
    FormatError,
    IoError,
    Model,
    NumericError,
    ShapeError,
    StateError,
    ValidationError,
    bce_loss,
    benchmark,
    check_labels,
    evaluate,
    mann_whitney_u,
    pearson,
    read_container,
    read_fad_csv,
    run_cli,
    split_container,
    time_average,
    train_run,
    write_container,
)

__all__ = [name for name in dir() if not name.startswith("_")]
