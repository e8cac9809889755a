"""Python bindings for the fleet DSPL core library."""

from ._core import (  # noqa: F401
    DeviceDescriptor,
    FeatureModel,
    FleetError,
    InitialSelectionInvalid,
    InvalidSelection,
    ModelTooLarge,
    PreconditionError,
    ScenarioError,
    SemanticError,
    SyntaxError,
    TraceFormatError,
    UnknownFeature,
    UnsatisfiedCapability,
    check_selection,
    derive_fconfig,
    diff_selections,
    enumerate_configurations,
    parse_model,
    run_scenario,
    verify_trace,
)

__version__ = "0.1.0"
