"""Python bindings for the flushlab C++ library."""

from ._core import (
    BaseFlow,
    BudgetExceededError,
    ConfigError,
    Error,
    Field2D,
    Grid,
    HalfLineProfile,
    NumericError,
    ScalingConfig,
    TransportProfile,
    __version__,
    bundled_datum,
    curl,
    decay_series,
    design_base_flow,
    divergence_max,
    extend_initial_data,
    fit_decay_exponent,
    l2,
    l2_norm,
    make_grid,
    manufactured_convergence,
    perp_grad,
    read_field,
    rescaled_trace_norm,
    run_scaled,
    run_scenario,
    scenario_json,
    solve_boundary_layer,
    step_ns,
    stream_function_of,
    total_radius_loss,
    write_field,
    z_moment,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
