"""Figure rendering for spdelab study artifacts; file-driven, simulation-free."""

from .readers import (
    SchemaError,
    read_field_csv,
    read_field_dump,
    read_rates,
    read_replicas,
    read_summary,
)
from .render import render_field_snapshot, render_rate_plot, render_replica_spread

__version__ = "0.1.0"
