"""Offline figure regeneration for drq experiment logs."""

from .render import PlotSpec, load_episodes, performance_figure, render, safety_figure
