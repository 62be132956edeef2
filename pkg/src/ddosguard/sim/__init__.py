"""Discrete-event simulation harness: config, message bus, engine, metrics."""
