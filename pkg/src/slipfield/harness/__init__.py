"""Benchmark, control-loop, latency and I/O harness around the slip detector."""
