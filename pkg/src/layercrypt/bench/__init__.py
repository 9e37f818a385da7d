"""Timing, memory and report tooling for layer stacks."""
