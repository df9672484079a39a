"""Verification scenarios, one module per scenario, sharing the report model."""
