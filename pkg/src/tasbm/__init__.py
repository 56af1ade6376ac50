"""Temporal activity-state block models and temporal motif statistics."""
