"""HTTP service exposing the reserving engine."""
