"""Exact class (Sigma) measure construction on finite event trees."""
