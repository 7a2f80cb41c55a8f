"""Nonlocal stability and resilience measures by Monte-Carlo perturbation testing."""
