"""Boundary-element computation of dipolar resonances of hard elastic inclusions."""
