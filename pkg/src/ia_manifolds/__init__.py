"""Interference-alignment precoder design by steepest descent on matrix manifolds."""
