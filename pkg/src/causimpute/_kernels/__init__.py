"""Solver kernel backends (compiled extension plus pure-numpy fallback)."""
