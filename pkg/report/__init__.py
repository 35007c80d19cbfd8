"""Summary tables over run directories."""
